//! Trivariate Bernstein polynomials over axis-aligned cells.
//!
//! Coefficients are stored flat with the first index fastest, the same
//! layout as [`ControlGrid3`]. Every cell carries its parametric box; the
//! Bernstein expansion lives in local coordinates of that box.

use crate::algebra::{Box3, Vec3};
use std::ops::{Add, Mul};

use super::SplineError;

/// All `degree + 1` Bernstein basis values at local parameter `t`.
pub fn bernstein_values(degree: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; degree + 1];
    b[0] = 1.0;
    let s = 1.0 - t;
    for j in 1..=degree {
        let mut saved = 0.0;
        for item in b.iter_mut().take(j) {
            let temp = *item;
            *item = saved + s * temp;
            saved = t * temp;
        }
        b[j] = saved;
    }
    b
}

/// Pascal-triangle binomial coefficients C(n, 0..=n) as exact f64.
pub fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0f64; n + 1];
    for k in 1..=n {
        row[k] = (row[k - 1] * ((n + 1 - k) as f64) / (k as f64)).round();
    }
    row
}

fn split_fiber<T>(coeffs: &[T], t: f64) -> (Vec<T>, Vec<T>)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = coeffs.len();
    let mut work = coeffs.to_vec();
    let mut left = Vec::with_capacity(n);
    let mut right = vec![work[n - 1]; n];
    left.push(work[0]);
    for level in 1..n {
        for i in 0..n - level {
            work[i] = work[i] * (1.0 - t) + work[i + 1] * t;
        }
        left.push(work[0]);
        right[n - 1 - level] = work[n - 1 - level];
    }
    (left, right)
}

fn eval_fiber<T>(coeffs: &[T], basis: &[f64], zero: T) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut acc = zero;
    for (c, b) in coeffs.iter().zip(basis) {
        acc = acc + *c * *b;
    }
    acc
}

fn tensor_eval<T>(degrees: [usize; 3], coeffs: &[T], local: Vec3, zero: T) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let bu = bernstein_values(degrees[0], local.x);
    let bv = bernstein_values(degrees[1], local.y);
    let bw = bernstein_values(degrees[2], local.z);
    let (n0, n1) = (degrees[0] + 1, degrees[1] + 1);
    let mut acc = zero;
    for (k, wk) in bw.iter().enumerate() {
        let mut slice = zero;
        for (j, wj) in bv.iter().enumerate() {
            let row = &coeffs[n0 * (j + n1 * k)..n0 * (j + n1 * k) + n0];
            slice = slice + eval_fiber(row, &bu, zero) * *wj;
        }
        acc = acc + slice * *wk;
    }
    acc
}

fn tensor_split<T>(
    degrees: [usize; 3],
    coeffs: &[T],
    axis: usize,
    t: f64,
) -> (Vec<T>, Vec<T>)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let dims = [degrees[0] + 1, degrees[1] + 1, degrees[2] + 1];
    let fiber_len = dims[axis];
    let n_outer = dims[0] * dims[1] * dims[2] / fiber_len;
    let outer_dims = match axis {
        0 => [dims[1], dims[2]],
        1 => [dims[0], dims[2]],
        _ => [dims[0], dims[1]],
    };
    let flat = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    let mut lo = coeffs.to_vec();
    let mut hi = coeffs.to_vec();
    let mut fiber: Vec<T> = Vec::with_capacity(fiber_len);
    for outer in 0..n_outer {
        let (a, b) = (outer % outer_dims[0], outer / outer_dims[0]);
        fiber.clear();
        for s in 0..fiber_len {
            let (i, j, k) = match axis {
                0 => (s, a, b),
                1 => (a, s, b),
                _ => (a, b, s),
            };
            fiber.push(coeffs[flat(i, j, k)]);
        }
        let (l, r) = split_fiber(&fiber, t);
        for s in 0..fiber_len {
            let (i, j, k) = match axis {
                0 => (s, a, b),
                1 => (a, s, b),
                _ => (a, b, s),
            };
            lo[flat(i, j, k)] = l[s];
            hi[flat(i, j, k)] = r[s];
        }
    }
    (lo, hi)
}

/// A scalar trivariate Bernstein polynomial over a parametric box.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarBezierCell {
    pub cell_box: Box3,
    pub degrees: [usize; 3],
    pub coeffs: Vec<f64>,
}

impl ScalarBezierCell {
    pub fn new(cell_box: Box3, degrees: [usize; 3], coeffs: Vec<f64>) -> Self {
        assert_eq!(
            coeffs.len(),
            (degrees[0] + 1) * (degrees[1] + 1) * (degrees[2] + 1)
        );
        ScalarBezierCell { cell_box, degrees, coeffs }
    }

    pub fn constant(cell_box: Box3, degrees: [usize; 3], value: f64) -> Self {
        let n = (degrees[0] + 1) * (degrees[1] + 1) * (degrees[2] + 1);
        ScalarBezierCell { cell_box, degrees, coeffs: vec![value; n] }
    }

    pub fn eval_local(&self, local: Vec3) -> f64 {
        tensor_eval(self.degrees, &self.coeffs, local, 0.0)
    }

    pub fn eval_global(&self, p: Vec3) -> f64 {
        self.eval_local(self.cell_box.to_local(p))
    }

    pub fn min_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Split in half along every axis; children are ordered with the low/high
    /// x-half fastest, then y, then z.
    pub fn subdivide(&self) -> [ScalarBezierCell; 8] {
        let (x_lo, x_hi) = tensor_split(self.degrees, &self.coeffs, 0, 0.5);
        let halves_x = [x_lo, x_hi];
        let mut out: Vec<ScalarBezierCell> = Vec::with_capacity(8);
        let kids = self.cell_box.octants();
        for iz in 0..2 {
            for iy in 0..2 {
                for (ix, half) in halves_x.iter().enumerate() {
                    let (y_lo, y_hi) = tensor_split(self.degrees, half, 1, 0.5);
                    let ycur = if iy == 0 { y_lo } else { y_hi };
                    let (z_lo, z_hi) = tensor_split(self.degrees, &ycur, 2, 0.5);
                    let zcur = if iz == 0 { z_lo } else { z_hi };
                    out.push(ScalarBezierCell {
                        cell_box: kids[ix + 2 * iy + 4 * iz],
                        degrees: self.degrees,
                        coeffs: zcur,
                    });
                }
            }
        }
        out.try_into().unwrap()
    }

    /// Bernstein product; the result has the componentwise sum of degrees.
    pub fn multiply(&self, other: &ScalarBezierCell) -> Result<ScalarBezierCell, SplineError> {
        if self.cell_box != other.cell_box {
            return Err(SplineError::BoxMismatch);
        }
        let da = self.degrees;
        let db = other.degrees;
        let dc = [da[0] + db[0], da[1] + db[1], da[2] + db[2]];
        let bin_a: Vec<Vec<f64>> = da.iter().map(|&d| binomial_row(d)).collect();
        let bin_b: Vec<Vec<f64>> = db.iter().map(|&d| binomial_row(d)).collect();
        let bin_c: Vec<Vec<f64>> = dc.iter().map(|&d| binomial_row(d)).collect();
        let na = [da[0] + 1, da[1] + 1, da[2] + 1];
        let nb = [db[0] + 1, db[1] + 1, db[2] + 1];
        let nc = [dc[0] + 1, dc[1] + 1, dc[2] + 1];
        let mut coeffs = vec![0.0; nc[0] * nc[1] * nc[2]];
        for ka in 0..na[2] {
            for ja in 0..na[1] {
                for ia in 0..na[0] {
                    let a = self.coeffs[ia + na[0] * (ja + na[1] * ka)];
                    if a == 0.0 {
                        continue;
                    }
                    let wa = bin_a[0][ia] * bin_a[1][ja] * bin_a[2][ka];
                    for kb in 0..nb[2] {
                        for jb in 0..nb[1] {
                            for ib in 0..nb[0] {
                                let b = other.coeffs[ib + nb[0] * (jb + nb[1] * kb)];
                                let w = wa * bin_b[0][ib] * bin_b[1][jb] * bin_b[2][kb];
                                let (ic, jc, kc) = (ia + ib, ja + jb, ka + kb);
                                coeffs[ic + nc[0] * (jc + nc[1] * kc)] += a * b * w;
                            }
                        }
                    }
                }
            }
        }
        for kc in 0..nc[2] {
            for jc in 0..nc[1] {
                for ic in 0..nc[0] {
                    coeffs[ic + nc[0] * (jc + nc[1] * kc)] /=
                        bin_c[0][ic] * bin_c[1][jc] * bin_c[2][kc];
                }
            }
        }
        Ok(ScalarBezierCell { cell_box: self.cell_box, degrees: dc, coeffs })
    }

    /// Degree elevation to `target` (componentwise >= current degrees).
    pub fn elevate(&self, target: [usize; 3]) -> ScalarBezierCell {
        assert!(target.iter().zip(&self.degrees).all(|(t, d)| t >= d));
        let extra = [
            target[0] - self.degrees[0],
            target[1] - self.degrees[1],
            target[2] - self.degrees[2],
        ];
        if extra == [0, 0, 0] {
            return self.clone();
        }
        let ones = ScalarBezierCell::constant(self.cell_box, extra, 1.0);
        self.multiply(&ones).expect("same box")
    }

    /// Derivative with respect to the *local* coordinate along `axis`
    /// (degree drops by one along that axis). Divide by the box width to get
    /// the global-parameter derivative.
    pub fn derivative_local(&self, axis: usize) -> ScalarBezierCell {
        let d = self.degrees[axis];
        if d == 0 {
            return ScalarBezierCell::constant(self.cell_box, self.degrees, 0.0);
        }
        let mut degrees = self.degrees;
        degrees[axis] = d - 1;
        let dims = [self.degrees[0] + 1, self.degrees[1] + 1, self.degrees[2] + 1];
        let ndims = [degrees[0] + 1, degrees[1] + 1, degrees[2] + 1];
        let mut coeffs = vec![0.0; ndims[0] * ndims[1] * ndims[2]];
        for k in 0..ndims[2] {
            for j in 0..ndims[1] {
                for i in 0..ndims[0] {
                    let (mut ip, mut jp, mut kp) = (i, j, k);
                    match axis {
                        0 => ip += 1,
                        1 => jp += 1,
                        _ => kp += 1,
                    }
                    let hi = self.coeffs[ip + dims[0] * (jp + dims[1] * kp)];
                    let lo = self.coeffs[i + dims[0] * (j + dims[1] * k)];
                    coeffs[i + ndims[0] * (j + ndims[1] * k)] = d as f64 * (hi - lo);
                }
            }
        }
        ScalarBezierCell { cell_box: self.cell_box, degrees, coeffs }
    }

    /// Derivative with respect to the global parameter along `axis`.
    pub fn derivative_global(&self, axis: usize) -> ScalarBezierCell {
        let width = self.cell_box.size()[axis];
        let mut out = self.derivative_local(axis);
        for c in out.coeffs.iter_mut() {
            *c /= width;
        }
        out
    }

    pub fn add(&self, other: &ScalarBezierCell) -> Result<ScalarBezierCell, SplineError> {
        if self.cell_box != other.cell_box || self.degrees != other.degrees {
            return Err(SplineError::BoxMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ScalarBezierCell { cell_box: self.cell_box, degrees: self.degrees, coeffs })
    }

    pub fn sub(&self, other: &ScalarBezierCell) -> Result<ScalarBezierCell, SplineError> {
        if self.cell_box != other.cell_box || self.degrees != other.degrees {
            return Err(SplineError::BoxMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ScalarBezierCell { cell_box: self.cell_box, degrees: self.degrees, coeffs })
    }

    pub fn scale(&self, s: f64) -> ScalarBezierCell {
        ScalarBezierCell {
            cell_box: self.cell_box,
            degrees: self.degrees,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }
}

/// A vector-valued trivariate Bezier cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCell {
    pub cell_box: Box3,
    pub degrees: [usize; 3],
    pub points: Vec<Vec3>,
}

impl BezierCell {
    pub fn new(cell_box: Box3, degrees: [usize; 3], points: Vec<Vec3>) -> Self {
        assert_eq!(
            points.len(),
            (degrees[0] + 1) * (degrees[1] + 1) * (degrees[2] + 1)
        );
        BezierCell { cell_box, degrees, points }
    }

    pub fn eval_local(&self, local: Vec3) -> Vec3 {
        tensor_eval(self.degrees, &self.points, local, Vec3::ZERO)
    }

    pub fn eval_global(&self, p: Vec3) -> Vec3 {
        self.eval_local(self.cell_box.to_local(p))
    }

    /// One scalar coordinate (0 = x, 1 = y, 2 = z) as a scalar cell.
    pub fn component(&self, coord: usize) -> ScalarBezierCell {
        ScalarBezierCell {
            cell_box: self.cell_box,
            degrees: self.degrees,
            coeffs: self.points.iter().map(|p| p[coord]).collect(),
        }
    }

    pub fn subdivide(&self) -> [BezierCell; 8] {
        let (x_lo, x_hi) = tensor_split(self.degrees, &self.points, 0, 0.5);
        let halves_x = [x_lo, x_hi];
        let kids = self.cell_box.octants();
        let mut out: Vec<BezierCell> = Vec::with_capacity(8);
        for iz in 0..2 {
            for iy in 0..2 {
                for (ix, half) in halves_x.iter().enumerate() {
                    let (y_lo, y_hi) = tensor_split(self.degrees, half, 1, 0.5);
                    let ycur = if iy == 0 { y_lo } else { y_hi };
                    let (z_lo, z_hi) = tensor_split(self.degrees, &ycur, 2, 0.5);
                    let zcur = if iz == 0 { z_lo } else { z_hi };
                    out.push(BezierCell {
                        cell_box: kids[ix + 2 * iy + 4 * iz],
                        degrees: self.degrees,
                        points: zcur,
                    });
                }
            }
        }
        out.try_into().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn bernstein_partition_of_unity() {
        for d in 0..8 {
            for step in 0..=10 {
                let t = step as f64 / 10.0;
                let sum: f64 = bernstein_values(d, t).iter().sum();
                assert!((sum - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn binomials_exact() {
        assert_eq!(binomial_row(4), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(binomial_row(8)[4], 70.0);
    }

    #[test]
    fn constant_cell_subdivision_is_constant() {
        let c = ScalarBezierCell::constant(Box3::UNIT, [2, 2, 2], 3.5);
        for kid in c.subdivide() {
            assert!(kid.coeffs.iter().all(|&v| (v - 3.5).abs() < 1e-15));
        }
    }

    #[test]
    fn subdivision_children_tile_and_agree() {
        let mut seed = 42;
        let degrees = [3, 2, 2];
        let n = 4 * 3 * 3;
        let coeffs: Vec<f64> = (0..n).map(|_| lcg(&mut seed) * 2.0 - 1.0).collect();
        let cell = ScalarBezierCell::new(Box3::UNIT, degrees, coeffs);
        let kids = cell.subdivide();
        let total: f64 = kids.iter().map(|k| k.cell_box.volume()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for _ in 0..100 {
            let p = Vec3::new(lcg(&mut seed), lcg(&mut seed), lcg(&mut seed));
            let parent = cell.eval_global(p);
            let kid = kids.iter().find(|k| k.cell_box.contains(p)).unwrap();
            assert!((parent - kid.eval_global(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn children_shared_faces_agree() {
        let mut seed = 7;
        let degrees = [2, 2, 2];
        let coeffs: Vec<f64> = (0..27).map(|_| lcg(&mut seed)).collect();
        let cell = ScalarBezierCell::new(Box3::UNIT, degrees, coeffs);
        let kids = cell.subdivide();
        // kid 0 (low x) and kid 1 (high x) share the x = 0.5 plane
        for s in 0..20 {
            let y = (s % 5) as f64 / 4.0;
            let z = (s / 5) as f64 / 3.0;
            let p = Vec3::new(0.5, y * 0.5, z * 0.5);
            let a = kids[0].eval_global(p);
            let b = kids[1].eval_global(p);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn multiply_by_one_is_degree_elevation() {
        let mut seed = 11;
        let coeffs: Vec<f64> = (0..8).map(|_| lcg(&mut seed)).collect();
        let b = ScalarBezierCell::new(Box3::UNIT, [1, 1, 1], coeffs);
        let one = ScalarBezierCell::constant(Box3::UNIT, [1, 0, 2], 1.0);
        let prod = one.multiply(&b).unwrap();
        assert_eq!(prod.degrees, [2, 1, 3]);
        let elev = b.elevate([2, 1, 3]);
        for (p, e) in prod.coeffs.iter().zip(&elev.coeffs) {
            assert!((p - e).abs() < 1e-14);
        }
        for _ in 0..50 {
            let p = Vec3::new(lcg(&mut seed), lcg(&mut seed), lcg(&mut seed));
            assert!((prod.eval_global(p) - b.eval_global(p)).abs() < 1e-13);
        }
    }

    #[test]
    fn monomial_square() {
        // B(x) = x in degree 1 is coeffs [0, 1]; its square in degree 2
        // Bernstein must be [0, 0, 1].
        let x = ScalarBezierCell::new(Box3::UNIT, [1, 0, 0], vec![0.0, 1.0]);
        let sq = x.multiply(&x).unwrap();
        assert_eq!(sq.degrees, [2, 0, 0]);
        let expect = [0.0, 0.0, 1.0];
        for (c, e) in sq.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-15);
        }
    }

    #[test]
    fn product_matches_pointwise() {
        let mut seed = 99;
        let a_coeffs: Vec<f64> = (0..3 * 2 * 2).map(|_| lcg(&mut seed) * 4.0 - 2.0).collect();
        let b_coeffs: Vec<f64> = (0..2 * 3 * 2).map(|_| lcg(&mut seed) * 4.0 - 2.0).collect();
        let a = ScalarBezierCell::new(Box3::UNIT, [2, 1, 1], a_coeffs);
        let b = ScalarBezierCell::new(Box3::UNIT, [1, 2, 1], b_coeffs);
        let prod = a.multiply(&b).unwrap();
        assert_eq!(prod.degrees, [3, 3, 2]);
        for _ in 0..100 {
            let p = Vec3::new(lcg(&mut seed), lcg(&mut seed), lcg(&mut seed));
            let expect = a.eval_global(p) * b.eval_global(p);
            assert!((prod.eval_global(p) - expect).abs() < 1e-11);
        }
    }

    #[test]
    fn box_mismatch_rejected() {
        let a = ScalarBezierCell::constant(Box3::UNIT, [1, 1, 1], 1.0);
        let other = Box3::new(Vec3::ZERO, Vec3::new(0.5, 1.0, 1.0));
        let b = ScalarBezierCell::constant(other, [1, 1, 1], 1.0);
        assert!(a.multiply(&b).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut seed = 5;
        let coeffs: Vec<f64> = (0..4 * 4 * 4).map(|_| lcg(&mut seed)).collect();
        let cell_box = Box3::new(Vec3::new(0.2, 0.0, 0.5), Vec3::new(0.7, 0.5, 1.0));
        let cell = ScalarBezierCell::new(cell_box, [3, 3, 3], coeffs);
        let h = 1e-6;
        for axis in 0..3 {
            let d = cell.derivative_global(axis);
            let p = cell_box.lerp(Vec3::new(0.3, 0.6, 0.4));
            let mut pp = p;
            let mut pm = p;
            pp[axis] += h;
            pm[axis] -= h;
            let fd = (cell.eval_global(pp) - cell.eval_global(pm)) / (2.0 * h);
            assert!((d.eval_global(p) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
