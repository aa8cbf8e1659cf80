use crate::algebra::{Box3, Mat3, Vec3};
use serde::{Deserialize, Serialize};

use super::{
    eval_basis, eval_basis_ders, BSplineSurface, BezierCell, ControlGrid3, FaceLabel, Grid2,
    KnotVector, SplineError,
};

/// A vector-valued trivariate tensor-product B-spline volume: the map from
/// the unit cube to the physical domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineVolume {
    u_knots: KnotVector,
    v_knots: KnotVector,
    w_knots: KnotVector,
    grid: ControlGrid3,
}

impl BSplineVolume {
    pub fn new(
        u_knots: KnotVector,
        v_knots: KnotVector,
        w_knots: KnotVector,
        grid: ControlGrid3,
    ) -> Result<Self, SplineError> {
        let expected = [u_knots.num_basis(), v_knots.num_basis(), w_knots.num_basis()];
        if grid.dims() != expected {
            return Err(SplineError::GridMismatch {
                expected: expected.iter().product(),
                found: grid.len(),
            });
        }
        Ok(BSplineVolume { u_knots, v_knots, w_knots, grid })
    }

    /// The volume whose control points sit at the Greville abscissae, i.e.
    /// the identity map of the unit cube.
    pub fn identity(u_knots: KnotVector, v_knots: KnotVector, w_knots: KnotVector) -> Self {
        let dims = [u_knots.num_basis(), v_knots.num_basis(), w_knots.num_basis()];
        let grid = ControlGrid3::from_fn(dims, |i, j, k| {
            Vec3::new(u_knots.greville(i), v_knots.greville(j), w_knots.greville(k))
        });
        BSplineVolume { u_knots, v_knots, w_knots, grid }
    }

    pub fn knots(&self, axis: usize) -> &KnotVector {
        match axis {
            0 => &self.u_knots,
            1 => &self.v_knots,
            2 => &self.w_knots,
            _ => panic!("axis out of range"),
        }
    }

    pub fn degrees(&self) -> [usize; 3] {
        [
            self.u_knots.degree(),
            self.v_knots.degree(),
            self.w_knots.degree(),
        ]
    }

    pub fn grid(&self) -> &ControlGrid3 {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut ControlGrid3 {
        &mut self.grid
    }

    pub fn with_grid(&self, grid: ControlGrid3) -> Result<Self, SplineError> {
        BSplineVolume::new(
            self.u_knots.clone(),
            self.v_knots.clone(),
            self.w_knots.clone(),
            grid,
        )
    }

    /// Diagonal of the control-point bounding box; the scale reference for
    /// tolerances.
    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.grid.bounding_box();
        (hi - lo).norm()
    }

    /// Cells of the tensor-product mesh, lexicographic with the xi-span
    /// fastest.
    pub fn cells(&self) -> Vec<Box3> {
        let su = self.u_knots.spans();
        let sv = self.v_knots.spans();
        let sw = self.w_knots.spans();
        let mut out = Vec::with_capacity(su.len() * sv.len() * sw.len());
        for w in &sw {
            for v in &sv {
                for u in &su {
                    out.push(Box3::new(
                        Vec3::new(u.start, v.start, w.start),
                        Vec3::new(u.end, v.end, w.end),
                    ));
                }
            }
        }
        out
    }

    pub fn num_cells(&self) -> usize {
        self.u_knots.spans().len() * self.v_knots.spans().len() * self.w_knots.spans().len()
    }

    /// Index (in `cells()` order) of the cell containing `p`.
    pub fn cell_of_point(&self, p: Vec3) -> Result<usize, SplineError> {
        let locate = |kv: &KnotVector, t: f64| -> Result<usize, SplineError> {
            let span = kv.find_span(t)?;
            Ok(kv
                .spans()
                .iter()
                .position(|s| s.index == span)
                .expect("span of an in-domain parameter is nonempty"))
        };
        let (i, j, k) = (
            locate(&self.u_knots, p.x)?,
            locate(&self.v_knots, p.y)?,
            locate(&self.w_knots, p.z)?,
        );
        let (nu, nv) = (self.u_knots.spans().len(), self.v_knots.spans().len());
        Ok(i + nu * (j + nv * k))
    }

    pub fn eval(&self, p: Vec3) -> Result<Vec3, SplineError> {
        let (su, nu) = eval_basis(&self.u_knots, p.x)?;
        let (sv, nv) = eval_basis(&self.v_knots, p.y)?;
        let (sw, nw) = eval_basis(&self.w_knots, p.z)?;
        let [dp, dq, dr] = self.degrees();
        let mut acc = Vec3::ZERO;
        for (kk, wk) in nw.iter().enumerate() {
            for (jj, wj) in nv.iter().enumerate() {
                let wjk = wj * wk;
                for (ii, wi) in nu.iter().enumerate() {
                    acc += self.grid.get(su - dp + ii, sv - dq + jj, sw - dr + kk) * (wi * wjk);
                }
            }
        }
        Ok(acc)
    }

    /// Jacobian matrix with rows (u, v, w) and columns (d/dxi, d/deta,
    /// d/dzeta), from the exact derivative splines.
    pub fn jacobian(&self, p: Vec3) -> Result<Mat3, SplineError> {
        let (su, du) = eval_basis_ders(&self.u_knots, p.x, 1)?;
        let (sv, dv) = eval_basis_ders(&self.v_knots, p.y, 1)?;
        let (sw, dw) = eval_basis_ders(&self.w_knots, p.z, 1)?;
        let [dp, dq, dr] = self.degrees();
        let mut j = Mat3::zero();
        for kk in 0..=dr {
            for jj in 0..=dq {
                for ii in 0..=dp {
                    let point = self.grid.get(su - dp + ii, sv - dq + jj, sw - dr + kk);
                    let wx = du[1][ii] * dv[0][jj] * dw[0][kk];
                    let wy = du[0][ii] * dv[1][jj] * dw[0][kk];
                    let wz = du[0][ii] * dv[0][jj] * dw[1][kk];
                    for (coord, val) in point.to_array().into_iter().enumerate() {
                        j.m[coord][0] += val * wx;
                        j.m[coord][1] += val * wy;
                        j.m[coord][2] += val * wz;
                    }
                }
            }
        }
        Ok(j)
    }

    /// Hessians of the three coordinate functions (Hu, Hv, Hw); each is
    /// symmetric by construction.
    pub fn hessians(&self, p: Vec3) -> Result<[Mat3; 3], SplineError> {
        let (su, du) = eval_basis_ders(&self.u_knots, p.x, 2)?;
        let (sv, dv) = eval_basis_ders(&self.v_knots, p.y, 2)?;
        let (sw, dw) = eval_basis_ders(&self.w_knots, p.z, 2)?;
        let [dp, dq, dr] = self.degrees();
        let mut h = [Mat3::zero(); 3];
        for kk in 0..=dr {
            for jj in 0..=dq {
                for ii in 0..=dp {
                    let point = self.grid.get(su - dp + ii, sv - dq + jj, sw - dr + kk);
                    // weights for the six distinct second partials
                    let w00 = du[2][ii] * dv[0][jj] * dw[0][kk];
                    let w11 = du[0][ii] * dv[2][jj] * dw[0][kk];
                    let w22 = du[0][ii] * dv[0][jj] * dw[2][kk];
                    let w01 = du[1][ii] * dv[1][jj] * dw[0][kk];
                    let w02 = du[1][ii] * dv[0][jj] * dw[1][kk];
                    let w12 = du[0][ii] * dv[1][jj] * dw[1][kk];
                    for (coord, val) in point.to_array().into_iter().enumerate() {
                        h[coord].m[0][0] += val * w00;
                        h[coord].m[1][1] += val * w11;
                        h[coord].m[2][2] += val * w22;
                        h[coord].m[0][1] += val * w01;
                        h[coord].m[0][2] += val * w02;
                        h[coord].m[1][2] += val * w12;
                    }
                }
            }
        }
        for hc in h.iter_mut() {
            hc.m[1][0] = hc.m[0][1];
            hc.m[2][0] = hc.m[0][2];
            hc.m[2][1] = hc.m[1][2];
        }
        Ok(h)
    }

    /// Restriction of the volume to one of its six boundary faces.
    pub fn face(&self, label: FaceLabel) -> BSplineSurface {
        let dims = self.grid.dims();
        let (axis, value) = label.fixed_axis();
        let fixed_idx = if value == 0.0 { 0 } else { dims[axis] - 1 };
        let (a_axis, b_axis) = label.free_axes();
        let pick_knots = |ax: usize| -> KnotVector { self.knots(ax).clone() };
        let grid = Grid2::from_fn([dims[a_axis], dims[b_axis]], |a, b| {
            let mut idx = [0usize; 3];
            idx[axis] = fixed_idx;
            idx[a_axis] = a;
            idx[b_axis] = b;
            self.grid.get(idx[0], idx[1], idx[2])
        });
        BSplineSurface {
            label,
            knots_a: pick_knots(a_axis),
            knots_b: pick_knots(b_axis),
            grid,
        }
    }

    /// Knot insertion along `axis`; the refined volume reproduces this one
    /// exactly.
    pub fn insert_knot(&self, axis: usize, t: f64) -> Result<BSplineVolume, SplineError> {
        let (new_kv, plan) = self.knots(axis).insert_knot(t)?;
        let grid = self.grid.map_fibers(axis, |fiber| plan.apply(fiber));
        let mut kvs = [
            self.u_knots.clone(),
            self.v_knots.clone(),
            self.w_knots.clone(),
        ];
        kvs[axis] = new_kv;
        let [u, v, w] = kvs;
        BSplineVolume::new(u, v, w, grid)
    }

    /// Per-cell Bezier extraction by knot insertion to full multiplicity.
    pub fn to_bezier_cells(&self) -> Vec<BezierCell> {
        let [p, q, r] = self.degrees();
        let mut grid = self.grid.clone();
        for axis in 0..3 {
            let (_, plans) = self.knots(axis).to_full_multiplicity();
            for plan in plans {
                grid = grid.map_fibers(axis, |fiber| plan.apply(fiber));
            }
        }
        let su = self.u_knots.spans();
        let sv = self.v_knots.spans();
        let sw = self.w_knots.spans();
        let mut out = Vec::with_capacity(su.len() * sv.len() * sw.len());
        for (kw, w) in sw.iter().enumerate() {
            for (jv, v) in sv.iter().enumerate() {
                for (iu, u) in su.iter().enumerate() {
                    let cell_box = Box3::new(
                        Vec3::new(u.start, v.start, w.start),
                        Vec3::new(u.end, v.end, w.end),
                    );
                    let mut points =
                        Vec::with_capacity((p + 1) * (q + 1) * (r + 1));
                    for c in 0..=r {
                        for b in 0..=q {
                            for a in 0..=p {
                                points.push(grid.get(iu * p + a, jv * q + b, kw * r + c));
                            }
                        }
                    }
                    out.push(BezierCell::new(cell_box, [p, q, r], points));
                }
            }
        }
        out
    }

    /// Exact degree elevation of a linear direction to quadratic, realized
    /// as the per-span Bezier glue (piecewise-linear data is C0, so the
    /// elevated knot multiplicities are full).
    pub fn elevate_linear_axes(&self) -> Result<BSplineVolume, SplineError> {
        let mut vol = self.clone();
        for axis in 0..3 {
            if vol.knots(axis).degree() == 0 {
                return Err(SplineError::Unsupported(
                    "degree-0 volumes cannot be elevated".into(),
                ));
            }
            while vol.knots(axis).degree() < 2 {
                vol = vol.elevate_axis_once(axis)?;
            }
        }
        Ok(vol)
    }

    fn elevate_axis_once(&self, axis: usize) -> Result<BSplineVolume, SplineError> {
        let kv = self.knots(axis);
        let p = kv.degree();
        if p != 1 {
            return Err(SplineError::Unsupported(format!(
                "only linear directions are elevated on ingest, got degree {p}"
            )));
        }
        // Piecewise-linear spans: elevated quadratic Bezier glue with
        // doubled interior knots.
        let spans = kv.spans();
        let mut new_knots = vec![0.0; 3];
        for s in &spans[..spans.len() - 1] {
            new_knots.push(s.end);
            new_knots.push(s.end);
        }
        new_knots.extend([1.0, 1.0, 1.0]);
        let new_kv = KnotVector::new(2, new_knots)?;
        let grid = self.grid.map_fibers(axis, |fiber| {
            let mut out = Vec::with_capacity(2 * fiber.len() - 1);
            out.push(fiber[0]);
            for w in fiber.windows(2) {
                out.push((w[0] + w[1]) * 0.5);
                out.push(w[1]);
            }
            out
        });
        let mut kvs = [
            self.u_knots.clone(),
            self.v_knots.clone(),
            self.w_knots.clone(),
        ];
        kvs[axis] = new_kv;
        let [u, v, w] = kvs;
        BSplineVolume::new(u, v, w, grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn cubic_kv() -> KnotVector {
        KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.0, 0.4, 0.7, 1.0, 1.0, 1.0, 1.0]).unwrap()
    }

    fn random_volume(seed: u64) -> BSplineVolume {
        let mut s = seed;
        let base = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        let dims = base.grid().dims();
        let grid = ControlGrid3::from_fn(dims, |i, j, k| {
            let g = base.grid().get(i, j, k);
            g + Vec3::new(
                lcg(&mut s) * 0.06 - 0.03,
                lcg(&mut s) * 0.06 - 0.03,
                lcg(&mut s) * 0.06 - 0.03,
            )
        });
        base.with_grid(grid).unwrap()
    }

    /// Full tensor sum over every control point using the independent
    /// recursive basis definition; deliberately naive.
    fn naive_eval(vol: &BSplineVolume, p: Vec3) -> Vec3 {
        fn naive_basis(knots: &[f64], i: usize, p: usize, u: f64) -> f64 {
            if p == 0 {
                let last = u == 1.0 && knots[i + 1] == 1.0 && knots[i] < 1.0;
                return if (knots[i] <= u && u < knots[i + 1]) || last { 1.0 } else { 0.0 };
            }
            let mut v = 0.0;
            let d1 = knots[i + p] - knots[i];
            if d1 > 0.0 {
                v += (u - knots[i]) / d1 * naive_basis(knots, i, p - 1, u);
            }
            let d2 = knots[i + p + 1] - knots[i + 1];
            if d2 > 0.0 {
                v += (knots[i + p + 1] - u) / d2 * naive_basis(knots, i + 1, p - 1, u);
            }
            v
        }
        let dims = vol.grid().dims();
        let mut acc = Vec3::ZERO;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let w = naive_basis(vol.knots(0).knots(), i, vol.knots(0).degree(), p.x)
                        * naive_basis(vol.knots(1).knots(), j, vol.knots(1).degree(), p.y)
                        * naive_basis(vol.knots(2).knots(), k, vol.knots(2).degree(), p.z);
                    acc += vol.grid().get(i, j, k) * w;
                }
            }
        }
        acc
    }

    #[test]
    fn identity_volume_reproduces_points() {
        let vol = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        let p = Vec3::new(0.3, 0.7, 0.1);
        let out = vol.eval(p).unwrap();
        assert!((out - p).norm() < 1e-12);
    }

    #[test]
    fn corner_interpolates_first_control() {
        let vol = random_volume(3);
        let out = vol.eval(Vec3::ZERO).unwrap();
        assert!((out - vol.grid().get(0, 0, 0)).norm() < 1e-15);
    }

    #[test]
    fn eval_matches_naive_full_sum() {
        let vol = random_volume(17);
        let mut s = 555u64;
        for _ in 0..100 {
            let p = Vec3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s));
            let fast = vol.eval(p).unwrap();
            let slow = naive_eval(&vol, p);
            assert!((fast - slow).norm() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_rejected() {
        let vol = random_volume(1);
        assert!(vol.eval(Vec3::new(-0.1, 0.5, 0.5)).is_err());
        assert!(vol.eval(Vec3::new(0.1, 1.5, 0.5)).is_err());
    }

    #[test]
    fn identity_jacobian_is_identity() {
        let vol = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        let j = vol.jacobian(Vec3::new(0.35, 0.82, 0.5)).unwrap();
        assert!(j.max_abs_diff(&Mat3::IDENTITY) < 1e-12);
    }

    #[test]
    fn affine_volume_has_constant_jacobian() {
        let base = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        let dims = base.grid().dims();
        let grid = ControlGrid3::from_fn(dims, |i, j, k| {
            let g = base.grid().get(i, j, k);
            Vec3::new(2.0 * g.x, 3.0 * g.y, 4.0 * g.z)
        });
        let vol = base.with_grid(grid).unwrap();
        for &p in &[Vec3::new(0.1, 0.2, 0.9), Vec3::new(0.6, 0.6, 0.3)] {
            let j = vol.jacobian(p).unwrap();
            let expect = Mat3::diagonal(Vec3::new(2.0, 3.0, 4.0));
            assert!(j.max_abs_diff(&expect) < 1e-12);
            assert!((j.det() - 24.0).abs() < 1e-11);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let vol = random_volume(29);
        let h = 1e-5;
        let mut s = 99u64;
        for _ in 0..20 {
            let p = Vec3::new(
                0.05 + 0.9 * lcg(&mut s),
                0.05 + 0.9 * lcg(&mut s),
                0.05 + 0.9 * lcg(&mut s),
            );
            let j = vol.jacobian(p).unwrap();
            for col in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[col] += h;
                pm[col] -= h;
                let d = (vol.eval(pp).unwrap() - vol.eval(pm).unwrap()) / (2.0 * h);
                for row in 0..3 {
                    let fd = d[row];
                    assert!(
                        (j.m[row][col] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                        "J[{row}][{col}] = {} vs fd {}",
                        j.m[row][col],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn affine_volume_hessians_vanish() {
        let base = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        let dims = base.grid().dims();
        let grid = ControlGrid3::from_fn(dims, |i, j, k| {
            let g = base.grid().get(i, j, k);
            Vec3::new(
                1.0 + 2.0 * g.x + 0.5 * g.y,
                3.0 * g.y - 0.25 * g.z,
                4.0 * g.z + 0.125 * g.x,
            )
        });
        let vol = base.with_grid(grid).unwrap();
        let hs = vol.hessians(Vec3::new(0.3, 0.4, 0.6)).unwrap();
        for h in hs {
            assert!(h.max_abs_diff(&Mat3::zero()) < 1e-10);
        }
    }

    #[test]
    fn hessians_symmetric_and_match_fd() {
        let vol = random_volume(31);
        // off the interior knot lines (0.4, 0.7) so the stencil stays in
        // one polynomial piece
        let p = Vec3::new(0.45, 0.3, 0.55);
        let hs = vol.hessians(p).unwrap();
        for h in &hs {
            assert_eq!(h.m[0][1], h.m[1][0]);
            assert_eq!(h.m[0][2], h.m[2][0]);
            assert_eq!(h.m[1][2], h.m[2][1]);
        }
        let h = 1e-4;
        for a in 0..3 {
            for b in 0..3 {
                let mut ppp = p;
                let mut ppm = p;
                let mut pmp = p;
                let mut pmm = p;
                ppp[a] += h;
                ppp[b] += h;
                ppm[a] += h;
                ppm[b] -= h;
                pmp[a] -= h;
                pmp[b] += h;
                pmm[a] -= h;
                pmm[b] -= h;
                let fd = (naive4(&vol, ppp) - naive4(&vol, ppm) - naive4(&vol, pmp)
                    + naive4(&vol, pmm))
                    / (4.0 * h * h);
                for coord in 0..3 {
                    let got = hs[coord].m[a][b];
                    assert!(
                        (got - fd[coord]).abs() <= 1e-4 * (1.0 + fd[coord].abs()),
                        "H{coord}[{a}][{b}] {got} vs {}",
                        fd[coord]
                    );
                }
            }
        }
    }

    fn naive4(vol: &BSplineVolume, p: Vec3) -> Vec3 {
        vol.eval(p).unwrap()
    }

    #[test]
    fn face_restriction_matches_volume() {
        let vol = random_volume(41);
        for label in FaceLabel::ALL {
            let face = vol.face(label);
            let (axis, value) = label.fixed_axis();
            let (a_axis, b_axis) = label.free_axes();
            for s in 0..5 {
                let (a, b) = (s as f64 / 4.0, (4 - s) as f64 / 4.0);
                let mut p = Vec3::ZERO;
                p[axis] = value;
                p[a_axis] = a;
                p[b_axis] = b;
                let from_vol = vol.eval(p).unwrap();
                let from_face = face.eval(a, b).unwrap();
                assert!((from_vol - from_face).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn knot_insertion_preserves_geometry() {
        let vol = random_volume(53);
        let refined = vol.insert_knot(1, 0.55).unwrap();
        assert_eq!(refined.grid().dims()[1], vol.grid().dims()[1] + 1);
        let mut s = 777u64;
        for _ in 0..200 {
            let p = Vec3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s));
            let a = vol.eval(p).unwrap();
            let b = refined.eval(p).unwrap();
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn bezier_extraction_single_cell_is_control_net() {
        let kv = KnotVector::bezier(2);
        let vol = BSplineVolume::identity(kv.clone(), kv.clone(), kv);
        let cells = vol.to_bezier_cells();
        assert_eq!(cells.len(), 1);
        for (cp, bp) in vol.grid().points().iter().zip(&cells[0].points) {
            assert!((*cp - *bp).norm() < 1e-15);
        }
    }

    #[test]
    fn bezier_extraction_matches_direct_eval() {
        let vol = random_volume(67);
        let cells = vol.to_bezier_cells();
        assert_eq!(cells.len(), vol.num_cells());
        let scale = vol.bbox_diagonal();
        let mut s = 4242u64;
        for _ in 0..1000 {
            let p = Vec3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s));
            let idx = vol.cell_of_point(p).unwrap();
            let direct = vol.eval(p).unwrap();
            let extracted = cells[idx].eval_global(p);
            assert!(
                (direct - extracted).norm() < 1e-10 * scale,
                "extraction mismatch at {p:?}"
            );
        }
    }

    #[test]
    fn extracted_cell_centers_on_identity() {
        let vol = BSplineVolume::identity(cubic_kv(), cubic_kv(), cubic_kv());
        for cell in vol.to_bezier_cells() {
            let c = cell.cell_box.center();
            assert!((cell.eval_global(c) - c).norm() < 1e-12);
        }
    }

    #[test]
    fn adjacent_extracted_cells_share_face_coefficients() {
        let vol = random_volume(71);
        let cells = vol.to_bezier_cells();
        let [p, q, r] = vol.degrees();
        let nu = vol.knots(0).spans().len();
        // neighbors along xi: high-x face of cell (i) == low-x face of (i+1)
        for k in 0..vol.knots(2).spans().len() {
            for j in 0..vol.knots(1).spans().len() {
                for i in 0..nu - 1 {
                    let a = &cells[i + nu * (j + vol.knots(1).spans().len() * k)];
                    let b = &cells[i + 1 + nu * (j + vol.knots(1).spans().len() * k)];
                    for c in 0..=r {
                        for bq in 0..=q {
                            let pa = a.points[p + (p + 1) * (bq + (q + 1) * c)];
                            let pb = b.points[(p + 1) * (bq + (q + 1) * c)];
                            assert!((pa - pb).norm() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn linear_elevation_exact() {
        let kv1 = KnotVector::new(1, vec![0.0, 0.0, 0.5, 1.0, 1.0]).unwrap();
        let vol = BSplineVolume::identity(kv1.clone(), kv1.clone(), kv1);
        let mut s = 8u64;
        let dims = vol.grid().dims();
        let grid = ControlGrid3::from_fn(dims, |i, j, k| {
            vol.grid().get(i, j, k) + Vec3::new(lcg(&mut s) * 0.1, lcg(&mut s) * 0.1, 0.0)
        });
        let vol = vol.with_grid(grid).unwrap();
        let elevated = vol.elevate_linear_axes().unwrap();
        assert_eq!(elevated.degrees(), [2, 2, 2]);
        for _ in 0..200 {
            let p = Vec3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s));
            assert!((vol.eval(p).unwrap() - elevated.eval(p).unwrap()).norm() < 1e-13);
        }
    }
}
