//! Sparse symmetric matrices, incomplete Cholesky, and the preconditioned
//! conjugate gradient solver.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PcgError {
    #[error("matrix is not positive definite (p'Ap = {0} <= 0)")]
    NotSpd(f64),
    #[error("no convergence in {iterations} iterations (relative residual {achieved})")]
    MaxIterations { iterations: usize, achieved: f64 },
}

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Max |A[i][j] - A[j][i]| over stored entries.
    pub fn symmetry_error(&self) -> f64 {
        let mut e = 0.0f64;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                e = e.max((v - self.get(*c, r)).abs());
            }
        }
        e
    }
}

/// Zero-fill incomplete Cholesky factor (lower triangular).
pub struct IncompleteCholesky {
    lower: CsrMatrix,
    // transpose row structure for the backward sweep
    upper: CsrMatrix,
}

impl IncompleteCholesky {
    /// Factor on the lower-triangular pattern of `a`; `None` on breakdown
    /// (nonpositive pivot).
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.n();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &aij) in cols.iter().zip(vals) {
                if j > i {
                    continue;
                }
                let mut sum = aij;
                // dot of rows i and j over columns < j
                {
                    let (ri, rj) = (&rows[i], &rows[j]);
                    let (mut a_it, mut b_it) = (0usize, 0usize);
                    while a_it < ri.len() && b_it < rj.len() {
                        let (ca, va) = ri[a_it];
                        let (cb, vb) = rj[b_it];
                        if ca >= j || cb >= j {
                            break;
                        }
                        match ca.cmp(&cb) {
                            std::cmp::Ordering::Less => a_it += 1,
                            std::cmp::Ordering::Greater => b_it += 1,
                            std::cmp::Ordering::Equal => {
                                sum -= va * vb;
                                a_it += 1;
                                b_it += 1;
                            }
                        }
                    }
                }
                if j == i {
                    if sum <= 0.0 || !sum.is_finite() {
                        return None;
                    }
                    rows[i].push((i, sum.sqrt()));
                } else {
                    let ljj = rows[j].last().expect("diagonal set").1;
                    rows[i].push((j, sum / ljj));
                }
            }
            if rows[i].last().map(|&(c, _)| c) != Some(i) {
                // structurally missing diagonal
                return None;
            }
        }
        let mut tri = Vec::new();
        let mut tri_t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                tri.push((i, j, v));
                tri_t.push((j, i, v));
            }
        }
        Some(IncompleteCholesky {
            lower: CsrMatrix::from_triplets(n, &tri),
            upper: CsrMatrix::from_triplets(n, &tri_t),
        })
    }

    /// z = (L L^T)^{-1} r
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lower.n();
        // forward: L y = r
        let mut y = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = self.lower.row(i);
            let mut acc = r[i];
            let mut diag = 1.0;
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    diag = *v;
                } else {
                    acc -= v * y[*c];
                }
            }
            y[i] = acc / diag;
        }
        // backward: L^T z = y  (rows of `upper` are rows of L^T)
        for i in (0..n).rev() {
            let (cols, vals) = self.upper.row(i);
            let mut acc = y[i];
            let mut diag = 1.0;
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    diag = *v;
                } else {
                    acc -= v * z[*c];
                }
            }
            z[i] = acc / diag;
        }
    }
}

pub enum Preconditioner {
    IncompleteCholesky(IncompleteCholesky),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    /// Incomplete Cholesky when it exists, diagonal scaling otherwise.
    pub fn for_matrix(a: &CsrMatrix) -> Preconditioner {
        match IncompleteCholesky::new(a) {
            Some(ic) => Preconditioner::IncompleteCholesky(ic),
            None => {
                let diag: Vec<f64> = (0..a.n())
                    .map(|i| {
                        let d = a.get(i, i);
                        if d > 0.0 {
                            1.0 / d
                        } else {
                            1.0
                        }
                    })
                    .collect();
                Preconditioner::Jacobi(diag)
            }
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::IncompleteCholesky(ic) => ic.apply(r, z),
            Preconditioner::Jacobi(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = ri * di;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for SPD systems.
///
/// Converges to `|Ax - b| / |b| <= tol`; iteration order is fixed, so the
/// result is deterministic for identical inputs.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<PcgOutcome, PcgError> {
    let n = a.n();
    assert_eq!(b.len(), n);
    let precond = Preconditioner::for_matrix(a);
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(PcgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for iter in 0..max_iter {
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        if res <= tol {
            return Ok(PcgOutcome { x, iterations: iter, relative_residual: res });
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(PcgError::NotSpd(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond.apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let achieved = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
    if achieved <= tol {
        return Ok(PcgOutcome { x, iterations: max_iter, relative_residual: achieved });
    }
    Err(PcgError::MaxIterations { iterations: max_iter, achieved })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn identity(n: usize) -> CsrMatrix {
        let tri: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        CsrMatrix::from_triplets(n, &tri)
    }

    /// Random sparse SPD matrix: banded M, A = M M^T + n I, built densely
    /// and thinned to triplets.
    fn random_spd(n: usize, seed: u64) -> (CsrMatrix, Vec<Vec<f64>>) {
        let mut s = seed;
        let band = 4usize;
        let mut m = vec![vec![0.0f64; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for j in i.saturating_sub(band)..=(i + band).min(n - 1) {
                row[j] = lcg(&mut s) * 2.0 - 1.0;
            }
        }
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += m[i][k] * m[j][k];
                }
                dense[i][j] = acc + if i == j { 2.0 } else { 0.0 };
            }
        }
        let mut tri = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    tri.push((i, j, v));
                }
            }
        }
        (CsrMatrix::from_triplets(n, &tri), dense)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 5.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = identity(10);
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        let out = pcg(&a, &b, None, 1e-12, 50).unwrap();
        assert!(out.iterations <= 1);
        for (x, e) in out.x.iter().zip(&b) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (a, _) = random_spd(40, 7);
        let out = pcg(&a, &vec![0.0; 40], None, 1e-10, 100).unwrap();
        assert!(out.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solves_random_spd_system() {
        let n = 80;
        let (a, dense) = random_spd(n, 99);
        assert!(a.symmetry_error() < 1e-12);
        let mut s = 1u64;
        let xtrue: Vec<f64> = (0..n).map(|_| lcg(&mut s) * 2.0 - 1.0).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = (0..n).map(|j| dense[i][j] * xtrue[j]).sum();
        }
        let out = pcg(&a, &b, None, 1e-12, 1000).unwrap();
        for (x, e) in out.x.iter().zip(&xtrue) {
            assert!((x - e).abs() < 1e-8, "{x} vs {e}");
        }
    }

    #[test]
    fn ic_preconditioner_speeds_convergence() {
        let n = 120;
        let (a, _) = random_spd(n, 5);
        let ic = IncompleteCholesky::new(&a).expect("SPD factors");
        // applying the preconditioner to A's action on ones should roughly
        // recover ones for a diagonally dominant system
        let ones = vec![1.0; n];
        let mut y = vec![0.0; n];
        a.matvec(&ones, &mut y);
        let mut z = vec![0.0; n];
        ic.apply(&y, &mut z);
        let err: f64 = z.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1.0, "IC(0) too inaccurate: {err}");
    }

    #[test]
    fn indefinite_matrix_detected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let b = vec![1.0, 1.0];
        match pcg(&a, &b, None, 1e-10, 10) {
            Err(PcgError::NotSpd(_)) => {}
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }
}
