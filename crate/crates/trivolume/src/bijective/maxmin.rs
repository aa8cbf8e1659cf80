//! The slack-variable max-min model: maximize `t - lambda E(G)` subject to
//! `det(J(p_k)) >= t` for every collocation point and `t >= delta`, over the
//! free control coordinates. Stated below in minimization convention.

use crate::algebra::{Mat3, Vec3};
use crate::sparse::CsrMatrix;
use crate::spline::{eval_basis_ders, BSplineVolume};
use crate::Box3;
use rayon::prelude::*;

/// Points per parallel work chunk; partial gradients are combined in chunk
/// order so results do not depend on the thread schedule.
const POINT_CHUNK: usize = 256;

/// A smooth inequality-constrained problem: minimize f(x) subject to
/// c_k(x) >= 0.
pub trait ConstrainedProblem {
    fn num_vars(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Objective value; fills `grad`.
    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// All constraint values into `out` (length `num_constraints`).
    fn constraints(&self, x: &[f64], out: &mut [f64]);
    /// Accumulate `sum_k coeffs[k] * grad c_k(x)` into `acc`.
    fn accumulate_constraint_gradients(&self, x: &[f64], coeffs: &[f64], acc: &mut [f64]);
    /// Variable indices constraint `k` actually depends on.
    fn constraint_support(&self, k: usize) -> Vec<usize>;

    /// Log-barrier value `f(x) - mu sum_k ln c_k(x)` with its gradient, or
    /// `+inf` when any constraint is nonpositive (gradient content is then
    /// unspecified). Implementations may fuse the passes.
    fn barrier_value_grad(&self, x: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        let m = self.num_constraints();
        let mut c = vec![0.0; m];
        self.constraints(x, &mut c);
        if c.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        let f = self.objective(x, grad);
        let mut coeffs = vec![0.0; m];
        let mut barrier = 0.0;
        for (k, &ck) in c.iter().enumerate() {
            barrier -= ck.ln();
            coeffs[k] = -mu / ck;
        }
        self.accumulate_constraint_gradients(x, &coeffs, grad);
        f + mu * barrier
    }
}

/// Per collocation point: the fixed part of the Jacobian and the basis
/// gradients of the active free controls.
#[derive(Clone)]
struct PointData {
    /// Jacobian contribution of all fixed controls.
    fixed_jacobian: Mat3,
    /// (free-control slot, basis gradient at the point).
    active: Vec<(usize, Vec3)>,
}

/// The assembled max-min problem over one free-control set.
///
/// Variables: `x = [c_0x, c_0y, c_0z, c_1x, ..., t]`, one triple per free
/// control in `free` order, slack last. Objective (minimized):
/// `lambda * E(G) - t` with E the fairness form. Constraints:
/// `det(J(p_k)) - t >= 0` for each point, then `t - delta >= 0`.
///
/// Dropping the floor (`without_floor`) removes the `t >= delta`
/// constraint, leaving the pure max-min problem, which is strictly
/// feasible for any control state by choosing t below the smallest
/// determinant.
#[derive(Clone)]
pub struct MaxMinProblem {
    /// Whether the `t >= delta` constraint is enforced.
    floor: bool,
    lambda: f64,
    delta: f64,
    /// Fairness form restricted to the free set.
    fairness_ff: CsrMatrix,
    /// Per-coordinate coupling vector: F_fb * boundary values.
    fairness_coupling: [Vec<f64>; 3],
    points: Vec<PointData>,
    n_free: usize,
    /// Flat grid indices of the free controls (for reporting).
    free: Vec<usize>,
}

impl MaxMinProblem {
    /// Assemble over an explicit free-control set (flat grid indices).
    /// `fairness_full` is the fairness form over all controls of `vol`.
    pub fn assemble(
        vol: &BSplineVolume,
        points: &[Vec3],
        lambda: f64,
        delta: f64,
        free: &[usize],
        fairness_full: &CsrMatrix,
    ) -> Self {
        assert!(!points.is_empty(), "collocation set must be nonempty");
        assert!(lambda > 0.0 && delta > 0.0);
        let n_controls = vol.grid().len();
        let mut slot_of: Vec<Option<usize>> = vec![None; n_controls];
        for (slot, &g) in free.iter().enumerate() {
            slot_of[g] = Some(slot);
        }

        // reduce the fairness form to the free set
        let mut tri = Vec::new();
        let mut coupling = [
            vec![0.0; free.len()],
            vec![0.0; free.len()],
            vec![0.0; free.len()],
        ];
        for (fi, &g) in free.iter().enumerate() {
            let (cols, vals) = fairness_full.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                match slot_of[c] {
                    Some(fj) => tri.push((fi, fj, v)),
                    None => {
                        let b = vol.grid().points()[c];
                        coupling[0][fi] += v * b.x;
                        coupling[1][fi] += v * b.y;
                        coupling[2][fi] += v * b.z;
                    }
                }
            }
        }
        let fairness_ff = CsrMatrix::from_triplets(free.len(), &tri);

        let degrees = vol.degrees();
        let dims = vol.grid().dims();
        let point_data: Vec<PointData> = points
            .iter()
            .map(|&p| {
                let (su, du) = eval_basis_ders(vol.knots(0), p.x, 1).expect("in domain");
                let (sv, dv) = eval_basis_ders(vol.knots(1), p.y, 1).expect("in domain");
                let (sw, dw) = eval_basis_ders(vol.knots(2), p.z, 1).expect("in domain");
                let mut fixed_jacobian = Mat3::zero();
                let mut active = Vec::new();
                for kk in 0..=degrees[2] {
                    for jj in 0..=degrees[1] {
                        for ii in 0..=degrees[0] {
                            let gi = (su - degrees[0] + ii)
                                + dims[0]
                                    * ((sv - degrees[1] + jj)
                                        + dims[1] * (sw - degrees[2] + kk));
                            let basis_grad = Vec3::new(
                                du[1][ii] * dv[0][jj] * dw[0][kk],
                                du[0][ii] * dv[1][jj] * dw[0][kk],
                                du[0][ii] * dv[0][jj] * dw[1][kk],
                            );
                            match slot_of[gi] {
                                Some(slot) => active.push((slot, basis_grad)),
                                None => {
                                    let point = vol.grid().points()[gi];
                                    for (coord, val) in
                                        point.to_array().into_iter().enumerate()
                                    {
                                        fixed_jacobian.m[coord][0] += val * basis_grad.x;
                                        fixed_jacobian.m[coord][1] += val * basis_grad.y;
                                        fixed_jacobian.m[coord][2] += val * basis_grad.z;
                                    }
                                }
                            }
                        }
                    }
                }
                PointData { fixed_jacobian, active }
            })
            .collect();

        MaxMinProblem {
            floor: true,
            lambda,
            delta,
            fairness_ff,
            fairness_coupling: coupling,
            points: point_data,
            n_free: free.len(),
            free: free.to_vec(),
        }
    }

    /// The same problem without the slack floor `t >= delta`.
    pub fn without_floor(&self) -> MaxMinProblem {
        let mut out = self.clone();
        out.floor = false;
        out
    }

    pub fn free_controls(&self) -> &[usize] {
        &self.free
    }

    pub fn slack_index(&self) -> usize {
        3 * self.n_free
    }

    /// Pack the current free-control coordinates of `vol` plus slack `t`.
    pub fn pack(&self, vol: &BSplineVolume, t: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_vars());
        for &g in &self.free {
            let p = vol.grid().points()[g];
            x.extend_from_slice(&p.to_array());
        }
        x.push(t);
        x
    }

    /// Write the free-control coordinates of `x` back into `vol`.
    pub fn unpack_into(&self, x: &[f64], vol: &mut BSplineVolume) {
        for (slot, &g) in self.free.iter().enumerate() {
            let (i, j, k) = vol.grid().unflatten(g);
            vol.grid_mut()
                .set(i, j, k, Vec3::new(x[3 * slot], x[3 * slot + 1], x[3 * slot + 2]));
        }
    }

    fn jacobian_at(&self, data: &PointData, x: &[f64]) -> Mat3 {
        let mut j = data.fixed_jacobian;
        for &(slot, bg) in &data.active {
            for coord in 0..3 {
                let v = x[3 * slot + coord];
                j.m[coord][0] += v * bg.x;
                j.m[coord][1] += v * bg.y;
                j.m[coord][2] += v * bg.z;
            }
        }
        j
    }

    /// det(J(p_k)) for every point under the variable vector `x`.
    pub fn point_dets(&self, x: &[f64]) -> Vec<f64> {
        self.points
            .par_iter()
            .map(|d| self.jacobian_at(d, x).det())
            .collect()
    }

    /// The maximized objective `t - lambda E(G)` (negated minimization
    /// objective).
    pub fn maximized_objective(&self, x: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.num_vars()];
        -self.objective(x, &mut grad)
    }

    /// Two-sided squared-hinge untangling objective
    /// `sum_k max(0, target - det_k)^2 + max(0, det_k - ceiling)^2`
    /// with its gradient over the control variables (the slack entry stays
    /// zero). The floor lifts folded determinants regardless of the
    /// fairness scale; the ceiling removes the degenerate minimizers that
    /// inflate the map until every sample clears the floor.
    pub fn hinge_value_grad(
        &self,
        x: &[f64],
        target: f64,
        ceiling: f64,
        grad: &mut [f64],
    ) -> f64 {
        let n = self.num_vars();
        let partials: Vec<(Vec<f64>, f64)> = self
            .points
            .par_chunks(POINT_CHUNK)
            .map(|pts| {
                let mut local = vec![0.0; n];
                let mut value = 0.0;
                for d in pts {
                    let j = self.jacobian_at(d, x);
                    let det = j.det();
                    let gap_lo = target - det;
                    let gap_hi = det - ceiling;
                    let w;
                    if gap_lo > 0.0 {
                        value += gap_lo * gap_lo;
                        w = -2.0 * gap_lo;
                    } else if gap_hi > 0.0 {
                        value += gap_hi * gap_hi;
                        w = 2.0 * gap_hi;
                    } else {
                        continue;
                    }
                    let cof = j.cofactor();
                    for &(slot, bg) in &d.active {
                        for coord in 0..3 {
                            let ddet = cof.m[coord][0] * bg.x
                                + cof.m[coord][1] * bg.y
                                + cof.m[coord][2] * bg.z;
                            local[3 * slot + coord] += w * ddet;
                        }
                    }
                }
                (local, value)
            })
            .collect();
        grad.fill(0.0);
        let mut value = 0.0;
        for (local, v) in partials {
            for (g, l) in grad.iter_mut().zip(&local) {
                *g += l;
            }
            value += v;
        }
        value
    }

    fn fairness_energy_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        // E = sum_d ( x_d' F x_d + 2 x_d' q_d ) + const; the constant term
        // is dropped (it does not move the minimizer).
        let n = self.n_free;
        let mut energy = 0.0;
        let mut xd = vec![0.0; n];
        let mut fxd = vec![0.0; n];
        for coord in 0..3 {
            for i in 0..n {
                xd[i] = x[3 * i + coord];
            }
            self.fairness_ff.matvec(&xd, &mut fxd);
            let q = &self.fairness_coupling[coord];
            for i in 0..n {
                energy += xd[i] * (fxd[i] + 2.0 * q[i]);
                grad[3 * i + coord] = 2.0 * (fxd[i] + q[i]);
            }
        }
        energy
    }
}

impl ConstrainedProblem for MaxMinProblem {
    fn num_vars(&self) -> usize {
        3 * self.n_free + 1
    }

    fn num_constraints(&self) -> usize {
        self.points.len() + 1
    }

    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let energy = self.fairness_energy_and_grad(x, grad);
        for g in grad.iter_mut() {
            *g *= self.lambda;
        }
        let t_idx = self.slack_index();
        grad[t_idx] = -1.0;
        self.lambda * energy - x[t_idx]
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let t = x[self.slack_index()];
        out[..self.points.len()]
            .par_iter_mut()
            .zip(self.points.par_iter())
            .for_each(|(o, d)| *o = self.jacobian_at(d, x).det() - t);
        out[self.points.len()] = if self.floor { t - self.delta } else { 1.0 };
    }

    fn accumulate_constraint_gradients(&self, x: &[f64], coeffs: &[f64], acc: &mut [f64]) {
        let t_idx = self.slack_index();
        let n = acc.len();
        let partials: Vec<(Vec<f64>, f64)> = self
            .points
            .par_chunks(POINT_CHUNK)
            .zip(coeffs[..self.points.len()].par_chunks(POINT_CHUNK))
            .map(|(pts, cfs)| {
                let mut local = vec![0.0; n];
                let mut t_acc = 0.0;
                for (d, &w) in pts.iter().zip(cfs) {
                    if w == 0.0 {
                        continue;
                    }
                    let j = self.jacobian_at(d, x);
                    let cof = j.cofactor();
                    for &(slot, bg) in &d.active {
                        for coord in 0..3 {
                            let ddet = cof.m[coord][0] * bg.x
                                + cof.m[coord][1] * bg.y
                                + cof.m[coord][2] * bg.z;
                            local[3 * slot + coord] += w * ddet;
                        }
                    }
                    t_acc -= w;
                }
                (local, t_acc)
            })
            .collect();
        for (local, t_acc) in partials {
            for (a, l) in acc.iter_mut().zip(&local) {
                *a += l;
            }
            acc[t_idx] += t_acc;
        }
        if self.floor {
            acc[t_idx] += coeffs[self.points.len()];
        }
    }

    fn constraint_support(&self, k: usize) -> Vec<usize> {
        let t_idx = self.slack_index();
        if k == self.points.len() {
            return if self.floor { vec![t_idx] } else { Vec::new() };
        }
        let mut vars: Vec<usize> = self.points[k]
            .active
            .iter()
            .flat_map(|&(slot, _)| [3 * slot, 3 * slot + 1, 3 * slot + 2])
            .collect();
        vars.push(t_idx);
        vars.sort_unstable();
        vars
    }

    /// Fused single pass over the points: Jacobian, determinant, barrier
    /// term, and cofactor gradient scatter, chunked and combined in order.
    fn barrier_value_grad(&self, x: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        let t_idx = self.slack_index();
        let t_con = x[t_idx] - self.delta;
        if self.floor && t_con <= 0.0 {
            return f64::INFINITY;
        }
        let t = x[t_idx];
        let n = self.num_vars();
        let partials: Vec<Option<(Vec<f64>, f64, f64)>> = self
            .points
            .par_chunks(POINT_CHUNK)
            .map(|pts| {
                let mut local = vec![0.0; n];
                let mut log_sum = 0.0;
                let mut t_acc = 0.0;
                for d in pts {
                    let j = self.jacobian_at(d, x);
                    let ck = j.det() - t;
                    if ck <= 0.0 {
                        return None;
                    }
                    log_sum += ck.ln();
                    let w = -mu / ck;
                    let cof = j.cofactor();
                    for &(slot, bg) in &d.active {
                        for coord in 0..3 {
                            let ddet = cof.m[coord][0] * bg.x
                                + cof.m[coord][1] * bg.y
                                + cof.m[coord][2] * bg.z;
                            local[3 * slot + coord] += w * ddet;
                        }
                    }
                    t_acc -= w;
                }
                Some((local, log_sum, t_acc))
            })
            .collect();
        if partials.iter().any(|p| p.is_none()) {
            return f64::INFINITY;
        }
        let f = self.objective(x, grad);
        let mut log_total = 0.0;
        for p in partials.into_iter().flatten() {
            let (local, log_sum, t_acc) = p;
            for (g, l) in grad.iter_mut().zip(&local) {
                *g += l;
            }
            grad[t_idx] += t_acc;
            log_total += log_sum;
        }
        if self.floor {
            log_total += t_con.ln();
            grad[t_idx] += -mu / t_con;
        }
        f - mu * log_total
    }
}

/// Assemble over all interior controls of the volume.
pub fn assemble_maxmin(
    vol: &BSplineVolume,
    points: &[Vec3],
    lambda: f64,
    delta: f64,
    fairness_full: &CsrMatrix,
) -> MaxMinProblem {
    let dims = vol.grid().dims();
    let free: Vec<usize> = (0..vol.grid().len())
        .filter(|&s| {
            let (i, j, k) = vol.grid().unflatten(s);
            i > 0 && i + 1 < dims[0] && j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2]
        })
        .collect();
    MaxMinProblem::assemble(vol, points, lambda, delta, &free, fairness_full)
}

/// Support box of control `flat` in parameter space: the tensor product of
/// the per-axis basis supports.
pub fn control_support_box(vol: &BSplineVolume, flat: usize) -> Box3 {
    let (i, j, k) = vol.grid().unflatten(flat);
    let (u0, u1) = vol.knots(0).support(i);
    let (v0, v1) = vol.knots(1).support(j);
    let (w0, w1) = vol.knots(2).support(k);
    Box3::new(Vec3::new(u0, v0, w0), Vec3::new(u1, v1, w1))
}

/// The subset of `positions` whose active control window contains at least
/// one control of `free`; only these constraints can move in a solve over
/// `free`.
pub fn points_coupled_to(
    vol: &BSplineVolume,
    positions: &[Vec3],
    free: &[usize],
) -> Vec<Vec3> {
    let dims = vol.grid().dims();
    let degrees = vol.degrees();
    let mut is_free = vec![false; vol.grid().len()];
    for &g in free {
        is_free[g] = true;
    }
    positions
        .iter()
        .copied()
        .filter(|&p| {
            let su = vol.knots(0).find_span(p.x).expect("in domain");
            let sv = vol.knots(1).find_span(p.y).expect("in domain");
            let sw = vol.knots(2).find_span(p.z).expect("in domain");
            for kk in 0..=degrees[2] {
                for jj in 0..=degrees[1] {
                    for ii in 0..=degrees[0] {
                        let gi = (su - degrees[0] + ii)
                            + dims[0]
                                * ((sv - degrees[1] + jj) + dims[1] * (sw - degrees[2] + kk));
                        if is_free[gi] {
                            return true;
                        }
                    }
                }
            }
            false
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::harmonic::{assemble_fairness_form, VolumeSkeleton};

    fn fairness_of(vol: &BSplineVolume) -> CsrMatrix {
        let skel = VolumeSkeleton::new(
            vol.knots(0).clone(),
            vol.knots(1).clone(),
            vol.knots(2).clone(),
        );
        assemble_fairness_form(&skel, None).unwrap()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut s = seed;
        (0..n)
            .map(|_| Vec3::new(lcg(&mut s), lcg(&mut s), lcg(&mut s)))
            .collect()
    }

    #[test]
    fn identity_volume_constraints_and_slack_gradient() {
        let vol = fixtures::unit_cube(3, 6);
        let fair = fairness_of(&vol);
        let pts = random_points(40, 5);
        let prob = assemble_maxmin(&vol, &pts, 1.0, 1e-2, &fair);
        let x = prob.pack(&vol, 0.5);
        let mut c = vec![0.0; prob.num_constraints()];
        prob.constraints(&x, &mut c);
        // det = 1 everywhere, so c_k = 1 - t = 0.5
        for &v in &c[..pts.len()] {
            assert!((v - 0.5).abs() < 1e-10);
        }
        assert!((c[pts.len()] - (0.5 - 1e-2)).abs() < 1e-12);
        // the maximized objective has slack derivative +1, i.e. the
        // minimized objective has derivative -1
        let mut grad = vec![0.0; prob.num_vars()];
        let f = prob.objective(&x, &mut grad);
        assert!((grad[prob.slack_index()] + 1.0).abs() < 1e-14);
        assert!((prob.maximized_objective(&x) + f).abs() < 1e-12);
    }

    #[test]
    fn gradient_outside_support_is_exactly_zero() {
        let vol = fixtures::unit_cube(3, 8);
        let fair = fairness_of(&vol);
        // a point deep in the low corner cell
        let pts = vec![Vec3::new(0.02, 0.03, 0.04)];
        let prob = assemble_maxmin(&vol, &pts, 1.0, 1e-2, &fair);
        let x = prob.pack(&vol, 0.5);
        let mut acc = vec![0.0; prob.num_vars()];
        prob.accumulate_constraint_gradients(&x, &[1.0, 0.0], &mut acc);
        let support = prob.constraint_support(0);
        for (var, &val) in acc.iter().enumerate() {
            if !support.contains(&var) {
                assert_eq!(val, 0.0, "variable {var} outside support moved");
            }
        }
        // and the support matches the independent support-box overlap
        for (slot, &g) in prob.free_controls().iter().enumerate() {
            let sup = control_support_box(&vol, g);
            let covers = sup.min.x < pts[0].x
                && pts[0].x < sup.max.x
                && sup.min.y < pts[0].y
                && pts[0].y < sup.max.y
                && sup.min.z < pts[0].z
                && pts[0].z < sup.max.z;
            let in_support = support.contains(&(3 * slot));
            assert_eq!(covers, in_support, "slot {slot}");
        }
    }

    #[test]
    fn constraint_gradients_match_finite_differences() {
        let vol = fixtures::perturbed_cube(3, 6, 0.05, 99);
        let fair = fairness_of(&vol);
        let pts = random_points(12, 77);
        let prob = assemble_maxmin(&vol, &pts, 1.0, 1e-2, &fair);
        let mut x = prob.pack(&vol, 0.3);
        let n = prob.num_vars();
        let m = prob.num_constraints();
        // analytic Jacobian of constraints via unit coefficient vectors
        for k in [0usize, m / 2, m - 1] {
            let mut coeffs = vec![0.0; m];
            coeffs[k] = 1.0;
            let mut grad = vec![0.0; n];
            prob.accumulate_constraint_gradients(&x, &coeffs, &mut grad);
            let h = 1e-6;
            let mut c_lo = vec![0.0; m];
            let mut c_hi = vec![0.0; m];
            for var in (0..n).step_by(7) {
                let old = x[var];
                x[var] = old + h;
                prob.constraints(&x, &mut c_hi);
                x[var] = old - h;
                prob.constraints(&x, &mut c_lo);
                x[var] = old;
                let fd = (c_hi[k] - c_lo[k]) / (2.0 * h);
                assert!(
                    (grad[var] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "constraint {k} var {var}: {} vs {fd}",
                    grad[var]
                );
            }
        }
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let vol = fixtures::perturbed_cube(3, 5, 0.03, 7);
        let fair = fairness_of(&vol);
        let pts = random_points(8, 3);
        let prob = assemble_maxmin(&vol, &pts, 1.7, 1e-2, &fair);
        let mut x = prob.pack(&vol, 0.4);
        let n = prob.num_vars();
        let mut grad = vec![0.0; n];
        let f0 = prob.objective(&x, &mut grad);
        let h = 1e-6;
        let mut scratch = vec![0.0; n];
        for var in (0..n).step_by(5) {
            let old = x[var];
            x[var] = old + h;
            let fp = prob.objective(&x, &mut scratch);
            x[var] = old - h;
            let fm = prob.objective(&x, &mut scratch);
            x[var] = old;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (grad[var] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                "var {var}: {} vs {fd} (f0 {f0})",
                grad[var]
            );
        }
    }

    #[test]
    fn empty_point_set_panics() {
        let vol = fixtures::unit_cube(2, 4);
        let fair = fairness_of(&vol);
        let result = std::panic::catch_unwind(|| {
            assemble_maxmin(&vol, &[], 1.0, 1e-2, &fair)
        });
        assert!(result.is_err());
    }
}
