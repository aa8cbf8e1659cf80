//! Stage 3: conformal-distortion reduction. Minimizes the integrated
//! squared MIPS distortion with the boundary fixed, under a quasi-Newton
//! descent whose line search rejects any step that drives det(J)
//! nonpositive at a quadrature node. The output is re-certified; the
//! certificate, not the nodal barrier, is the authority.

use crate::algebra::{Mat3, Vec3};
use crate::jacobian::{certify_volume, CertificateReport};
use crate::opt::{minimize_traced, LbfgsConfig};
use crate::quadrature::QuadratureRule;
use crate::spline::{eval_basis_ders, BSplineVolume};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NODE_CHUNK: usize = 512;

#[derive(Debug, Error)]
pub enum MipsError {
    #[error("refinement requires a certified-bijective input")]
    InputNotCertified,
    #[error(transparent)]
    Spline(#[from] crate::spline::SplineError),
}

/// MIPS conformal distortion of a Jacobian matrix. Always >= 1; equals 1
/// exactly when the three singular values coincide; +inf on singular input.
pub fn conformal_distortion(j: &Mat3) -> f64 {
    match j.inverse() {
        Some(inv) => 0.125 * (j.frobenius_sq() * inv.frobenius_sq() - 1.0),
        None => f64::INFINITY,
    }
}

#[derive(Debug, Clone)]
pub struct MipsParams {
    pub max_iter: usize,
    /// Gradient tolerance relative to the initial gradient norm.
    pub grad_tol: f64,
    /// Quadrature points per direction; `None` picks degree + 1.
    pub quad_orders: Option<[usize; 3]>,
    /// Certificate settings for the mandatory re-certification.
    pub delta: f64,
    pub cert_depth: usize,
}

impl Default for MipsParams {
    fn default() -> Self {
        MipsParams {
            max_iter: 500,
            grad_tol: 1e-6,
            quad_orders: None,
            delta: crate::jacobian::DEFAULT_DELTA,
            cert_depth: crate::jacobian::DEFAULT_MAX_DEPTH,
        }
    }
}

struct NodeData {
    weight: f64,
    fixed_jacobian: Mat3,
    active: Vec<(usize, Vec3)>,
}

/// The discretized objective: quadrature sum of squared conformal
/// distortion, differentiable in the free control coordinates.
pub struct MipsObjective {
    nodes: Vec<NodeData>,
    free: Vec<usize>,
}

impl MipsObjective {
    /// Objective over all interior controls of `vol`.
    pub fn new(vol: &BSplineVolume, quad_orders: Option<[usize; 3]>) -> Self {
        let dims = vol.grid().dims();
        let free: Vec<usize> = (0..vol.grid().len())
            .filter(|&s| {
                let (i, j, k) = vol.grid().unflatten(s);
                i > 0 && i + 1 < dims[0] && j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2]
            })
            .collect();
        Self::with_free(vol, quad_orders, &free)
    }

    pub fn with_free(
        vol: &BSplineVolume,
        quad_orders: Option<[usize; 3]>,
        free: &[usize],
    ) -> Self {
        let degrees = vol.degrees();
        let orders =
            quad_orders.unwrap_or([degrees[0] + 1, degrees[1] + 1, degrees[2] + 1]);
        let rule = QuadratureRule::over_boxes(&vol.cells(), orders);
        let dims = vol.grid().dims();
        let mut slot_of: Vec<Option<usize>> = vec![None; vol.grid().len()];
        for (slot, &g) in free.iter().enumerate() {
            slot_of[g] = Some(slot);
        }
        let all_nodes: Vec<(Vec3, f64)> = rule.iter_nodes().collect();
        let nodes: Vec<NodeData> = all_nodes
            .par_iter()
            .map(|&(p, weight)| {
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
                            let bg = Vec3::new(
                                du[1][ii] * dv[0][jj] * dw[0][kk],
                                du[0][ii] * dv[1][jj] * dw[0][kk],
                                du[0][ii] * dv[0][jj] * dw[1][kk],
                            );
                            match slot_of[gi] {
                                Some(slot) => active.push((slot, bg)),
                                None => {
                                    let point = vol.grid().points()[gi];
                                    for (coord, val) in
                                        point.to_array().into_iter().enumerate()
                                    {
                                        fixed_jacobian.m[coord][0] += val * bg.x;
                                        fixed_jacobian.m[coord][1] += val * bg.y;
                                        fixed_jacobian.m[coord][2] += val * bg.z;
                                    }
                                }
                            }
                        }
                    }
                }
                NodeData { weight, fixed_jacobian, active }
            })
            .collect();
        MipsObjective { nodes, free: free.to_vec() }
    }

    pub fn free_controls(&self) -> &[usize] {
        &self.free
    }

    pub fn num_vars(&self) -> usize {
        3 * self.free.len()
    }

    pub fn pack(&self, vol: &BSplineVolume) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_vars());
        for &g in &self.free {
            x.extend_from_slice(&vol.grid().points()[g].to_array());
        }
        x
    }

    pub fn unpack_into(&self, x: &[f64], vol: &mut BSplineVolume) {
        for (slot, &g) in self.free.iter().enumerate() {
            let (i, j, k) = vol.grid().unflatten(g);
            vol.grid_mut()
                .set(i, j, k, Vec3::new(x[3 * slot], x[3 * slot + 1], x[3 * slot + 2]));
        }
    }

    fn jacobian_at(&self, d: &NodeData, x: &[f64]) -> Mat3 {
        let mut j = d.fixed_jacobian;
        for &(slot, bg) in &d.active {
            for coord in 0..3 {
                let v = x[3 * slot + coord];
                j.m[coord][0] += v * bg.x;
                j.m[coord][1] += v * bg.y;
                j.m[coord][2] += v * bg.z;
            }
        }
        j
    }

    /// Smallest nodal determinant under `x`.
    pub fn min_nodal_det(&self, x: &[f64]) -> f64 {
        self.nodes
            .par_iter()
            .map(|d| self.jacobian_at(d, x).det())
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Quadrature value of the squared conformal distortion and its
    /// gradient; `+inf` (gradient unspecified) when a node determinant is
    /// nonpositive.
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.num_vars();
        let partials: Vec<Option<(Vec<f64>, f64)>> = self
            .nodes
            .par_chunks(NODE_CHUNK)
            .map(|chunk| {
                let mut local = vec![0.0; n];
                let mut value = 0.0;
                for d in chunk {
                    let j = self.jacobian_at(d, x);
                    let det = j.det();
                    if det <= 0.0 {
                        return None;
                    }
                    let inv = j.inverse().expect("positive determinant");
                    let jf = j.frobenius_sq();
                    let invf = inv.frobenius_sq();
                    let dcon = 0.125 * (jf * invf - 1.0);
                    value += d.weight * dcon * dcon;
                    // dD/dJ = (invf J - jf inv' inv inv') / 4
                    let invt = inv.transpose();
                    let chain = invt.mul_mat(&inv).mul_mat(&invt);
                    let mut dd = Mat3::zero();
                    for r in 0..3 {
                        for c in 0..3 {
                            dd.m[r][c] =
                                0.25 * (invf * j.m[r][c] - jf * chain.m[r][c]);
                        }
                    }
                    let scale = d.weight * 2.0 * dcon;
                    for &(slot, bg) in &d.active {
                        for coord in 0..3 {
                            let g = dd.m[coord][0] * bg.x
                                + dd.m[coord][1] * bg.y
                                + dd.m[coord][2] * bg.z;
                            local[3 * slot + coord] += scale * g;
                        }
                    }
                }
                Some((local, value))
            })
            .collect();
        if partials.iter().any(|p| p.is_none()) {
            return f64::INFINITY;
        }
        grad.fill(0.0);
        let mut value = 0.0;
        for (local, v) in partials.into_iter().flatten() {
            for (g, l) in grad.iter_mut().zip(&local) {
                *g += l;
            }
            value += v;
        }
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefineStatus {
    /// Objective decreased and re-certification succeeded.
    Improved,
    /// Gradient already below tolerance; volume returned unchanged.
    AlreadyOptimal,
    /// The descent result failed re-certification; the certified input is
    /// returned and the rejected iterate preserved for inspection.
    RejectedRecertification,
}

/// One accepted iterate of the descent, for the progress log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MipsIterTrace {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub min_nodal_det: f64,
}

#[derive(Debug)]
pub struct RefineOutcome {
    pub volume: BSplineVolume,
    pub certificate: CertificateReport,
    pub status: RefineStatus,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub trace: Vec<MipsIterTrace>,
    /// The descent iterate that failed re-certification, if any.
    pub rejected: Option<Box<BSplineVolume>>,
}

/// Reduce conformal distortion of a certified-bijective volume.
pub fn refine(
    vol: &BSplineVolume,
    certificate: &CertificateReport,
    params: &MipsParams,
) -> Result<RefineOutcome, MipsError> {
    if !certificate.certified {
        return Err(MipsError::InputNotCertified);
    }
    let objective = MipsObjective::new(vol, params.quad_orders);
    let x0 = objective.pack(vol);
    let mut scratch = vec![0.0; objective.num_vars()];
    let initial_objective = objective.value_grad(&x0, &mut scratch);

    let trace: std::cell::RefCell<Vec<MipsIterTrace>> = std::cell::RefCell::new(Vec::new());
    let res = minimize_traced(
        |x, grad| objective.value_grad(x, grad),
        &x0,
        &LbfgsConfig {
            max_iter: params.max_iter,
            grad_tol_rel: params.grad_tol,
            ..Default::default()
        },
        |x, value, grad_norm, step| {
            let mut t = trace.borrow_mut();
            let iteration = t.len() + 1;
            t.push(MipsIterTrace {
                iteration,
                objective: value,
                grad_norm,
                step,
                min_nodal_det: objective.min_nodal_det(x),
            });
        },
    );
    let trace = trace.into_inner();

    if res.trace.len() <= 1 {
        // no accepted step: already at tolerance
        return Ok(RefineOutcome {
            volume: vol.clone(),
            certificate: certificate.clone(),
            status: RefineStatus::AlreadyOptimal,
            initial_objective,
            final_objective: initial_objective,
            trace,
            rejected: None,
        });
    }

    let mut refined = vol.clone();
    objective.unpack_into(&res.x, &mut refined);
    let recert = certify_volume(&refined, params.delta, params.cert_depth);
    if recert.certified {
        Ok(RefineOutcome {
            volume: refined,
            certificate: recert,
            status: RefineStatus::Improved,
            initial_objective,
            final_objective: res.value,
            trace,
            rejected: None,
        })
    } else {
        Ok(RefineOutcome {
            volume: vol.clone(),
            certificate: certificate.clone(),
            status: RefineStatus::RejectedRecertification,
            initial_objective,
            final_objective: initial_objective,
            trace,
            rejected: Some(Box::new(refined)),
        })
    }
}
