//! Stage 2: the certified-bijective map from the coarse-to-fine max-min
//! optimization over collocation points, solved per octant subregion in a
//! fixed order.

mod collocation;
mod ipm;
mod maxmin;
mod subregion;

pub use collocation::{
    halton, subcuboid_counts, CollocationParams, CollocationPoint, CollocationSet, UpdateStats,
};
pub use ipm::{solve_constrained, SolveOutcome, SolveStatus, SolverConfig};
pub use maxmin::{
    assemble_maxmin, control_support_box, points_coupled_to, ConstrainedProblem, MaxMinProblem,
};
pub use subregion::{local_offset_refine, plan_subregions, SubregionPlan};

use crate::harmonic::{assemble_fairness_form, VolumeSkeleton};
use crate::opt::{minimize, LbfgsConfig};
use crate::jacobian::{certify_field, CertificateReport, JacobianField};
use crate::sparse::CsrMatrix;
use crate::spline::BSplineVolume;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BijectifyError {
    #[error("subregion {subregion} stayed infeasible after {rounds} refinement rounds; most violated constraints: {details}")]
    RefinementExhausted {
        subregion: usize,
        rounds: usize,
        details: String,
    },
    #[error("no free controls are available for the failing regions")]
    NoFreeControls,
    #[error(transparent)]
    Spline(#[from] crate::spline::SplineError),
    #[error(transparent)]
    Harmonic(#[from] crate::harmonic::HarmonicError),
}

#[derive(Debug, Clone)]
pub struct BijectifyParams {
    /// Lower bound delta on det(J), shared by the optimization constraint
    /// and the certificate.
    pub delta: f64,
    /// Fairness weight.
    pub lambda: f64,
    /// Certification subdivision depth.
    pub cert_depth: usize,
    /// Maximal coarse-to-fine level.
    pub max_level: usize,
    pub solver: SolverConfig,
    pub collocation: CollocationParams,
    /// Knot-refinement rounds allowed per level before giving up.
    pub max_refine_rounds: usize,
}

impl Default for BijectifyParams {
    fn default() -> Self {
        BijectifyParams {
            delta: 1e-2,
            lambda: 1.0,
            cert_depth: 3,
            max_level: 3,
            solver: SolverConfig::for_subregion_sweeps(),
            collocation: CollocationParams::default(),
            max_refine_rounds: 3,
        }
    }
}

/// One line of the per-level progress log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub constraints: usize,
    pub free_vars: usize,
    pub min_det_collocation: f64,
    pub t_star: f64,
    pub certified_fraction: f64,
}

impl std::fmt::Display for LevelTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "level {}: constraints {}, free vars {}, min det over P {:.6}, t* {:.6}, certified {:.1}%",
            self.level,
            self.constraints,
            self.free_vars,
            self.min_det_collocation,
            self.t_star,
            100.0 * self.certified_fraction
        )
    }
}

#[derive(Debug, Clone)]
pub struct BijectifyOutcome {
    pub volume: BSplineVolume,
    pub report: CertificateReport,
    pub trace: Vec<LevelTrace>,
    pub solver_calls: usize,
    /// Whether knot refinement changed the control net.
    pub refined: bool,
}

fn fairness_of(vol: &BSplineVolume) -> Result<CsrMatrix, BijectifyError> {
    let skel = VolumeSkeleton::new(
        vol.knots(0).clone(),
        vol.knots(1).clone(),
        vol.knots(2).clone(),
    );
    Ok(assemble_fairness_form(&skel, None)?)
}

/// Starting slack: strictly interior when the point set already clears
/// delta, otherwise just below the current minimum (the solver's
/// feasibility phase lifts it).
fn initial_slack(min_det: f64, delta: f64) -> f64 {
    if min_det > delta {
        0.5 * (min_det + delta)
    } else {
        min_det - 0.01 * (1.0 + min_det.abs())
    }
}

/// Run the certify / collocate / solve loop until the volume is certified
/// bijective or the level budget is exhausted. The boundary controls are
/// never free. Exhaustion is reported through the returned certificate
/// (`certified == false`), not an error.
pub fn bijectify(
    input: &BSplineVolume,
    params: &BijectifyParams,
) -> Result<BijectifyOutcome, BijectifyError> {
    let mut vol = input.clone();
    let mut field = JacobianField::from_volume(&vol);
    let mut report = certify_field(&field, params.delta, params.cert_depth);
    let mut colloc = CollocationSet::new();
    let mut trace = Vec::new();
    let mut solver_calls = 0usize;
    let mut refined = false;

    for level in 0..=params.max_level {
        if report.certified {
            break;
        }
        colloc.update(&report, &field, level, &params.collocation);
        if colloc.is_empty() {
            break;
        }

        let mut refine_rounds = 0usize;
        let (mut t_star, free_vars) = 'sweep: loop {
            let plan = plan_subregions(&vol, &report);
            if plan.total_free() == 0 {
                return Err(BijectifyError::NoFreeControls);
            }
            let mut t_star = f64::INFINITY;
            let fairness = fairness_of(&vol)?;
            let positions = colloc.positions();
            let certified_count =
                |r: &CertificateReport| r.verdicts.iter().filter(|v| v.is_certified()).count();
            for (si, free_set) in plan.free_sets.iter().enumerate() {
                if free_set.is_empty() {
                    continue;
                }
                // constraints outside the free supports are constants of
                // this sub-problem; keeping them would make every distant
                // fold a false infeasibility
                let coupled = points_coupled_to(&vol, &positions, free_set);
                if coupled.is_empty() {
                    continue;
                }
                let problem = MaxMinProblem::assemble(
                    &vol,
                    &coupled,
                    params.lambda,
                    params.delta,
                    free_set,
                    &fairness,
                );
                let dets = problem.point_dets(&problem.pack(&vol, 0.0));
                let min_det = dets.iter().copied().fold(f64::INFINITY, f64::min);

                // the octant's solves run on a candidate copy; a result
                // that de-certifies previously certified cells is discarded
                let mut candidate = vol.clone();
                let mut candidate_t = f64::INFINITY;

                // Objective-free untangling first when the floor is out of
                // reach: lift the point determinants directly, without the
                // fairness term pulling the other way.
                let mut current_min = min_det;
                let mut floor_reached = current_min > params.delta;
                if !floor_reached {
                    let scale = (dets.iter().map(|d| d.abs()).sum::<f64>()
                        / dets.len() as f64)
                        .max(params.delta);
                    let target = params.delta + 0.05 * scale;
                    let ceiling = target + 10.0 * scale;
                    let x0 = problem.pack(&candidate, 0.0);
                    let restored = minimize(
                        |x, grad| problem.hinge_value_grad(x, target, ceiling, grad),
                        &x0,
                        &LbfgsConfig {
                            max_iter: 2 * params.solver.max_inner_iter,
                            grad_tol_rel: 1e-10,
                            max_step: Some(0.5 * vol.bbox_diagonal()),
                            ..Default::default()
                        },
                    );
                    solver_calls += 1;
                    problem.unpack_into(&restored.x, &mut candidate);
                    let new_dets = problem.point_dets(&restored.x);
                    let new_min =
                        new_dets.iter().copied().fold(f64::INFINITY, f64::min);
                    let improved = new_min - current_min
                        > (1e-3 * (1.0 + current_min.abs())).max(params.solver.tol);
                    candidate_t = new_min;
                    if new_min <= params.delta && !improved {
                        // out of degrees of freedom here: refine knots
                        refine_rounds += 1;
                        if refine_rounds > params.max_refine_rounds {
                            let mut worst: Vec<(usize, f64)> = new_dets
                                .iter()
                                .enumerate()
                                .filter(|(_, &d)| d < params.delta)
                                .map(|(k, &d)| (k, params.delta - d))
                                .collect();
                            worst.sort_by(|a, b| b.1.total_cmp(&a.1));
                            worst.truncate(8);
                            let details = worst
                                .iter()
                                .map(|(k, v)| format!("#{k} by {v:.3e}"))
                                .collect::<Vec<_>>()
                                .join(", ");
                            return Err(BijectifyError::RefinementExhausted {
                                subregion: si,
                                rounds: refine_rounds - 1,
                                details,
                            });
                        }
                        // failing boxes stay valid parametrically; re-plan
                        // the whole sweep over the refined net
                        vol = local_offset_refine(&vol, &plan.subregions[si])?;
                        refined = true;
                        field = JacobianField::from_volume(&vol);
                        report = certify_field(&field, params.delta, params.cert_depth);
                        continue 'sweep;
                    }
                    current_min = new_min;
                    floor_reached = current_min > params.delta;
                }

                if floor_reached {
                    let x0 =
                        problem.pack(&candidate, initial_slack(current_min, params.delta));
                    let out = solve_constrained(&problem, &x0, &params.solver);
                    solver_calls += 1;
                    if !matches!(out.status, SolveStatus::Infeasible { .. }) {
                        problem.unpack_into(&out.x, &mut candidate);
                        candidate_t = out.x[problem.slack_index()];
                    }
                }

                let field_c = JacobianField::from_volume(&candidate);
                let report_c = certify_field(&field_c, params.delta, params.cert_depth);
                if certified_count(&report_c) >= certified_count(&report) {
                    vol = candidate;
                    field = field_c;
                    report = report_c;
                    t_star = t_star.min(candidate_t);
                }
            }
            break 'sweep (t_star, 3 * plan.total_free());
        };

        if !t_star.is_finite() {
            t_star = colloc.min_det(&field);
        }
        trace.push(LevelTrace {
            level,
            constraints: colloc.len() + 1,
            free_vars,
            min_det_collocation: colloc.min_det(&field),
            t_star,
            certified_fraction: report.certified_fraction(),
        });
    }

    Ok(BijectifyOutcome { volume: vol, report, trace, solver_calls, refined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::spline::FaceLabel;
    use crate::Vec3;

    #[test]
    fn certified_input_returns_unchanged_with_zero_solver_calls() {
        let vol = fixtures::unit_cube(3, 6);
        let out = bijectify(&vol, &BijectifyParams::default()).unwrap();
        assert!(out.report.certified);
        assert_eq!(out.solver_calls, 0);
        assert!(out.trace.is_empty());
        assert_eq!(out.volume.grid().points(), vol.grid().points());
    }

    #[test]
    fn folded_cube_becomes_certified() {
        let vol = fixtures::folded_cube(3, 6);
        let params = BijectifyParams { delta: 1e-3, ..Default::default() };
        let out = bijectify(&vol, &params).unwrap();
        assert!(out.report.certified, "trace: {:?}", out.trace);
        assert!(out.solver_calls > 0);
        assert!(!out.trace.is_empty());
        // dense check: no negative determinant anywhere
        let mut min_det = f64::INFINITY;
        for iz in 0..=20 {
            for iy in 0..=20 {
                for ix in 0..=20 {
                    let p = Vec3::new(ix as f64 / 20.0, iy as f64 / 20.0, iz as f64 / 20.0);
                    min_det = min_det.min(out.volume.jacobian(p).unwrap().det());
                }
            }
        }
        assert!(min_det > 0.0, "min det {min_det}");
    }

    #[test]
    fn boundary_controls_never_move() {
        let vol = fixtures::folded_cube(3, 6);
        let out = bijectify(&vol, &BijectifyParams { delta: 1e-3, ..Default::default() })
            .unwrap();
        if !out.refined {
            for label in FaceLabel::ALL {
                let before = vol.face(label);
                let after = out.volume.face(label);
                assert_eq!(before.grid.points(), after.grid.points());
            }
        }
    }

    #[test]
    fn frozen_certified_cells_stay_certified() {
        let vol = fixtures::folded_cube(3, 7);
        let params = BijectifyParams { delta: 1e-3, ..Default::default() };
        let field = JacobianField::from_volume(&vol);
        let before = certify_field(&field, params.delta, params.cert_depth);
        let plan = plan_subregions(&vol, &before);
        let free: std::collections::HashSet<usize> =
            plan.free_sets.iter().flatten().copied().collect();
        let out = bijectify(&vol, &params).unwrap();
        if out.refined {
            return; // control indices no longer comparable
        }
        // cells influenced only by untouched controls keep their verdict
        let cells = vol.cells();
        let degrees = vol.degrees();
        let dims = vol.grid().dims();
        for (cell_idx, cell_box) in cells.iter().enumerate() {
            if !before.verdicts[cell_idx].is_certified() {
                continue;
            }
            let mut untouched = true;
            'ctrl: for flat in 0..vol.grid().len() {
                if !free.contains(&flat) {
                    continue;
                }
                let sup = control_support_box(&vol, flat);
                if sup.intersects_open(cell_box) {
                    untouched = false;
                    break 'ctrl;
                }
            }
            let _ = (degrees, dims);
            if untouched {
                assert!(
                    out.report.verdicts[cell_idx].is_certified(),
                    "frozen cell {cell_idx} lost certification"
                );
            }
        }
    }
}
