//! Primal log-barrier solver for smooth inequality-constrained problems,
//! with a squared-hinge feasibility phase for infeasible starts and
//! quasi-Newton (L-BFGS) inner minimization.

use super::maxmin::ConstrainedProblem;
use crate::opt::{minimize, LbfgsConfig};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Target for the KKT stationarity residual and complementarity.
    pub tol: f64,
    /// Inner L-BFGS iteration cap per barrier stage.
    pub max_inner_iter: usize,
    pub max_stages: usize,
    /// Barrier reduction factor per stage.
    pub mu_shrink: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-6, max_inner_iter: 250, max_stages: 25, mu_shrink: 0.1 }
    }
}

impl SolverConfig {
    /// Looser settings for the large per-subregion solves, where the
    /// Bernstein certificate (not the KKT residual) is the authority.
    pub fn for_subregion_sweeps() -> Self {
        SolverConfig { tol: 1e-4, max_inner_iter: 120, max_stages: 12, mu_shrink: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The feasibility phase stalled; carries the most-violated constraint
    /// indices with their violations, worst first.
    Infeasible { most_violated: Vec<(usize, f64)> },
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// Minimized objective at `x`.
    pub objective: f64,
    /// Stationarity residual of the barrier KKT system (inf-norm).
    pub kkt_residual: f64,
    /// Largest constraint violation at `x` (0 when feasible).
    pub worst_violation: f64,
    pub status: SolveStatus,
    pub barrier_stages: usize,
}

fn min_constraint(c: &[f64]) -> f64 {
    c.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Squared-hinge feasibility restoration: minimize
/// `sum_k max(0, margin - c_k)^2` until every constraint clears half the
/// margin. Returns false if it stalls while still infeasible.
fn restore_feasibility<P: ConstrainedProblem>(
    problem: &P,
    x: &mut Vec<f64>,
    margin: f64,
    cfg: &SolverConfig,
) -> bool {
    let m = problem.num_constraints();
    for _round in 0..3 {
        let mut c = vec![0.0; m];
        problem.constraints(x, &mut c);
        if min_constraint(&c) >= 0.5 * margin {
            return true;
        }
        let res = minimize(
            |x, grad| {
                let mut c = vec![0.0; m];
                problem.constraints(x, &mut c);
                let mut value = 0.0;
                let mut coeffs = vec![0.0; m];
                for (k, &ck) in c.iter().enumerate() {
                    let gap = margin - ck;
                    if gap > 0.0 {
                        value += gap * gap;
                        coeffs[k] = -2.0 * gap;
                    }
                }
                grad.fill(0.0);
                problem.accumulate_constraint_gradients(x, &coeffs, grad);
                value
            },
            x,
            &LbfgsConfig {
                max_iter: cfg.max_inner_iter,
                grad_tol_rel: 1e-10,
                grad_tol_abs: 1e-14,
                ..Default::default()
            },
        );
        *x = res.x;
        let mut c = vec![0.0; m];
        problem.constraints(x, &mut c);
        if min_constraint(&c) >= 0.5 * margin {
            return true;
        }
        if res.iterations == 0 {
            // flat: no further progress possible
            return false;
        }
    }
    let mut c = vec![0.0; m];
    problem.constraints(x, &mut c);
    min_constraint(&c) >= 0.5 * margin
}

/// Solve `min f(x) s.t. c_k(x) >= 0` from `x0`, which need not be feasible.
pub fn solve_constrained<P: ConstrainedProblem>(
    problem: &P,
    x0: &[f64],
    cfg: &SolverConfig,
) -> SolveOutcome {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    assert_eq!(x0.len(), n);
    let mut x = x0.to_vec();

    let mut c = vec![0.0; m];
    problem.constraints(&x, &mut c);
    let scale = 1.0 + c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let margin = 1e-6 * scale;
    if min_constraint(&c) <= 0.0 && !restore_feasibility(problem, &mut x, margin, cfg) {
        problem.constraints(&x, &mut c);
        let mut violated: Vec<(usize, f64)> = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.0)
            .map(|(k, &v)| (k, -v))
            .collect();
        violated.sort_by(|a, b| b.1.total_cmp(&a.1));
        violated.truncate(10);
        let mut grad = vec![0.0; n];
        let objective = problem.objective(&x, &mut grad);
        let worst = violated.first().map(|&(_, v)| v).unwrap_or(0.0);
        return SolveOutcome {
            x,
            objective,
            kkt_residual: f64::INFINITY,
            worst_violation: worst,
            status: SolveStatus::Infeasible { most_violated: violated },
            barrier_stages: 0,
        };
    }

    // barrier phase
    let mut grad = vec![0.0; n];
    let f0 = problem.objective(&x, &mut grad);
    let mut mu = (0.1 * (1.0 + f0.abs()) / m as f64).max(10.0 * cfg.tol);
    let mut stages = 0;
    let mut kkt = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    for _stage in 0..cfg.max_stages {
        stages += 1;
        let res = minimize(
            |x, grad| problem.barrier_value_grad(x, mu, grad),
            &x,
            &LbfgsConfig {
                memory: 16,
                max_iter: cfg.max_inner_iter,
                grad_tol_rel: 0.0,
                grad_tol_abs: (mu * 0.1).max(cfg.tol * 0.5),
                ..Default::default()
            },
        );
        x = res.x;
        kkt = res.grad_norm;
        if mu <= cfg.tol && kkt <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
        mu = (mu * cfg.mu_shrink).max(cfg.tol * 0.09);
        if stages == cfg.max_stages {
            break;
        }
    }

    problem.constraints(&x, &mut c);
    let worst_violation = (-min_constraint(&c)).max(0.0);
    let objective = problem.objective(&x, &mut grad);
    SolveOutcome {
        x,
        objective,
        kkt_residual: kkt,
        worst_violation,
        status,
        barrier_stages: stages,
    }
}
