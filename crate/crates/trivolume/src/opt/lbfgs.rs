//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! The objective may return `f64::INFINITY` outside its admissible region
//! (barrier behavior); the line search backtracks through infinite values,
//! so accepted iterates always stay admissible and the accepted objective
//! sequence is non-increasing.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Number of curvature pairs retained.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below `grad_tol_rel` times the
    /// initial gradient norm (plus a tiny absolute floor).
    pub grad_tol_rel: f64,
    pub grad_tol_abs: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub step_shrink: f64,
    pub min_step: f64,
    /// Cap on the displacement norm of a single trial step.
    pub max_step: Option<f64>,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iter: 500,
            grad_tol_rel: 1e-6,
            grad_tol_abs: 1e-14,
            c1: 1e-4,
            step_shrink: 0.5,
            min_step: 1e-18,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    GradientTolerance,
    MaxIterations,
    /// Line search could not find an acceptable step; the iterate is the
    /// best point found.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: LbfgsStatus,
    /// Objective values of the accepted iterates, starting value included.
    pub trace: Vec<f64>,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f(x, grad_out) -> value` starting from `x0`.
///
/// The closure must fill `grad_out` whenever it returns a finite value; on
/// infinite values the gradient is ignored. `x0` must be admissible.
pub fn minimize<F>(f: F, x0: &[f64], cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    minimize_traced(f, x0, cfg, |_, _, _, _| {})
}

/// As [`minimize`], invoking `on_accept(x, value, grad_norm, step)` after
/// every accepted step.
pub fn minimize_traced<F, C>(mut f: F, x0: &[f64], cfg: &LbfgsConfig, mut on_accept: C) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    C: FnMut(&[f64], f64, f64, f64),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    assert!(
        value.is_finite(),
        "starting point must have a finite objective"
    );
    let g0_norm = norm(&grad);
    let tol = (cfg.grad_tol_rel * g0_norm).max(cfg.grad_tol_abs);
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut trace = vec![value];
    let mut status = LbfgsStatus::MaxIterations;
    let mut iterations = 0;

    for iter in 0..cfg.max_iter {
        iterations = iter;
        let g_norm = norm(&grad);
        if g_norm <= tol {
            status = LbfgsStatus::GradientTolerance;
            break;
        }

        // two-loop recursion
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for p in pairs.iter().rev() {
            let a = p.rho * dot(&p.s, &dir);
            for i in 0..n {
                dir[i] -= a * p.y[i];
            }
            alphas.push(a);
        }
        if let Some(last) = pairs.back() {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
        }
        for (p, &a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * dot(&p.y, &dir);
            for i in 0..n {
                dir[i] += (a - b) * p.s[i];
            }
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            // not a descent direction: drop the memory and restart steepest
            pairs.clear();
            for i in 0..n {
                dir[i] = -grad[i];
            }
            slope = -dot(&grad, &grad);
        }

        // backtracking Armijo with rejection of inadmissible (infinite) steps
        let mut step = match cfg.max_step {
            Some(ms) => {
                let dn = norm(&dir);
                if dn > ms {
                    ms / dn
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let mut new_x = vec![0.0; n];
        let mut new_grad = vec![0.0; n];
        let mut accepted = false;
        while step >= cfg.min_step {
            for i in 0..n {
                new_x[i] = x[i] + step * dir[i];
            }
            let new_value = f(&new_x, &mut new_grad);
            if new_value.is_finite() && new_value <= value + cfg.c1 * step * slope {
                // curvature pair from the accepted step
                let s: Vec<f64> = (0..n).map(|i| new_x[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| new_grad[i] - grad[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-10 * norm(&s) * norm(&y) {
                    if pairs.len() == cfg.memory {
                        pairs.pop_front();
                    }
                    let rho = 1.0 / sy;
                    pairs.push_back(Pair { s, y, rho });
                }
                x.copy_from_slice(&new_x);
                grad.copy_from_slice(&new_grad);
                value = new_value;
                trace.push(value);
                on_accept(&x, value, norm(&grad), step);
                accepted = true;
                break;
            }
            step *= cfg.step_shrink;
        }
        if !accepted {
            status = LbfgsStatus::LineSearchStalled;
            break;
        }
    }

    let grad_norm = norm(&grad);
    if grad_norm <= tol {
        status = LbfgsStatus::GradientTolerance;
    }
    LbfgsResult { x, value, grad_norm, iterations, status, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let res = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 8.0 * (x[1] + 1.0);
                (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2)
            },
            &[0.0, 0.0],
            &LbfgsConfig::default(),
        );
        assert!((res.x[0] - 3.0).abs() < 1e-5);
        assert!((res.x[1] + 1.0).abs() < 1e-5);
        assert_eq!(res.status, LbfgsStatus::GradientTolerance);
    }

    #[test]
    fn rosenbrock() {
        let res = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            &LbfgsConfig { max_iter: 2000, grad_tol_rel: 1e-12, ..Default::default() },
        );
        assert!((res.x[0] - 1.0).abs() < 1e-5, "{:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn barrier_keeps_iterates_admissible() {
        // minimize -log(x) + x on x > 0, minimum at x = 1
        let res = minimize(
            |x, g| {
                if x[0] <= 0.0 {
                    return f64::INFINITY;
                }
                g[0] = -1.0 / x[0] + 1.0;
                -x[0].ln() + x[0]
            },
            &[4.0],
            &LbfgsConfig::default(),
        );
        assert!((res.x[0] - 1.0).abs() < 1e-6, "{:?}", res.x);
        // accepted values never increase
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn descent_trace_is_monotone() {
        let res = minimize(
            |x, g| {
                let mut v = 0.0;
                for i in 0..x.len() {
                    let t = x[i] - i as f64;
                    g[i] = 2.0 * t + (x[i]).cos();
                    v += t * t + x[i].sin();
                }
                v
            },
            &[5.0; 6],
            &LbfgsConfig::default(),
        );
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
