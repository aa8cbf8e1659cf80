//! Pipeline configuration: every tunable of the three stages plus the
//! certifier, serialized alongside outputs for reproducibility.

use crate::bijective::{BijectifyParams, CollocationParams, SolverConfig};
use crate::mips::MipsParams;
use crate::quality::QualityConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Jacobian lower bound shared by the max-min constraint and the
    /// certificate.
    pub delta: f64,
    /// Fairness weight in the max-min objective.
    pub lambda: f64,
    /// Softmax width for collocation allocation; auto when absent.
    pub sigma: Option<f64>,
    /// Maximal coarse-to-fine level.
    pub max_level: usize,
    /// Certification subdivision depth.
    pub cert_depth: usize,
    pub pcg_tol: f64,
    pub solver_tol: f64,
    pub solver_max_inner_iter: usize,
    pub solver_max_stages: usize,
    pub mips_grad_tol: f64,
    pub mips_max_iter: usize,
    /// Quadrature points per direction; degree + 1 when absent.
    pub quad_orders: Option<[usize; 3]>,
    pub collocation_sub_grid: [usize; 3],
    pub collocation_budget_base: f64,
    pub collocation_cap: usize,
    pub dvol_grid: [usize; 3],
    pub sampling_resolution: usize,
    /// Worker threads for the parallel sections; 0 = all cores.
    pub threads: usize,
    /// Offset into the low-discrepancy sequence for collocation placement.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            delta: 1e-2,
            lambda: 1.0,
            sigma: None,
            max_level: 3,
            cert_depth: 3,
            pcg_tol: 1e-10,
            solver_tol: 1e-4,
            solver_max_inner_iter: 120,
            solver_max_stages: 12,
            mips_grad_tol: 1e-6,
            mips_max_iter: 500,
            quad_orders: None,
            collocation_sub_grid: [2, 2, 2],
            collocation_budget_base: 512.0,
            collocation_cap: 100_000,
            dvol_grid: [4, 4, 4],
            sampling_resolution: 33,
            threads: 0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > 0.0) {
            return Err(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.lambda > 0.0) {
            return Err(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(format!("sigma must be positive, got {s}"));
            }
        }
        for (name, v) in [
            ("solver_max_inner_iter", self.solver_max_inner_iter),
            ("solver_max_stages", self.solver_max_stages),
            ("mips_max_iter", self.mips_max_iter),
            ("sampling_resolution", self.sampling_resolution),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.collocation_sub_grid.iter().any(|&g| g == 0)
            || self.dvol_grid.iter().any(|&g| g == 0)
        {
            return Err("grid dimensions must be positive".into());
        }
        Ok(())
    }

    pub fn bijectify_params(&self) -> BijectifyParams {
        BijectifyParams {
            delta: self.delta,
            lambda: self.lambda,
            cert_depth: self.cert_depth,
            max_level: self.max_level,
            solver: SolverConfig {
                tol: self.solver_tol,
                max_inner_iter: self.solver_max_inner_iter,
                max_stages: self.solver_max_stages,
                mu_shrink: 0.1,
            },
            collocation: CollocationParams {
                sigma: self.sigma,
                sub_grid: self.collocation_sub_grid,
                budget_base: self.collocation_budget_base,
                max_total: self.collocation_cap,
                seed: self.seed,
            },
            max_refine_rounds: 3,
        }
    }

    pub fn mips_params(&self) -> MipsParams {
        MipsParams {
            max_iter: self.mips_max_iter,
            grad_tol: self.mips_grad_tol,
            quad_orders: self.quad_orders,
            delta: self.delta,
            cert_depth: self.cert_depth,
        }
    }

    pub fn quality_config(&self) -> QualityConfig {
        QualityConfig {
            sampling_resolution: self.sampling_resolution,
            dvol_grid: self.dvol_grid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"delta": 0.001}"#).unwrap();
        assert_eq!(cfg.delta, 1e-3);
        assert_eq!(cfg.max_level, 3);
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = PipelineConfig { delta: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.delta = 1e-2;
        cfg.lambda = 0.0;
        assert!(cfg.validate().is_err());
    }
}
