//! The end-to-end pipeline: harmonic initialization, certified-bijective
//! optimization, MIPS refinement, quality reporting.

use crate::bijective::{bijectify, BijectifyError, LevelTrace};
use crate::harmonic::{harmonic_map, HarmonicError};
use crate::io::PipelineConfig;
use crate::jacobian::CertificateReport;
use crate::mips::{refine, MipsError, MipsIterTrace, RefineStatus};
use crate::quality::{quality_report, QualityError, QualityReport, StageTimings};
use crate::spline::BSplineSurface;
use crate::spline::BSplineVolume;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Bijectify(#[from] BijectifyError),
    #[error(transparent)]
    Mips(#[from] MipsError),
    #[error(transparent)]
    Quality(#[from] QualityError),
}

/// Terminal state of a pipeline run. Certification failure is a reported
/// status (the partial outputs are still written), not an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineStatus {
    Certified,
    CertificationFailedAtMaxLevel,
    /// MIPS result was discarded because re-certification failed; the
    /// certified stage-2 volume is returned.
    CertifiedWithoutRefinement,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub status: PipelineStatus,
    pub volume: BSplineVolume,
    pub certificate: CertificateReport,
    pub quality: QualityReport,
    pub harmonic_energy: f64,
    pub level_trace: Vec<LevelTrace>,
    pub mips_trace: Vec<MipsIterTrace>,
    pub mips_initial_objective: f64,
    pub mips_final_objective: f64,
    pub timings: StageTimings,
    /// Line-oriented progress log.
    pub log: Vec<String>,
}

/// Run all three stages from six boundary surfaces.
pub fn run_pipeline(
    faces: &[BSplineSurface],
    config: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let mut log = Vec::new();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let harmonic = harmonic_map(faces, config.pcg_tol)?;
    timings.harmonic_s = t.elapsed().as_secs_f64();
    log.push(format!(
        "harmonic: energy {:.6e}, pcg iterations {}, residual {:.3e}",
        harmonic.energy, harmonic.pcg_iterations, harmonic.relative_residual
    ));

    let t = Instant::now();
    let bij = bijectify(&harmonic.volume, &config.bijectify_params())?;
    timings.bijective_s = t.elapsed().as_secs_f64();
    for line in &bij.trace {
        log.push(line.to_string());
    }
    log.push(format!(
        "bijective: certified {}, solver calls {}, refined {}",
        bij.report.certified, bij.solver_calls, bij.refined
    ));

    if !bij.report.certified {
        let t = Instant::now();
        let quality = quality_report(&bij.volume, &config.quality_config())?;
        timings.metrics_s = t.elapsed().as_secs_f64();
        log.push("certification failed at the maximal level".to_string());
        return Ok(PipelineOutcome {
            status: PipelineStatus::CertificationFailedAtMaxLevel,
            volume: bij.volume,
            certificate: bij.report,
            quality,
            harmonic_energy: harmonic.energy,
            level_trace: bij.trace,
            mips_trace: Vec::new(),
            mips_initial_objective: f64::NAN,
            mips_final_objective: f64::NAN,
            timings,
            log,
        });
    }

    let t = Instant::now();
    let mips = refine(&bij.volume, &bij.report, &config.mips_params())?;
    timings.mips_s = t.elapsed().as_secs_f64();
    for it in &mips.trace {
        log.push(format!(
            "mips iter {}: objective {:.9}, grad {:.3e}, step {:.3e}, min nodal det {:.6}",
            it.iteration, it.objective, it.grad_norm, it.step, it.min_nodal_det
        ));
    }
    log.push(format!(
        "mips: {:?}, objective {:.9} -> {:.9}",
        mips.status, mips.initial_objective, mips.final_objective
    ));

    let status = match mips.status {
        RefineStatus::RejectedRecertification => PipelineStatus::CertifiedWithoutRefinement,
        _ => PipelineStatus::Certified,
    };
    let t_q = Instant::now();
    let mut quality = quality_report(&mips.volume, &config.quality_config())?;
    timings.metrics_s = t_q.elapsed().as_secs_f64();
    quality.timings = timings;

    Ok(PipelineOutcome {
        status,
        volume: mips.volume,
        certificate: mips.certificate,
        quality,
        harmonic_energy: harmonic.energy,
        level_trace: bij.trace,
        mips_trace: mips.trace,
        mips_initial_objective: mips.initial_objective,
        mips_final_objective: mips.final_objective,
        timings,
        log,
    })
}
