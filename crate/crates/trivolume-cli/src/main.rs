//! Command-line driver: harmonic init, bijective optimization, MIPS
//! refinement, certification, quality metrics, and VTK export.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input, 3 certification
//! failed, 4 solver failure.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use trivolume::bijective::{bijectify, BijectifyError};
use trivolume::fixtures;
use trivolume::harmonic::{harmonic_map, HarmonicError};
use trivolume::io::{
    export_vtk, parse_model, write_model, ModelError, ModelFile, PipelineConfig, VtkField,
};
use trivolume::jacobian::certify_volume;
use trivolume::mips::refine;
use trivolume::pipeline::{run_pipeline, PipelineError, PipelineStatus};
use trivolume::quality::quality_report;
use trivolume::spline::{BSplineSurface, BSplineVolume};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CERTIFIED: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser)]
#[command(
    name = "trivolume",
    about = "Certified-bijective trivariate B-spline volume parameterization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Model file path, or fixture:NAME for a bundled synthetic model
    /// (cube, affine-cube, twisted-cube-30, tapered-block, revolved-block,
    /// dented-cube, folded-cube).
    input: String,
    /// JSON config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Jacobian lower bound for constraint and certificate.
    #[arg(long)]
    delta: Option<f64>,
    /// Fairness weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Collocation softmax width (auto when omitted).
    #[arg(long)]
    sigma: Option<f64>,
    /// Maximal coarse-to-fine level.
    #[arg(long = "max-level")]
    max_level: Option<usize>,
    /// Certification subdivision depth.
    #[arg(long = "cert-depth")]
    cert_depth: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Low-discrepancy sequence offset.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Stage 1 only: harmonic initial map from six boundary surfaces.
    Harmonic {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "pcg-tol")]
        pcg_tol: Option<f64>,
    },
    /// Stage 2 only: certified-bijective optimization of a volume.
    Bijectify {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Stage 3 only: MIPS conformal refinement of a certified volume.
    Refine {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "mips-max-iter")]
        mips_max_iter: Option<usize>,
        #[arg(long = "mips-grad-tol")]
        mips_grad_tol: Option<f64>,
    },
    /// All three stages from six boundary surfaces.
    Pipeline {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "pcg-tol")]
        pcg_tol: Option<f64>,
        #[arg(long = "mips-max-iter")]
        mips_max_iter: Option<usize>,
        #[arg(long = "mips-grad-tol")]
        mips_grad_tol: Option<f64>,
    },
    /// Bijectivity certificate of a volume.
    Certify {
        #[command(flatten)]
        common: CommonOpts,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quality metrics of a volume.
    Metrics {
        #[command(flatten)]
        common: CommonOpts,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Samples per direction for the extrema scan.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Legacy ASCII VTK structured-grid export.
    Export {
        #[command(flatten)]
        common: CommonOpts,
        /// Output .vtk file.
        #[arg(long)]
        out: PathBuf,
        /// Lattice resolution per direction.
        #[arg(long, default_value = "17", value_delimiter = ',')]
        resolution: Vec<usize>,
        /// Comma-separated subset of detj,kappa,orth,dvol.
        #[arg(long, default_value = "detj", value_delimiter = ',')]
        fields: Vec<String>,
    },
}

struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Fail { code, message: message.into() }
    }
}

impl From<ModelError> for Fail {
    fn from(e: ModelError) -> Self {
        Fail::new(EXIT_INPUT, e.to_string())
    }
}

impl From<HarmonicError> for Fail {
    fn from(e: HarmonicError) -> Self {
        match e {
            HarmonicError::Solver(_) => Fail::new(EXIT_SOLVER, e.to_string()),
            _ => Fail::new(EXIT_INPUT, e.to_string()),
        }
    }
}

impl From<BijectifyError> for Fail {
    fn from(e: BijectifyError) -> Self {
        Fail::new(EXIT_SOLVER, e.to_string())
    }
}

impl From<PipelineError> for Fail {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Harmonic(h) => h.into(),
            PipelineError::Bijectify(b) => b.into(),
            PipelineError::Mips(m) => Fail::new(EXIT_SOLVER, m.to_string()),
            PipelineError::Quality(q) => Fail::new(EXIT_SOLVER, q.to_string()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::new(EXIT_INPUT, format!("I/O error: {e}"))
    }
}

fn load_model(input: &str) -> Result<ModelFile, Fail> {
    if let Some(name) = input.strip_prefix("fixture:") {
        let vol = fixtures::by_name(name).ok_or_else(|| {
            Fail::new(
                EXIT_INPUT,
                format!("unknown fixture {name}; available: {}", fixtures::NAMES.join(", ")),
            )
        })?;
        return Ok(ModelFile::volume(&vol));
    }
    Ok(parse_model(Path::new(input))?)
}

fn load_volume(input: &str) -> Result<BSplineVolume, Fail> {
    Ok(load_model(input)?.to_volume()?)
}

fn load_faces(input: &str) -> Result<Vec<BSplineSurface>, Fail> {
    let model = load_model(input)?;
    match model.to_faces() {
        Ok(faces) => Ok(faces),
        // a volume model also defines six boundary faces
        Err(_) => {
            let vol = model.to_volume()?;
            Ok(fixtures::faces_of(&vol))
        }
    }
}

fn resolve_config(common: &CommonOpts) -> Result<PipelineConfig, Fail> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Fail::new(EXIT_INPUT, format!("bad config file: {e}")))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = common.delta {
        cfg.delta = v;
    }
    if let Some(v) = common.lambda {
        cfg.lambda = v;
    }
    if common.sigma.is_some() {
        cfg.sigma = common.sigma;
    }
    if let Some(v) = common.max_level {
        cfg.max_level = v;
    }
    if let Some(v) = common.cert_depth {
        cfg.cert_depth = v;
    }
    if let Some(v) = common.threads {
        cfg.threads = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    cfg.validate().map_err(|m| Fail::new(EXIT_INPUT, m))?;
    if cfg.threads > 0 {
        // ignore failure: the global pool may already exist
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global();
    }
    Ok(cfg)
}

fn echo_config(dir: &Path, cfg: &PipelineConfig) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(dir.join("config.json"), text + "\n")?;
    Ok(())
}

fn write_report<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.command {
        Command::Harmonic { common, out, pcg_tol } => {
            let mut cfg = resolve_config(&common)?;
            if let Some(v) = pcg_tol {
                cfg.pcg_tol = v;
            }
            let faces = load_faces(&common.input)?;
            let outcome = harmonic_map(&faces, cfg.pcg_tol)?;
            std::fs::create_dir_all(&out)?;
            write_model(&out.join("volume.json"), &ModelFile::volume(&outcome.volume))?;
            echo_config(&out, &cfg)?;
            std::fs::write(
                out.join("trace.txt"),
                format!(
                    "harmonic: energy {:.6e}, pcg iterations {}, residual {:.3e}\n",
                    outcome.energy, outcome.pcg_iterations, outcome.relative_residual
                ),
            )?;
            eprintln!("harmonic energy {:.6e}", outcome.energy);
            Ok(0)
        }
        Command::Bijectify { common, out } => {
            let cfg = resolve_config(&common)?;
            let vol = load_volume(&common.input)?;
            let outcome = bijectify(&vol, &cfg.bijectify_params())?;
            std::fs::create_dir_all(&out)?;
            write_model(&out.join("volume.json"), &ModelFile::volume(&outcome.volume))?;
            write_report(&out.join("certificate.json"), &outcome.report)?;
            echo_config(&out, &cfg)?;
            let mut trace = String::new();
            for line in &outcome.trace {
                trace.push_str(&line.to_string());
                trace.push('\n');
            }
            std::fs::write(out.join("trace.txt"), trace)?;
            for line in &outcome.trace {
                eprintln!("{line}");
            }
            if outcome.report.certified {
                eprintln!("certified");
                Ok(0)
            } else {
                eprintln!("certification failed at the maximal level");
                Ok(EXIT_NOT_CERTIFIED)
            }
        }
        Command::Refine { common, out, mips_max_iter, mips_grad_tol } => {
            let mut cfg = resolve_config(&common)?;
            if let Some(v) = mips_max_iter {
                cfg.mips_max_iter = v;
            }
            if let Some(v) = mips_grad_tol {
                cfg.mips_grad_tol = v;
            }
            let vol = load_volume(&common.input)?;
            let cert = certify_volume(&vol, cfg.delta, cfg.cert_depth);
            if !cert.certified {
                eprintln!("input volume is not certified bijective; refusing to refine");
                return Ok(EXIT_NOT_CERTIFIED);
            }
            let outcome = refine(&vol, &cert, &cfg.mips_params())
                .map_err(|e| Fail::new(EXIT_SOLVER, e.to_string()))?;
            std::fs::create_dir_all(&out)?;
            write_model(&out.join("volume.json"), &ModelFile::volume(&outcome.volume))?;
            write_report(&out.join("certificate.json"), &outcome.certificate)?;
            echo_config(&out, &cfg)?;
            let mut trace = String::new();
            for it in &outcome.trace {
                trace.push_str(&format!(
                    "iter {}: objective {:.9}, grad {:.3e}, step {:.3e}, min nodal det {:.6}\n",
                    it.iteration, it.objective, it.grad_norm, it.step, it.min_nodal_det
                ));
            }
            std::fs::write(out.join("trace.txt"), trace)?;
            eprintln!(
                "mips {:?}: objective {:.9} -> {:.9}",
                outcome.status, outcome.initial_objective, outcome.final_objective
            );
            Ok(0)
        }
        Command::Pipeline { common, out, pcg_tol, mips_max_iter, mips_grad_tol } => {
            let mut cfg = resolve_config(&common)?;
            if let Some(v) = pcg_tol {
                cfg.pcg_tol = v;
            }
            if let Some(v) = mips_max_iter {
                cfg.mips_max_iter = v;
            }
            if let Some(v) = mips_grad_tol {
                cfg.mips_grad_tol = v;
            }
            let faces = load_faces(&common.input)?;
            let outcome = run_pipeline(&faces, &cfg)?;
            std::fs::create_dir_all(&out)?;
            write_model(&out.join("volume.json"), &ModelFile::volume(&outcome.volume))?;
            write_report(&out.join("certificate.json"), &outcome.certificate)?;
            write_report(&out.join("quality.json"), &outcome.quality)?;
            echo_config(&out, &cfg)?;
            let mut trace = String::new();
            for line in &outcome.log {
                trace.push_str(line);
                trace.push('\n');
            }
            std::fs::write(out.join("trace.txt"), trace)?;
            for line in &outcome.log {
                eprintln!("{line}");
            }
            eprintln!(
                "timings: harmonic {:.2}s, bijective {:.2}s, mips {:.2}s, metrics {:.2}s",
                outcome.timings.harmonic_s,
                outcome.timings.bijective_s,
                outcome.timings.mips_s,
                outcome.timings.metrics_s
            );
            match outcome.status {
                PipelineStatus::CertificationFailedAtMaxLevel => {
                    eprintln!("certification failed at the maximal level");
                    Ok(EXIT_NOT_CERTIFIED)
                }
                _ => Ok(0),
            }
        }
        Command::Certify { common, out } => {
            let cfg = resolve_config(&common)?;
            let vol = load_volume(&common.input)?;
            let report = certify_volume(&vol, cfg.delta, cfg.cert_depth);
            match &out {
                Some(path) => write_report(path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
            }
            if report.certified {
                eprintln!("certified: every cell passes at delta {}", cfg.delta);
                Ok(0)
            } else {
                let failing: Vec<usize> =
                    report.failing_cells().map(|v| v.cell).collect();
                eprintln!("not certified; failing cells: {failing:?}");
                Ok(EXIT_NOT_CERTIFIED)
            }
        }
        Command::Metrics { common, out, resolution } => {
            let cfg = resolve_config(&common)?;
            let vol = load_volume(&common.input)?;
            let mut qcfg = cfg.quality_config();
            if let Some(r) = resolution {
                qcfg.sampling_resolution = r;
            }
            let report = quality_report(&vol, &qcfg)
                .map_err(|e| Fail::new(EXIT_INPUT, e.to_string()))?;
            println!(
                "max kappa, min orth, max orth, min dvol, max dvol: {}",
                report.table_row()
            );
            match &out {
                Some(path) => write_report(path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
            }
            Ok(0)
        }
        Command::Export { common, out, resolution, fields } => {
            let _ = resolve_config(&common)?;
            let vol = load_volume(&common.input)?;
            let res: [usize; 3] = match resolution.len() {
                1 => [resolution[0]; 3],
                3 => [resolution[0], resolution[1], resolution[2]],
                _ => {
                    return Err(Fail::new(
                        EXIT_USAGE,
                        "--resolution takes one value or three comma-separated values",
                    ))
                }
            };
            if res.iter().any(|&r| r < 2) {
                return Err(Fail::new(EXIT_USAGE, "--resolution must be at least 2"));
            }
            let mut parsed = Vec::new();
            for f in &fields {
                match VtkField::parse(f) {
                    Some(v) => parsed.push(v),
                    None => {
                        return Err(Fail::new(
                            EXIT_USAGE,
                            format!("unknown field {f}; expected detj,kappa,orth,dvol"),
                        ))
                    }
                }
            }
            export_vtk(&vol, res, &parsed, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep clap's rendered help/version on stdout conventions, but
            // report usage problems with exit code 1
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            ExitCode::from(fail.code)
        }
    }
}
