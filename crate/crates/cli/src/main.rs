#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use lorentz_synth::comparison::ReportStatus;

use crate::commands::{dispatch, Context};
use crate::config::{config_hash, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_outputs, RunRecord};

#[derive(Parser, Debug)]
#[command(name = "lorentz-synth", version, about = "Numerical checks of synthetic timelike curvature bounds")]
struct Cli {
    /// JSON experiment config ({"command", "model", "parameters", "output_dir", "seed"}).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: runs/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized inputs.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Coarser default resolutions.
    #[arg(long, global = true)]
    quick: bool,
    /// Mollification radii for mollify and lp-deficit, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "EPS")]
    eps_list: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distortion coefficients σ and τ of a curvature profile: τ dominates the
    /// constant-curvature coefficient at the profile minimum and, with p and eta set,
    /// the defect against constant K obeys the L^p distortion estimate.
    Distortion,
    /// One-dimensional CD(κ, N) condition for a density on an interval, and
    /// optionally the integral-curvature (Aubry type) diameter bound.
    CdVerify,
    /// q-Lorentz–Wasserstein optimal coupling between two discrete measures,
    /// with a dual optimality certificate.
    Transport,
    /// Timelike measure contraction property: Rényi entropy along the q-geodesic
    /// from a Dirac mass to a box measure against the τ-weighted bound.
    Tmcp,
    /// Timelike curvature-dimension condition: two-sided τ semiconvexity of the
    /// Rényi entropy along the q-geodesic between two box measures.
    Tcd,
    /// Timelike Brunn–Minkowski inequality for t-intermediate sets.
    BrunnMinkowski,
    /// Timelike Bishop–Gromov volume and area comparison for Lorentz balls.
    BishopGromov,
    /// Timelike Bonnet–Myers diameter bound π√((N−1)/K) on a positively curved model.
    BonnetMyers,
    /// Weak d'Alembert comparison for the time separation (or its q-th power)
    /// against a bump test function.
    Dalembert,
    /// Eikonal equation g(∇l, ∇l) = 1 for the time separation from a point,
    /// with the observed finite-difference order.
    Eikonal,
    /// Brenier–McCann form of the q-optimal map from a point: the transport
    /// direction matches the gradient of the q-Kantorovich potential.
    Brenier,
    /// Needle decomposition of a cone sector into radial CD(0, N) densities,
    /// plus reassembly of the reference measure.
    Needles,
    /// Mollification of a Lipschitz metric grid: sup distance to the rough metric is at most L·ε.
    Mollify,
    /// L^p deficit of the mollified timelike Ricci lower bound, which decreases as ε → 0.
    LpDeficit,
    /// Diameter bound under an integral (L^p) curvature deficit on a model with a
    /// curvature dip, on the spacetime and along its vertical needles.
    Aubry,
    /// Acceptance matrix with one pass/fail line per criterion.
    Suite {
        /// quick or full (default full, or quick with --quick).
        level: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Distortion => "distortion",
            Command::CdVerify => "cd-verify",
            Command::Transport => "transport",
            Command::Tmcp => "tmcp",
            Command::Tcd => "tcd",
            Command::BrunnMinkowski => "brunn-minkowski",
            Command::BishopGromov => "bishop-gromov",
            Command::BonnetMyers => "bonnet-myers",
            Command::Dalembert => "dalembert",
            Command::Eikonal => "eikonal",
            Command::Brenier => "brenier",
            Command::Needles => "needles",
            Command::Mollify => "mollify",
            Command::LpDeficit => "lp-deficit",
            Command::Aubry => "aubry",
            Command::Suite { .. } => "suite",
        }
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("LORENTZ_SYNTH_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("LORENTZ_SYNTH_THREADS must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(CliError::Config("LORENTZ_SYNTH_THREADS must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<bool> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let command = cli.command.name();
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(CliError::Config(format!("config is for `{c}`, not `{command}`")));
        }
    }
    let mut overrides = cfg.parameters.clone();
    let mut quick = cli.quick;
    if let Command::Suite { level: Some(level) } = &cli.command {
        match level.as_str() {
            "quick" => quick = true,
            "full" => quick = false,
            other => return Err(CliError::Config(format!("suite level must be quick or full, not `{other}`"))),
        }
        overrides.insert("level".into(), level.clone().into());
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Context { model: cfg.model.clone(), overrides, seed, quick, eps_list: cli.eps_list.clone() };
    let started = now();
    let (outcome, params) = dispatch(command, &ctx)?;
    let finished = now();
    let resolved = serde_json::json!({"command": command, "model": cfg.model, "parameters": params});
    let hash = config_hash(&resolved);
    let record = RunRecord {
        command,
        config_hash: &hash,
        seed,
        library_version: env!("CARGO_PKG_VERSION"),
        started_unix: started,
        finished_unix: finished,
        parameters: &params,
        passed: outcome.passed(),
        reports: &outcome.reports,
        extra: &outcome.extra,
    };
    let dir = cli.out.or(cfg.output_dir).unwrap_or_else(|| PathBuf::from("runs").join(command));
    write_outputs(&dir, &record, &outcome)?;
    if command != "suite" {
        for r in &outcome.reports {
            let tag = match r.status {
                ReportStatus::Passed if r.passed => "PASS",
                ReportStatus::HypothesisViolated => "SKIP",
                _ => "FAIL",
            };
            println!("{tag} {} min_margin={:e}", r.name, r.min_margin());
        }
    }
    println!("wrote {} (config {})", dir.display(), &hash[..12]);
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let payload = serde_json::json!({"error": {"kind": "usage_error", "message": e.to_string()}});
            eprintln!("{payload}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
