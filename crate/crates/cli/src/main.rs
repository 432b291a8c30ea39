//! `edeq`: ellipsoidal density-equalizing maps of genus-0 meshes, remeshing
//! through them, and distortion reports.
//!
//! Exit status is 0 on success, 1 for invalid input and 2 when a numerical
//! stage fails to converge.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_radii, Command, Method, PartialConfig};

#[derive(Parser)]
#[command(name = "edeq", version, about = "Ellipsoidal density-equalizing maps for genus-0 meshes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Density-equalizing map onto fixed radii.
    Edem(RunArgs),
    /// Density-equalizing map with optimized radii.
    Edeq(EdeqArgs),
    /// Uniform remeshing through a parameterization.
    Remesh(RemeshArgs),
    /// Distortion report of an existing parameterization.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON configuration; explicit flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Progress line every N iterations (0 disables).
    #[arg(long)]
    log_every: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Source mesh (OBJ or OFF).
    #[arg(long)]
    input: Option<PathBuf>,
    /// `area`, `uniform` or `csv:<path>`.
    #[arg(long)]
    population: Option<String>,
    /// `a,b,c` or `sphere`.
    #[arg(long, value_parser = parse_radii)]
    radii: Option<[f64; 3]>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Also write the per-face distortion CSV.
    #[arg(long)]
    face_csv: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ShapeArgs {
    /// Weight of the conformality term.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Descent iterations between radius updates.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    db: Option<f64>,
    #[arg(long)]
    dc: Option<f64>,
}

#[derive(Args)]
struct EdeqArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    shape: ShapeArgs,
}

#[derive(Args)]
struct RemeshArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    target_vertices: Option<usize>,
    /// Accepted for reproducible tie-breaking; the generator is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Source mesh.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Parameterization mesh with the same connectivity.
    #[arg(long)]
    param: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

impl RunArgs {
    fn layer(&self) -> PartialConfig {
        PartialConfig {
            input: self.input.clone(),
            output: self.common.out.clone(),
            population: self.population.clone(),
            radii: self.radii,
            dt: self.dt,
            epsilon: self.epsilon,
            n_max: self.n_max,
            log_every: self.common.log_every,
            face_csv: self.face_csv.then_some(true),
            ..Default::default()
        }
    }
}

impl ShapeArgs {
    fn apply(&self, p: PartialConfig) -> PartialConfig {
        PartialConfig { alpha: self.alpha, k: self.k, db: self.db, dc: self.dc, ..p }
    }
}

impl Cmd {
    fn command(&self) -> Command {
        match self {
            Cmd::Edem(_) => Command::Edem,
            Cmd::Edeq(_) => Command::Edeq,
            Cmd::Remesh(_) => Command::Remesh,
            Cmd::Metrics(_) => Command::Metrics,
        }
    }

    fn config_file(&self) -> Option<&PathBuf> {
        match self {
            Cmd::Edem(a) => a.common.config.as_ref(),
            Cmd::Edeq(a) => a.run.common.config.as_ref(),
            Cmd::Remesh(a) => a.run.common.config.as_ref(),
            Cmd::Metrics(a) => a.common.config.as_ref(),
        }
    }

    fn layer(&self) -> PartialConfig {
        match self {
            Cmd::Edem(a) => a.layer(),
            Cmd::Edeq(a) => a.shape.apply(a.run.layer()),
            Cmd::Remesh(a) => PartialConfig {
                method: a.method,
                target_vertices: a.target_vertices,
                seed: a.seed,
                ..a.shape.apply(a.run.layer())
            },
            Cmd::Metrics(a) => PartialConfig {
                input: a.source.clone(),
                param: a.param.clone(),
                output: a.common.out.clone(),
                log_every: a.common.log_every,
                ..Default::default()
            },
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("EDEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| format!("EDEQ_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err("EDEQ_THREADS must be a positive integer, got 0".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> edeq_core::Result<()> {
    let base = match cli.command.config_file() {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let config = base.overlay(cli.command.layer()).materialize(cli.command.command())?;
    commands::execute(&config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            if code == 2 {
                log::warn!("run did not converge; partial outputs are left in the output directory");
            }
            ExitCode::from(code)
        }
    }
}

fn exit_code(e: &edeq_core::Error) -> u8 {
    if e.is_convergence_failure() {
        2
    } else {
        1
    }
}
