use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use convfloer::config::RunConfig;
use convfloer::experiment::{run_experiment, ExperimentKind, RunOptions};
use convfloer::Error;

/// Spectral simulator and Floer-strip fixed-point finder for
/// convolution-type nonlinear Schrödinger equations on the circle.
#[derive(Parser, Debug)]
#[command(name = "convfloer", version)]
struct Cli {
    /// TOML run configuration (defaults apply to missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`). For `fixedpoints` a path
    /// ending in `.json` names the catalog file instead.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the flow and write observables.
    Simulate(SimulateArgs),
    /// Estimate the Hofer norms of F and G.
    Hofer(HoferArgs),
    /// Continue Floer strips in T.
    Strip(StripArgs),
    /// Extract, refine and catalog fixed points.
    Fixedpoints(FixedpointArgs),
    /// Run the invariant suite.
    Verify,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Mode cut-off k.
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t1: f64,
    #[arg(long)]
    state_in: Option<PathBuf>,
    #[arg(long)]
    state_out: Option<PathBuf>,
    #[arg(long)]
    observables: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HoferArgs {
    /// Gauss–Legendre nodes in t.
    #[arg(long)]
    nodes: Option<usize>,
    /// Random starts per node.
    #[arg(long)]
    starts: Option<usize>,
}

#[derive(Args, Debug)]
struct StripArgs {
    #[arg(long)]
    mode: Option<i64>,
    #[arg(long = "T-max")]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Grid as `NsxNt`, e.g. `200x32`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Continue from a snapshot JSON.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixedpointArgs {
    /// Comma-separated modes, e.g. `5,6,7,8`.
    #[arg(long, value_delimiter = ',')]
    modes_list: Option<Vec<i64>>,
    #[arg(long = "T-max")]
    t_max: Option<f64>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NsxNt, got {s:?}"))?;
    let ns = a.trim().parse().map_err(|e| format!("Ns: {e}"))?;
    let nt = b.trim().parse().map_err(|e| format!("Nt: {e}"))?;
    Ok((ns, nt))
}

const EXIT_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CheckFailed(_) => EXIT_CHECK,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
}

fn prepare(cli: &Cli) -> Result<(RunConfig, ExperimentKind, RunOptions), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut opts = RunOptions::default();
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut out_dir = cli.out.clone();
    let kind = match &cli.command {
        Command::Simulate(a) => {
            if let Some(k) = a.modes {
                cfg.k = k;
                cfg.modes.retain(|n| n.unsigned_abs() as usize <= k);
            }
            if let Some(dt) = a.dt {
                cfg.dt = dt;
            }
            opts.t1 = Some(a.t1);
            opts.state_in = a.state_in.clone();
            opts.state_out = a.state_out.clone();
            opts.observables = a.observables.clone();
            ExperimentKind::Simulate
        }
        Command::Hofer(a) => {
            if let Some(n) = a.nodes {
                cfg.hofer.nodes = n;
            }
            if let Some(m) = a.starts {
                cfg.hofer.starts = m;
            }
            ExperimentKind::Hofer
        }
        Command::Strip(a) => {
            if let Some(n) = a.mode {
                cfg.modes = vec![n];
            }
            if let Some(t) = a.t_max {
                cfg.strip.t_max = t;
            }
            if let Some(s) = a.steps {
                cfg.strip.steps = s;
            }
            if let Some((ns, nt)) = a.grid {
                cfg.grid.ns = ns;
                cfg.grid.nt = nt;
            }
            if let Some(tol) = a.tol {
                cfg.tol.residual = tol;
            }
            opts.snapshot_dir = a.snapshot_dir.clone();
            opts.resume = a.resume.clone();
            ExperimentKind::Strip
        }
        Command::Fixedpoints(a) => {
            if let Some(m) = &a.modes_list {
                cfg.modes = m.clone();
            }
            if let Some(t) = a.t_max {
                cfg.strip.t_max = t;
            }
            if let Some(path) = out_dir.clone().filter(|p| is_json(p)) {
                out_dir = path.parent().map(Path::to_path_buf).filter(|p| !p.as_os_str().is_empty());
                opts.catalog = Some(path);
            }
            ExperimentKind::Fixedpoints
        }
        Command::Verify => ExperimentKind::Verify,
    };
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    Ok((cfg, kind, opts))
}

fn configure_threads(n: Option<usize>) -> Result<(), Error> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; --threads {n} ignored");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let run = || -> Result<(), Error> {
        configure_threads(cli.threads)?;
        let (cfg, kind, opts) = prepare(&cli)?;
        let result = run_experiment(&cfg, kind, &opts);
        if kind == ExperimentKind::Verify {
            if let Ok(text) = std::fs::read_to_string(cfg.output_dir.join("verify.txt")) {
                print!("{text}");
            }
        }
        let manifest = result?;
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        for a in &manifest.artifacts {
            println!("{}", a.display());
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
