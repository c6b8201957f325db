//! `fta-lab`: runs the supervised drift sweep, DQN experiments, the η×δ
//! sensitivity grid and activation dumps, writing CSVs for plotting.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fta_core::dqn::HeadKind;
use fta_core::env::EnvName;
use fta_core::TilingConfig;

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    Usage(String),
    /// A run failed or diverged; exit code 2.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fta-lab", version, about = "Fuzzy tiling activation experiments")]
struct Cli {
    /// TOML experiment file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use seeds 0..N.
    #[arg(long, global = true, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output directory, created when missing.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reduced budgets for a quick pass.
    #[arg(long, global = true)]
    desk_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Online regression on the drift stream across difficulties and learning rates.
    Supervised,
    /// DQN runs, one CSV of checkpoint metrics per variant and seed.
    Rl {
        #[arg(long, value_parser = parse_env)]
        env: Option<EnvName>,
        /// Comma-separated heads: fta, relu, relu_large, rbf, l1, l2, tanh.
        #[arg(long, value_delimiter = ',', value_parser = parse_head)]
        variants: Option<Vec<HeadKind>>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Mean evaluation return of DQN-FTA over an η × δ grid.
    Grid {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Dense sweep of the activation and its derivative.
    ActivationDemo {
        #[arg(long, requires_all = ["upper", "tile_width"])]
        lower: Option<f64>,
        #[arg(long, requires = "lower")]
        upper: Option<f64>,
        #[arg(long, requires = "lower")]
        tile_width: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse().map_err(|e: fta_core::Error| e.to_string())
}

fn parse_env(s: &str) -> Result<EnvName, String> {
    s.parse().map_err(|e: fta_core::Error| e.to_string())
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if cli.desk_scale {
        cfg.desk_scale();
    }
    if let Some(n) = cli.seeds {
        cfg.set_seeds(&(0..n).collect::<Vec<_>>());
    }
    if let Some(list) = &cli.seed_list {
        cfg.set_seeds(list);
    }
    match &cli.command {
        Command::Supervised => {}
        Command::Rl { env, variants, steps } => {
            cfg.rl.env = env.unwrap_or(cfg.rl.env);
            cfg.rl.variants = variants.clone().unwrap_or(cfg.rl.variants);
            cfg.rl.total_steps = steps.unwrap_or(cfg.rl.total_steps);
        }
        Command::Grid { steps } => {
            cfg.grid.total_steps = steps.unwrap_or(cfg.grid.total_steps);
        }
        Command::ActivationDemo { lower, upper, tile_width, eta, points } => {
            let t = cfg.activation.tiling;
            let t = match (lower, upper, tile_width) {
                (Some(l), Some(u), Some(w)) => TilingConfig::new(*l, *u, *w, t.eta()),
                _ => Ok(t),
            }
            .and_then(|t| t.with_eta(eta.unwrap_or(t.eta())))
            .map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.activation.tiling = t;
            cfg.activation.points = points.unwrap_or(cfg.activation.points);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Usage("--workers must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let out: &Path = &cli.out;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", config_path.display())))?;

    pool.install(|| match cli.command {
        Command::Supervised => commands::supervised(&cfg, out),
        Command::Rl { .. } => commands::rl(&cfg, out),
        Command::Grid { .. } => commands::grid(&cfg, out),
        Command::ActivationDemo { .. } => commands::activation_demo(&cfg, out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fta-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
