mod config;
mod manifest;
mod stages;

use clap::{Args, Parser, Subcommand};
use config::PipelineConfig;
use p3_core::kpi::Group;
use stages::Method;
use std::path::PathBuf;
use std::process::ExitCode;

/// Bad arguments or configuration, as opposed to a failure while running.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "p3", version, about = "Penetrative pass-potential pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON config file; flags and P3_* variables override it.
    #[arg(long, global = true, env = "P3_CONFIG")]
    config: Option<PathBuf>,
    /// Raw StatsBomb-layout data directory.
    #[arg(long, global = true, env = "P3_DATA")]
    data: Option<PathBuf>,
    #[arg(long, global = true, env = "P3_STORE")]
    store: Option<PathBuf>,
    #[arg(long, global = true, env = "P3_MODELS")]
    models: Option<PathBuf>,
    #[arg(long = "images-dir", global = true, env = "P3_IMAGES")]
    images: Option<PathBuf>,
    #[arg(long = "eval-dir", global = true, env = "P3_EVAL")]
    eval: Option<PathBuf>,
    #[arg(long = "kpi-dir", global = true, env = "P3_KPI")]
    kpi: Option<PathBuf>,
    #[arg(long, global = true, env = "P3_SEED")]
    seed: Option<u64>,
    /// Log more (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse raw events, 360 frames and lineups into the store.
    Ingest,
    /// Find P3 moments and label them.
    Detect {
        #[arg(long)]
        zone_lo: Option<f64>,
        #[arg(long)]
        zone_hi: Option<f64>,
        #[arg(long)]
        min_opponents: Option<usize>,
    },
    /// Render one PNG per moment.
    Render {
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        /// Draw the Voronoi tessellation outside the visible area too.
        #[arg(long)]
        no_clip: bool,
    },
    /// Fit a model on the training matches.
    Train {
        #[arg(long, value_enum, default_value = "cnn")]
        method: Method,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        input_size: Option<usize>,
    },
    /// Score every moment and write ROC, confusion, calibration and histogram.
    Eval {
        #[arg(long, value_enum, default_value = "cnn")]
        method: Method,
    },
    /// Player and team tables.
    Kpi {
        /// defender, midfielder or u23 (repeatable; default all).
        #[arg(long = "group")]
        groups: Vec<Group>,
        /// Also write team tables (default when no group is given).
        #[arg(long)]
        teams: bool,
        #[arg(long)]
        min_minutes: Option<u32>,
        /// Fixed potential-moment threshold instead of the group median.
        #[arg(long)]
        min_potential: Option<u64>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "P3_ADDR")]
        addr: Option<String>,
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        #[arg(long, value_enum, default_value = "cnn")]
        method: Method,
    },
    /// Write a synthetic corpus to --data and ingest it.
    Synth {
        /// Approximate number of qualifying moments.
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        matches: Option<usize>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn resolve(global: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(p) => PipelineConfig::from_file(p).map_err(|e| UsageError(format!("{e:#}")))?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.data, global.data.clone());
    set(&mut cfg.store, global.store.clone());
    set(&mut cfg.models, global.models.clone());
    set(&mut cfg.images, global.images.clone());
    set(&mut cfg.eval, global.eval.clone());
    set(&mut cfg.kpi, global.kpi.clone());
    set(&mut cfg.seed, global.seed);
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = resolve(&cli.global)?;
    match cli.command {
        Command::Ingest => stages::ingest(&cfg),
        Command::Detect {
            zone_lo,
            zone_hi,
            min_opponents,
        } => {
            set(&mut cfg.zone_lo, zone_lo);
            set(&mut cfg.zone_hi, zone_hi);
            set(&mut cfg.min_opponents, min_opponents);
            stages::detect(&cfg)
        }
        Command::Render {
            width,
            height,
            no_clip,
        } => {
            set(&mut cfg.width, width);
            set(&mut cfg.height, height);
            if no_clip {
                cfg.clip_to_visible_area = false;
            }
            stages::render(&cfg)
        }
        Command::Train {
            method,
            epochs,
            lr,
            momentum,
            batch_size,
            train_fraction,
            input_size,
        } => {
            set(&mut cfg.epochs, epochs);
            set(&mut cfg.lr, lr);
            set(&mut cfg.momentum, momentum);
            set(&mut cfg.batch_size, batch_size);
            set(&mut cfg.train_fraction, train_fraction);
            set(&mut cfg.input_size, input_size);
            stages::train(&cfg, method)
        }
        Command::Eval { method } => stages::eval(&cfg, method),
        Command::Kpi {
            groups,
            teams,
            min_minutes,
            min_potential,
        } => {
            set(&mut cfg.min_minutes, min_minutes);
            if min_potential.is_some() {
                cfg.min_potential = min_potential;
            }
            stages::kpi(&cfg, &groups, teams)
        }
        Command::Serve {
            addr,
            cors_origins,
            method,
        } => {
            set(&mut cfg.addr, addr);
            if !cors_origins.is_empty() {
                cfg.cors_origins = cors_origins;
            }
            stages::serve(&cfg, method)
        }
        Command::Synth { n, matches } => stages::synth(&cfg, n, matches),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
