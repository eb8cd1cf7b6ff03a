//! `equin`: dataset generation, training, evaluation, sweeps and export.
//!
//! Exit codes: 0 success, 2 config/validation, 3 I/O, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Model;
use config::RunConfig;
use error::CliError;

/// Like `println!`, but a closed stdout (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "equin",
    version,
    about = "Equivariant encoders for group actions with stabilizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file and its summary.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        /// Dataset seed (same as --data-seed).
        #[arg(long, conflicts_with = "data_seed")]
        seed: Option<u64>,
    },
    /// Train an encoder; writes a run directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long = "lr")]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Training seed (also the encoder initialization seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Evaluate a checkpoint (or the ground-truth coset encoder).
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        source: SourceFlags,
    },
    /// Train and evaluate every (N, lambda, seed) cell of the configured grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
    },
    /// Write test-point embeddings as CSV, or the dataset itself when no
    /// model is given.
    Export {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        source: SourceFlags,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (generate, export) or directory (train, eval, sweep).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataFlags {
    /// Existing dataset file.
    #[arg(long, conflicts_with = "preset")]
    data: Option<PathBuf>,
    /// Dataset family to generate.
    #[arg(long)]
    preset: Option<String>,
    /// Dataset seed.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    triplets_per_orbit: Option<usize>,
    /// Comma-separated stabilizer orders to keep.
    #[arg(long, value_delimiter = ',')]
    stabilizer_orders: Option<Vec<usize>>,
}

#[derive(Args)]
struct ModelFlags {
    /// Number of group heads.
    #[arg(long = "N")]
    heads: Option<usize>,
    /// Entropy weight.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct SourceFlags {
    #[arg(long, conflicts_with = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Use the ground-truth coset encoder.
    #[arg(long)]
    oracle: bool,
    /// Heads of the oracle encoder (default: largest stabilizer order).
    #[arg(long = "N", requires = "oracle")]
    heads: Option<usize>,
}

impl DataFlags {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(p) = &self.data {
            c.dataset.file = Some(p.clone());
        }
        if let Some(p) = &self.preset {
            c.dataset.preset = p.clone();
            c.dataset.file = None;
        }
        if let Some(s) = self.data_seed {
            c.dataset.seed = s;
        }
        if let Some(n) = self.triplets_per_orbit {
            c.dataset.triplets_per_orbit = Some(n);
        }
        if let Some(o) = &self.stabilizer_orders {
            c.dataset.stabilizer_orders = Some(o.clone());
        }
    }
}

impl SourceFlags {
    fn model(&self, data: &equin::synthetic::Dataset) -> Option<Model> {
        if self.oracle {
            let largest = data
                .spec()
                .orbits
                .iter()
                .map(|o| o.stabilizer.order())
                .max()
                .unwrap_or(1);
            Some(Model::Oracle(self.heads.unwrap_or(largest)))
        } else {
            self.checkpoint.clone().map(Model::Checkpoint)
        }
    }
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(out) = &common.out {
        c.output = Some(out.clone());
    }
    Ok(c)
}

fn output(c: &RunConfig, fallback: impl FnOnce() -> PathBuf) -> PathBuf {
    c.output.clone().unwrap_or_else(fallback)
}

fn require_out(c: &RunConfig, what: &str) -> Result<PathBuf, CliError> {
    c.output
        .clone()
        .ok_or_else(|| CliError::Config(format!("{what} needs --out or `output` in the config")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { common, data, seed } => {
            let mut c = base_config(&common)?;
            if data.data.is_some() {
                return Err(CliError::Config(
                    "generate takes --preset, not --data".into(),
                ));
            }
            data.apply(&mut c);
            if let Some(s) = seed {
                c.dataset.seed = s;
            }
            c.dataset.file = None;
            c.validate()?;
            let out = require_out(&c, "generate")?;
            let summary = commands::generate(&c, &out)?;
            say!("{}", summary.trim_end());
            say!("wrote {}", out.display());
        }
        Command::Train {
            common,
            data,
            model,
            epochs,
            learning_rate,
            batch_size,
            seed,
            checkpoint_every,
        } => {
            let mut c = base_config(&common)?;
            data.apply(&mut c);
            if let Some(n) = model.heads {
                c.encoder.heads = n;
            }
            if let Some(l) = model.lambda {
                c.training.lambda = l;
            }
            if let Some(e) = epochs {
                c.training.epochs = e;
            }
            if let Some(lr) = learning_rate {
                c.training.learning_rate = lr;
            }
            if let Some(b) = batch_size {
                c.training.batch_size = b;
            }
            if let Some(s) = seed {
                c.training.seed = s;
                c.encoder.init_seed = None;
            }
            if let Some(k) = checkpoint_every {
                c.training.checkpoint_every = Some(k);
            }
            c.validate()?;
            let dataset = c.dataset()?;
            let dir = output(&c, || {
                PathBuf::from(format!(
                    "runs/{}-N{}-lambda{}-seed{}",
                    dataset.spec().name,
                    c.encoder.heads,
                    c.training.lambda,
                    c.training.seed
                ))
            });
            let outcome = commands::train(&c, &dataset, &dir)?;
            say!(
                "trained {} epochs in {:.1}s, final L_G {:.4}",
                outcome.epochs,
                outcome.wall_clock,
                outcome.final_equivariance
            );
            say!("run directory {}", outcome.dir.display());
            say!("checkpoint {}", outcome.checkpoint.display());
        }
        Command::Eval {
            common,
            data,
            source,
        } => {
            let mut c = base_config(&common)?;
            data.apply(&mut c);
            c.validate()?;
            check_source(&source)?;
            let dataset = c.dataset()?;
            let model = source.model(&dataset).expect("source checked");
            let out = output(&c, || match &model {
                Model::Checkpoint(p) => p.parent().unwrap_or(Path::new(".")).join("eval"),
                Model::Oracle(_) => PathBuf::from("eval-oracle"),
            });
            let row = commands::eval(&c, &model, &dataset, &out)?;
            say!("hit_rate {:.4}", row.hit_rate);
            match row.disentanglement {
                Some(d) => say!("disentanglement {d:.4}"),
                None => say!("disentanglement n/a"),
            }
            say!("entropy {:.4}", row.entropy);
            say!("stabilizer_recovery {:.4}", row.stabilizer_recovery);
            say!("wrote {}", out.join("metrics.csv").display());
        }
        Command::Sweep { common, data } => {
            let mut c = base_config(&common)?;
            data.apply(&mut c);
            c.validate()?;
            commands::sweep_grid(&c)?;
            let dataset = c.dataset()?;
            let root = output(&c, || PathBuf::from("runs/sweep"));
            let (cells, failed) = commands::sweep(&c, &dataset, &root)?;
            say!("{cells} cells, {failed} failed");
            say!("wrote {}", root.join(commands::SWEEP_CSV).display());
        }
        Command::Export {
            common,
            data,
            source,
        } => {
            let mut c = base_config(&common)?;
            data.apply(&mut c);
            c.validate()?;
            let out = require_out(&c, "export")?;
            let dataset = c.dataset()?;
            match source.model(&dataset) {
                Some(model) => commands::export_embeddings(&c, &model, &dataset, &out)?,
                None => commands::export_dataset(&dataset, &out)?,
            }
            say!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn check_source(source: &SourceFlags) -> Result<(), CliError> {
    match (&source.checkpoint, source.oracle) {
        (None, false) => Err(CliError::Config(
            "eval needs --checkpoint or --oracle".into(),
        )),
        (Some(p), _) if !p.exists() => Err(CliError::Config(format!("{}: not found", p.display()))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
