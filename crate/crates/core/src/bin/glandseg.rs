use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glandseg::augment::Strategy;
use glandseg::channels::ChannelKind;
use glandseg::cli::{self, Manifest, RankInput, RunConfig, SynthConfig};
use glandseg::{Error, Result};

/// Multichannel gland instance segmentation at desk scale.
#[derive(Parser)]
#[command(name = "glandseg", version)]
struct Cli {
    /// `key = value` run configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write edge labels and box coverage maps for a manifest.
    Prep {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Edge dilation radius (0 = EDGE1, 3 = EDGE3); overrides the config.
        #[arg(long)]
        edge_radius: Option<f64>,
    },
    /// Write an augmented corpus with replayable transform logs.
    Augment {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// I or II; overrides the config.
        #[arg(long)]
        strategy: Option<Strategy>,
    },
    /// Train one channel, or all three in order.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        channel: Option<ChannelKind>,
    },
    /// Predict instance maps and cache channel outputs.
    Infer {
        manifest: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Instantiate the segmentation channel alone.
        #[arg(long)]
        seg_only: bool,
    },
    /// Score predictions against a manifest; writes a JSON report.
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank methods from a score grid or from METHOD:SPLIT=report.json inputs.
    Rank {
        #[arg(required = true)]
        inputs: Vec<RankInput>,
        /// Emit JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic gland dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Probability that an image contains a touching pair.
        #[arg(long, default_value_t = 0.5)]
        touching: f64,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Check analytic against numerical gradients for every layer kind.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn manifest(p: &Path) -> Result<Manifest> {
    Manifest::load(p)
}

fn run(args: Cli) -> Result<()> {
    cli::configure_threads()?;
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    match args.command {
        Command::Prep { manifest: m, out, edge_radius } => {
            if let Some(r) = edge_radius {
                cfg.pipeline.edge_radius = r;
                cfg.validate()?;
            }
            let s = cli::cmd_prep(&cfg, &manifest(&m)?, &out)?;
            eprintln!("prep: {} files, {} warnings", s.written.len(), s.warnings.len());
        }
        Command::Augment { manifest: m, out, strategy } => {
            let s = cli::cmd_augment(&cfg, &manifest(&m)?, strategy.unwrap_or(cfg.strategy), &out)?;
            eprintln!("augment: {} samples", s.written.len());
        }
        Command::Train { manifest: m, models, channel } => {
            let s = cli::cmd_train(&cfg, &manifest(&m)?, &models, channel)?;
            eprintln!("train: wrote {} files", s.written.len());
        }
        Command::Infer { manifest: m, models, out, seg_only } => {
            let s = cli::cmd_infer(&cfg, &manifest(&m)?, &models, &out, seg_only)?;
            eprintln!("infer: {} predictions, {} warnings", s.written.len(), s.warnings.len());
        }
        Command::Eval { manifest: m, pred, out } => {
            let report = cli::cmd_eval(&cfg, &manifest(&m)?, &pred)?;
            match out {
                Some(p) => {
                    let mut bytes = serde_json::to_vec_pretty(&report)?;
                    bytes.push(b'\n');
                    glandseg::fsutil::write_atomic(&p, &bytes)?;
                }
                None => print_json(&report)?,
            }
        }
        Command::Rank { inputs, json } => {
            let table = cli::cmd_rank(&cfg, &inputs)?;
            if json {
                print_json(&table)?;
            } else {
                print!("{}", table.to_text());
            }
        }
        Command::Synth { n, out, touching, split } => {
            let synth = SynthConfig {
                touching,
                ..SynthConfig::default()
            };
            let m = cli::cmd_synth(&cfg, &synth, n, &split, &out)?;
            eprintln!("synth: {} images", m.records.len());
        }
        Command::Gradcheck { eps, tolerance } => {
            let cases = cli::cmd_gradcheck(&cfg, eps, tolerance)?;
            for c in &cases {
                println!("{:<32} {:.3e}  ({} entries)", c.name, c.max_rel_error, c.checked);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(args)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("glandseg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("glandseg: {}", Error::Internal("unexpected panic".into()));
            ExitCode::from(3)
        }
    }
}
