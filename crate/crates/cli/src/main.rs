use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cohere::commands::{self, out_dir, PretrainOptions};
use cohere::config::load_scene;
use cohere::{PipelineConfig, Result};

#[derive(Debug, Parser)]
#[command(name = "cohere", version, about = "LiDAR instance correspondence and contrastive pretraining toolkit")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of every random stream; overrides the scene seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track instances through a directory of sweeps.
    Track {
        /// Directory with poses.jsonl and sweeps/.
        input: PathBuf,
        /// Also write the tracks to this golden file.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Synthesize a scene, track it and run contrastive pretraining.
    PretrainSim {
        /// Scene description (TOML).
        scene: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Check the gradient by finite differences at every step.
        #[arg(long)]
        gradcheck: bool,
    },
    /// Write the sweeps and ground truth of a synthetic scene.
    SynthGen {
        /// Scene description (TOML).
        scene: PathBuf,
    },
    /// Score predicted tracks against ground truth.
    Eval {
        /// Predicted tracks (JSON lines).
        pred: PathBuf,
        /// Ground truth written by synth-gen.
        truth: PathBuf,
    },
    /// Finite-difference check of the contrastive-loss gradient.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

fn run(cli: Cli) -> Result<String> {
    let config = PipelineConfig::load_or_default(cli.config.as_deref())?;
    let out = out_dir(cli.out);
    let seed = cli.seed;
    commands::with_threads(cli.threads, move || -> Result<String> {
        let summary = match cli.command {
            Command::Track { input, golden } => {
                let s = commands::track(&input, &config, &out, golden.as_deref())?;
                format!("{} frames, {} tracks, {} matches", s.frames, s.tracks, s.matches)
            }
            Command::PretrainSim { scene, steps, gradcheck } => {
                let spec = load_scene(&scene)?;
                let s = commands::pretrain_sim(&spec, &config, PretrainOptions { steps, seed, gradcheck }, &out)?;
                match (s.first_loss, s.last_loss) {
                    (Some(a), Some(b)) => format!("{} steps, loss {a:.4} -> {b:.4}", s.steps),
                    _ => format!("{} steps", s.steps),
                }
            }
            Command::SynthGen { scene } => {
                let mut spec = load_scene(&scene)?;
                if let Some(seed) = seed {
                    spec.seed = seed;
                }
                let s = commands::synth_gen(&spec, &out)?;
                format!("{} frames of {} objects", s.frames, s.objects)
            }
            Command::Eval { pred, truth } => {
                let r = commands::eval(&pred, &truth, &config, &out)?;
                let m = r.metrics;
                format!(
                    "purity {:.4}, recall {:.4}, id switches {}, center rmse {:.4} m",
                    m.purity, m.recall, m.id_switches, m.center_rmse
                )
            }
            Command::Gradcheck { cases } => {
                let r = commands::gradcheck(seed.unwrap_or(0), cases, config.pretrain.temperature, &out)?;
                format!("{} cases, max relative error {:e}", r.cases.len(), r.max_relative_error)
            }
        };
        Ok(summary)
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COHERE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
