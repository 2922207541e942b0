use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use crossloco::formats::save_dataset;
use crossloco::report::{ablate, eval_checkpoint, parse_modes, retarget, write_report};
use crossloco::run::{parse_config, train};
use crossloco::UsageError;
use crossloco_core::motion::{default_clip_specs, generate_clip, Preset};

#[derive(Parser)]
#[command(name = "crossloco", version, about = "Motion-conditioned locomotion training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic source-motion dataset
    GenData {
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated preset filter (walk,run,hop,sway,stand); default all
        #[arg(long)]
        presets: Option<String>,
        /// Generation seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a policy from a JSON config
    Train {
        /// Training config file
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint to resume from
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset
    Eval {
        /// Checkpoint file
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory
        #[arg(long)]
        dataset: PathBuf,
        /// Diversity subset size
        #[arg(long, default_value_t = 256)]
        sd: usize,
        /// Metric seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one clip through a trained policy and export the trajectory
    Retarget {
        /// Checkpoint file
        #[arg(long)]
        checkpoint: PathBuf,
        /// Source clip file
        #[arg(long)]
        clip: PathBuf,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate several reward modes with a shared seed and dataset
    Ablate {
        /// Base training config file
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated reward modes
        #[arg(long, default_value = "full,task_only,r2h_only")]
        modes: String,
        /// Diversity subset size
        #[arg(long, default_value_t = 256)]
        sd: usize,
        /// Metric seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn gen_data(out: &PathBuf, presets: Option<&str>, seed: u64) -> Result<()> {
    let filter: Option<Vec<Preset>> = match presets {
        None => None,
        Some(list) => {
            let mut v = Vec::new();
            for part in list.split(',') {
                let part = part.trim();
                match Preset::parse(part) {
                    Some(p) => v.push(p),
                    None => bail!(UsageError(format!(
                        "unknown preset '{part}' (expected walk, run, hop, sway, or stand)"
                    ))),
                }
            }
            Some(v)
        }
    };
    // indices into the default spec list keep per-clip seeds stable under
    // any preset filter
    let mut clips = Vec::new();
    for (i, (preset, params)) in default_clip_specs().into_iter().enumerate() {
        if let Some(f) = &filter {
            if !f.contains(&preset) {
                continue;
            }
        }
        clips.push(generate_clip(preset, &params, seed.wrapping_add(i as u64))?);
    }
    if clips.is_empty() {
        bail!(UsageError("preset filter matched no clips".into()));
    }
    let manifest = save_dataset(out, &clips, seed)?;
    println!("wrote {} clips, manifest {}", clips.len(), manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { out, presets, seed } => gen_data(&out, presets.as_deref(), seed),
        Command::Train { config, resume } => {
            let cfg = parse_config(&config)?;
            let dir = train(&cfg, resume.as_deref())?;
            println!("run complete: {}", dir.display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            dataset,
            sd,
            seed,
            out,
        } => {
            let row = eval_checkpoint(&checkpoint, &dataset, sd, seed, &out)?;
            println!(
                "mode={} ACR={:.4} DIV={:.4} RTR={:.4} fall_rate={:.4}",
                row.mode.name(),
                row.acr,
                row.div,
                row.rtr,
                row.fall_rate
            );
            Ok(())
        }
        Command::Retarget { checkpoint, clip, out } => {
            retarget(&checkpoint, &clip, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Ablate {
            config,
            modes,
            sd,
            seed,
        } => {
            let cfg = parse_config(&config)?;
            let modes = parse_modes(&modes)?;
            let rows = ablate(&cfg, &modes, sd, seed)?;
            let (_, txt) = write_report(&rows, &PathBuf::from(&cfg.out_dir).join("ablation"))?;
            println!("{}", std::fs::read_to_string(txt)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
