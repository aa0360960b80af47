use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use seqvpr::dataset::{load_image_set, DEFAULT_EXTENSIONS};
use seqvpr::descriptor::{encode_set, export_descriptors, HogParams, Manifest};
use seqvpr::harness::synth::{write_synthetic, SynthOptions};
use seqvpr::harness::{emit_reports, run_experiment, ExperimentConfig, KSweep};
use seqvpr::metrics::CostModel;

#[derive(Parser)]
#[command(name = "seqvpr", version, about = "Sequence matching on top of single-frame place recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a (technique x dataset x k) sweep and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's k values: `paper` (1,2,5,10,15) or `full` (1..=15).
        #[arg(long)]
        k_sweep: Option<KSweep>,
        #[arg(long)]
        cost_model: Option<CostModel>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frame tolerance for index-aligned ground truth.
        #[arg(long)]
        tolerance: Option<usize>,
    },
    /// Write a synthetic one-hot descriptor dataset with manifest, ground truth and config.
    Synth {
        #[arg(long)]
        places: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-frame encoding time recorded in the manifest.
        #[arg(long, default_value_t = 0.001)]
        encode_time: f64,
    },
    /// Encode a directory of images with HOG into an SVPR1 file.
    Encode {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest path; defaults to the output path with a `.json` extension.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> seqvpr::Result<()> {
    match cli.command {
        Command::Run {
            config,
            k_sweep,
            cost_model,
            out,
            seed,
            tolerance,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(sweep) = k_sweep {
                cfg.k_values = sweep.values();
            }
            if let Some(model) = cost_model {
                cfg.cost_model = model;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = tolerance {
                cfg.set_tolerance(t);
            }
            let results = run_experiment(&cfg)?;
            for s in &results.skipped {
                eprintln!("skipped {}/{} k={}: {}", s.dataset_name, s.technique_name, s.k, s.reason);
            }
            let written = emit_reports(&results, &cfg.output_dir)?;
            println!(
                "{} reports, {} files written to {}",
                results.reports.len(),
                written.len(),
                cfg.output_dir.display()
            );
        }
        Command::Synth {
            places,
            dim,
            sigma,
            seed,
            out,
            encode_time,
        } => {
            let opts = SynthOptions {
                places,
                dim,
                sigma,
                seed,
                encode_time_per_frame_sec: encode_time,
            };
            for path in write_synthetic(&out, &opts)? {
                println!("{}", path.display());
            }
        }
        Command::Encode { dataset, out, manifest } => {
            let images = load_image_set(&dataset, DEFAULT_EXTENSIONS)?;
            info!("encoding {} frames from {}", images.len(), dataset.display());
            let set = encode_set(&images, &HogParams::default())?;
            export_descriptors(&set, &out)?;
            let manifest_path = manifest.unwrap_or_else(|| out.with_extension("json"));
            Manifest {
                technique_name: set.technique_name().to_string(),
                encode_time_per_frame_sec: set.encode_time_per_frame(),
            }
            .save(&manifest_path)?;
            println!(
                "{} descriptors of length {} -> {} ({:.6} s/frame)",
                set.len(),
                set.dim(),
                out.display(),
                set.encode_time_per_frame()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
