use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use planerecon::config::RunConfig;
use planerecon::io;
use planerecon::phantom::{phantom_mask_3d, PhantomSpec};
use planerecon::pipeline::{run_pipeline, summarize_run};
use planerecon::volumes::GridSpec;

#[derive(Parser)]
#[command(name = "planerecon", version, about = "Dynamic 3D reconstruction from interleaved slice segmentations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on the phantom.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print mean and SD of the per-frame metrics of a finished run.
    Metrics {
        #[arg(long)]
        run: PathBuf,
    },
    /// Write phantom label volumes over one breathing cycle.
    Phantom {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Volumes per breathing period.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        #[arg(long, default_value_t = 1.09)]
        spacing: f64,
        #[arg(long, default_value_t = 96)]
        size: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            let summary = run_pipeline(&cfg)?;
            print!("{}", summarize_run(&summary.output_dir)?);
            if !summary.all_frames_completed() {
                eprintln!(
                    "{} of {} frames completed",
                    summary.frames.len(),
                    summary.expected_frames
                );
            }
            Ok(summary.all_frames_completed())
        }
        Command::Metrics { run } => {
            print!("{}", summarize_run(&run)?);
            Ok(true)
        }
        Command::Phantom {
            spec,
            out,
            steps,
            spacing,
            size,
        } => {
            let spec: PhantomSpec = match &spec {
                Some(p) => toml::from_str(&io::read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => PhantomSpec::default(),
            };
            spec.validate()?;
            let grid = GridSpec::centered([size; 3], spacing, spec.center)?;
            io::create_dir(&out)?;
            for s in 0..steps.max(1) {
                let t = spec.breathing_period * s as f64 / steps.max(1) as f64;
                let labels = phantom_mask_3d(&spec, t, &grid)?;
                let path = out.join(format!("phantom_{s:03}.vol"));
                io::write_labels(&path, &labels)?;
                println!("{} t={t:.3}s voxels={}", path.display(), labels.count());
            }
            Ok(true)
        }
    }
}
