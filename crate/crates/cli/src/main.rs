use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use parid::experiments::config::EXAMPLE_TOML;
use parid::experiments::output::write_json;
use parid::experiments::{
    adjoint_test, convergence_study, run_pipeline, uniqueness_test, write_study, ExperimentConfig, Sweep,
};

/// Identify a matrix diffusion coefficient of a parabolic equation from
/// noisy observations.
#[derive(Parser)]
#[command(name = "parid", version, about)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline for every configured noise level.
    Run(Common),
    /// Convergence study over noise levels or mesh resolutions.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', conflicts_with = "resolutions")]
        deltas: Option<Vec<f64>>,
        /// Comma-separated space resolutions.
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
    },
    /// Check the adjoint identity on random pairs.
    AdjointTest {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
    },
    /// Evaluate the uniqueness determinant of the exact data.
    Uniqueness(Common),
    /// Print an example configuration.
    ExampleConfig,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed (overrides `noise.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    match cfg.output.dir.as_deref() {
        Some(d) => Ok(d),
        None => bail!("no output directory: pass --out or set output.dir"),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let report = run_pipeline(&cfg)?;
            for r in &report.runs {
                println!(
                    "delta {:e} seed {}: k = {}, alpha = {:.4e}, error = {:.4e} (relative {:.3e}), residual = {:.4e}",
                    r.delta, r.seed, r.k, r.alpha_k, r.error, r.relative_error, r.residual
                );
            }
            println!("wrote {}", out_dir(&cfg)?.display());
        }
        Command::Sweep {
            common,
            deltas,
            resolutions,
        } => {
            let cfg = common.load()?;
            cfg.validate()?;
            let sweep = match (deltas, resolutions) {
                (Some(d), _) => Sweep::Delta(d),
                (None, Some(r)) => Sweep::Resolution(r),
                (None, None) => Sweep::Delta(cfg.noise.deltas.clone()),
            };
            let study = convergence_study(&cfg, &sweep)?;
            let dir = out_dir(&cfg)?;
            write_study(dir, &study)?;
            println!("{}", serde_json::to_string_pretty(&study.summary)?);
            println!("wrote {}", dir.display());
        }
        Command::AdjointTest { common, pairs } => {
            let cfg = common.load()?;
            let report = adjoint_test(&cfg, pairs, cfg.noise.seed)?;
            println!(
                "h = {:.4e}, dt = {:.4e}: max mismatch {:.3e}, mean {:.3e} over {} pairs",
                report.h,
                report.dt,
                report.max,
                report.mean,
                report.mismatches.len()
            );
            if let Some(dir) = &cfg.output.dir {
                std::fs::create_dir_all(dir)?;
                write_json(&dir.join("adjoint.json"), &report)?;
            }
        }
        Command::Uniqueness(common) => {
            let cfg = common.load()?;
            let summary = uniqueness_test(&cfg)?;
            println!(
                "|D| in [{:.3e}, {:.3e}], threshold {:.3e}, above threshold on {:.1}% of elements",
                summary.min_abs,
                summary.max_abs,
                summary.threshold,
                100.0 * summary.fraction_above
            );
            if let Some(dir) = &cfg.output.dir {
                std::fs::create_dir_all(dir)?;
                write_json(&dir.join("uniqueness.json"), &summary)?;
            }
        }
        Command::ExampleConfig => print!("{}", EXAMPLE_TOML.trim_start()),
    }
    Ok(())
}
