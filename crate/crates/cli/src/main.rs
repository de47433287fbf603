use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synthrec_core::discretize::ConflictPolicy;
use synthrec_core::pipeline::{
    cmd_evaluate, cmd_pipeline, cmd_synthesize, cmd_train_embeddings, cmd_train_gan, PipelineConfig,
};
use synthrec_core::Result;

#[derive(Parser, Debug)]
#[command(name = "synthrec", version, about = "Synthetic recommender datasets from a GAN over DeepMF embeddings")]
struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Source ratings file.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Source format: canonical, movielens, csv or tsv, optionally with `:min..max`.
    #[arg(long)]
    format: Option<String>,
    /// Number of synthetic users (user clusters).
    #[arg(long)]
    users: Option<usize>,
    /// Number of synthetic items (item clusters).
    #[arg(long)]
    items: Option<usize>,
    /// Number of generated dense samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Standard deviation of the generation noise.
    #[arg(long)]
    std: Option<f64>,
    /// remove_all, keep or merge_round_mean.
    #[arg(long)]
    conflict_policy: Option<ConflictPolicy>,
    /// Fit k-means on at most this many generated vectors.
    #[arg(long)]
    cluster_sample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse existing embedding and GAN artifacts.
    #[arg(long)]
    resume: bool,
    /// Comma-separated stds; one artifact tree per value.
    #[arg(long, value_delimiter = ',')]
    sweep_std: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train DeepMF on the source and write the dense samples.
    TrainEmbeddings(#[command(flatten)] Overrides),
    /// Train the GAN on the dense samples.
    TrainGan(#[command(flatten)] Overrides),
    /// Generate, cluster and discretize a synthetic dataset.
    Synthesize(#[command(flatten)] Overrides),
    /// Evaluate a dataset and write reports.
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Dataset to evaluate (canonical format); defaults to the synthesized one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Source dataset to compare distributions against.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Synthesis provenance for the repetition report.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Run every stage in order, then evaluate.
    Pipeline(#[command(flatten)] Overrides),
}

fn apply(mut cfg: PipelineConfig, o: &Overrides) -> PipelineConfig {
    if let Some(v) = &o.source {
        cfg.source.path = v.clone();
    }
    if let Some(v) = &o.format {
        cfg.source.format = v.clone();
    }
    if let Some(v) = o.users {
        cfg.synthesis.users = v;
    }
    if let Some(v) = o.items {
        cfg.synthesis.items = v;
    }
    if let Some(v) = o.samples {
        cfg.synthesis.samples = v;
    }
    if let Some(v) = o.std {
        cfg.synthesis.std = v;
    }
    if let Some(v) = o.conflict_policy {
        cfg.synthesis.conflict_policy = v;
    }
    if o.cluster_sample.is_some() {
        cfg.synthesis.cluster_sample = o.cluster_sample;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.out {
        cfg.out = v.clone();
    }
    if o.resume {
        cfg.resume = true;
    }
    if let Some(v) = &o.sweep_std {
        cfg.sweep_std = v.clone();
    }
    cfg
}

fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::TrainEmbeddings(o) => {
            let out = cmd_train_embeddings(&apply(base, o))?;
            log::info!("embeddings written (source sha256 {})", out.source_sha256);
        }
        Command::TrainGan(o) => {
            cmd_train_gan(&apply(base, o))?;
        }
        Command::Synthesize(o) => {
            let s = cmd_synthesize(&apply(base, o))?;
            log::info!(
                "synthetic dataset: {} ratings, {} users, {} items",
                s.dataset.len(),
                s.dataset.num_users(),
                s.dataset.num_items()
            );
        }
        Command::Evaluate {
            overrides,
            dataset,
            compare,
            provenance,
        } => {
            let cfg = apply(base, overrides);
            let layout = cfg.layout();
            let dataset = dataset.clone().unwrap_or_else(|| layout.synthetic_dataset());
            let provenance = provenance.clone().or_else(|| {
                let p = layout.synthesis_provenance();
                p.is_file().then_some(p)
            });
            cmd_evaluate(&cfg, &dataset, compare.as_deref(), provenance.as_deref(), &layout.reports())?;
        }
        Command::Pipeline(o) => {
            let out = cmd_pipeline(&apply(base, o))?;
            for r in &out.runs {
                log::info!(
                    "std {}: {} ratings, mae {:.4}, accuracy {:.4}, rating L1 {:.4}",
                    r.std,
                    r.retained,
                    r.mae,
                    r.accuracy,
                    r.rating_l1
                );
            }
            if let Some(s) = out.selected_std {
                log::info!("selected std {s}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

