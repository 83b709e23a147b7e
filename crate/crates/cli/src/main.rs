//! Command-line front end: generate datasets, train checkpoint caches, and
//! run evaluation sweeps from flat key=value configs with flag overrides.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use featlink::harness::{
    generate_synthetic, prepare_checkpoints, run_experiment, save_features, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    name = "featlink",
    version,
    about = "Simulates feature retrieval over wireless links: analog autoencoder \
             and digital compressed schemes, swept over SNR/bandwidth grids."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset and write its
    /// train/gallery/query parts as feature files under --out.
    GenData(Overrides),
    /// Train every bandwidth x seed combination and populate the checkpoint
    /// cache without evaluating.
    Train(Overrides),
    /// Run the full grid: train or reuse checkpoints, then write
    /// results.csv and summary.txt.
    Eval(Overrides),
    /// Same as eval; the conventional name for multi-point runs.
    Sweep(Overrides),
}

/// Config file plus per-flag overrides. Every flag maps onto the same
/// dotted key the config file uses, so the two spellings cannot drift.
#[derive(Args)]
struct Overrides {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// jscc_ae | jscc_fc | digital
    #[arg(long)]
    scheme: Option<String>,
    /// Training SNR in dB ("inf" allowed).
    #[arg(long)]
    snr_train: Option<String>,
    /// Comma-separated test SNRs in dB.
    #[arg(long)]
    snr_test_grid: Option<String>,
    /// Comma-separated channel bandwidths (complex symbols per feature).
    #[arg(long)]
    bandwidth: Option<String>,
    /// t3 | t13 | t13_l1 | t123
    #[arg(long)]
    strategy: Option<String>,
    /// Comma-separated run seeds.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for results, summaries, and checkpoints.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// l2 | cosine
    #[arg(long)]
    metric: Option<String>,
}

impl Overrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("scheme", &self.scheme),
            ("train.snr_db", &self.snr_train),
            ("channel.snr_grid", &self.snr_test_grid),
            ("channel.bandwidth_grid", &self.bandwidth),
            ("train.strategy", &self.strategy),
            ("eval.seeds", &self.seed),
            ("eval.metric", &self.metric),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v).with_context(|| format!("flag --{key}"))?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenData(o) => gen_data(&o.build()?),
        Command::Train(o) => train(&o.build()?),
        Command::Eval(o) | Command::Sweep(o) => eval(&o.build()?),
    }
}

fn gen_data(cfg: &ExperimentConfig) -> Result<()> {
    let split = generate_synthetic(&cfg.synthetic)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    for (name, part) in [
        ("train", &split.train),
        ("gallery", &split.gallery),
        ("query", &split.query),
    ] {
        let path = cfg.out_dir.join(format!("{name}.features"));
        save_features(&path, part)?;
        println!("wrote {} ({} rows, dim {})", path.display(), part.len(), part.dim());
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig) -> Result<()> {
    let dirs = prepare_checkpoints(cfg)?;
    for dir in &dirs {
        println!("checkpoint {}", dir.display());
    }
    println!("{} combo(s) trained or reused", dirs.len());
    Ok(())
}

fn eval(cfg: &ExperimentConfig) -> Result<()> {
    let outcome = run_experiment(cfg)?;
    println!(
        "wrote {} ({} rows) and {}",
        outcome.results_path.display(),
        outcome.rows.len(),
        outcome.summary_path.display()
    );
    if !outcome.failures.is_empty() {
        eprintln!("{} grid point(s) failed:", outcome.failures.len());
        for f in &outcome.failures {
            eprintln!("  - {f}");
        }
        std::process::exit(1);
    }
    Ok(())
}
