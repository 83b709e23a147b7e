//! The grid driver: train (or reload) every bandwidth × seed combination of
//! the configured scheme, evaluate each test SNR, and write `results.csv`,
//! `summary.txt`, per-combo rate-point tables, and cached checkpoints.
//!
//! Combos are independent — disjoint derived seeds, disjoint checkpoint
//! directories — and the CSV is assembled in grid order, so output bytes
//! depend only on the config.

use std::fmt::Write as _;
use std::fs;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::channel::{ChannelConfig, ChannelMode};
use crate::digital::{
    best_static_point, eval_fading_csi_metrics, eval_fading_outage, precompute_eval,
    rate_points_csv, train_digital, CompressorEval, DigitalCompressor, DigitalSpec, RatePoint,
};
use crate::entropy::GmmParams;
use crate::jscc::{
    ae_received_features, clean_features, fc_received_features, train, train_fc, FcModels,
    JsccModels, TrainData,
};
use crate::nn::{read_network, write_network, Network};
use crate::retrieval::{mean_average_precision, top_k_accuracy, Gallery, Metric};

use super::config::{mix_seed, sha256_hex, DataSource, ExperimentConfig, FadingProtocol, Scheme};
use super::data::{generate_synthetic, load_features, split_per_id, DatasetSplit};
use super::HarnessError;

/// Column order of `results.csv`. `snr_train` is empty for the digital
/// scheme (its training never sees a channel); `mean_bits` is empty for the
/// analog schemes.
pub const RESULTS_HEADER: &str =
    "scheme,snr_train,snr_test,bandwidth,seed,top1,top5,map,mean_bits";

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: &'static str,
    pub snr_train: Option<f64>,
    pub snr_test: f64,
    pub bandwidth: usize,
    pub seed: u64,
    pub top1: f64,
    pub top5: f64,
    pub map: f64,
    pub mean_bits: Option<f64>,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scheme,
            opt(self.snr_train),
            self.snr_test,
            self.bandwidth,
            self.seed,
            self.top1,
            self.top5,
            self.map,
            opt(self.mean_bits)
        )
    }
}

/// Everything a finished run reports back.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    /// One human-readable entry per failed grid point or combo.
    pub failures: Vec<String>,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Run the full grid described by `cfg`. Individual grid points that fail
/// are recorded and skipped; only setup problems (bad config, unreadable
/// dataset, unwritable output directory) abort the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let (split, data_digest) = load_dataset(cfg)?;
    fs::create_dir_all(cfg.out_dir.join("ckpt"))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &bandwidth in &cfg.bandwidth_grid {
        for &seed in &cfg.seeds {
            if let Err(e) =
                run_combo(cfg, &split, &data_digest, bandwidth, seed, &mut rows, &mut failures)
            {
                failures.push(format!(
                    "scheme={} bandwidth={} seed={}: {}",
                    cfg.scheme.name(),
                    bandwidth,
                    seed,
                    e
                ));
            }
        }
    }
    let mut csv = String::with_capacity(64 * (rows.len() + 1));
    csv.push_str(RESULTS_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    let results_path = cfg.out_dir.join("results.csv");
    fs::write(&results_path, csv)?;
    let summary_path = cfg.out_dir.join("summary.txt");
    fs::write(&summary_path, render_summary(cfg, &split, &rows, &failures))?;
    Ok(ExperimentOutcome { rows, failures, results_path, summary_path })
}

/// Train (or reuse) every bandwidth × seed combo without evaluating, and
/// return the checkpoint directories in grid order.
pub fn prepare_checkpoints(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    cfg.validate()?;
    let (split, data_digest) = load_dataset(cfg)?;
    fs::create_dir_all(cfg.out_dir.join("ckpt"))?;
    let mut dirs = Vec::new();
    for &bandwidth in &cfg.bandwidth_grid {
        for &seed in &cfg.seeds {
            let (_, dir) = ensure_trained(cfg, &split, &data_digest, bandwidth, seed)?;
            dirs.push(dir);
        }
    }
    Ok(dirs)
}

/// Resolve the configured dataset and a digest of its content for cache
/// keying.
fn load_dataset(cfg: &ExperimentConfig) -> Result<(DatasetSplit, String), HarnessError> {
    match cfg.source {
        DataSource::Synthetic => {
            let split = generate_synthetic(&cfg.synthetic)?;
            let s = cfg.synthetic;
            let digest = format!(
                "synthetic:num_ids={},samples_per_id={},input_dim={},cluster_spread={},seed={}",
                s.num_ids, s.samples_per_id, s.input_dim, s.cluster_spread, s.seed
            );
            Ok((split, digest))
        }
        DataSource::File => {
            let bytes = fs::read(&cfg.data_path)?;
            let set = load_features(&cfg.data_path)?;
            let split = split_per_id(&set, cfg.split_seed)?;
            let digest = format!("file:{}:split_seed={}", sha256_hex(&bytes), cfg.split_seed);
            Ok((split, digest))
        }
    }
}

/// Trained models of whichever scheme the config selects.
enum Trained {
    Ae(JsccModels),
    Fc(FcModels),
    Digital(Vec<DigitalCompressor>),
}

fn ensure_trained(
    cfg: &ExperimentConfig,
    split: &DatasetSplit,
    data_digest: &str,
    bandwidth: usize,
    seed: u64,
) -> Result<(Trained, PathBuf), HarnessError> {
    let fingerprint = cfg.train_fingerprint(data_digest, bandwidth, seed);
    let dir = cfg
        .out_dir
        .join("ckpt")
        .join(sha256_hex(fingerprint.as_bytes()));
    if let Some(t) = load_checkpoint(cfg, &dir, bandwidth, split) {
        return Ok((t, dir));
    }
    let data = TrainData {
        inputs: &split.train.features,
        labels: &split.train.labels,
        num_classes: split.num_classes,
    };
    let trained = match cfg.scheme {
        Scheme::JsccAe => {
            let (models, _) = train(&cfg.jscc_plan(seed), &cfg.jscc_spec(bandwidth), &data)?;
            Trained::Ae(models)
        }
        Scheme::JsccFc => {
            let (models, _) = train_fc(&cfg.jscc_plan(seed), cfg.feature_dim, bandwidth, &data)?;
            Trained::Fc(models)
        }
        Scheme::Digital => {
            let mut family = Vec::with_capacity(cfg.lambda_grid.len());
            for (i, &lambda) in cfg.lambda_grid.iter().enumerate() {
                let spec = DigitalSpec {
                    feature_dim: split.train.dim(),
                    latent_dim: cfg.latent_dim,
                    num_classes: split.num_classes,
                    components: cfg.components,
                    lambda_max: lambda,
                };
                let sub_seed =
                    mix_seed(&["digital-train", &seed.to_string(), &i.to_string()]);
                let (comp, _) =
                    train_digital(&spec, &cfg.digital_schedule(), cfg.batch_size, &data, sub_seed)?;
                family.push(comp);
            }
            Trained::Digital(family)
        }
    };
    save_checkpoint(&dir, &fingerprint, &trained)?;
    Ok((trained, dir))
}

fn run_combo(
    cfg: &ExperimentConfig,
    split: &DatasetSplit,
    data_digest: &str,
    bandwidth: usize,
    seed: u64,
    rows: &mut Vec<ResultRow>,
    failures: &mut Vec<String>,
) -> Result<(), HarnessError> {
    let (trained, _) = ensure_trained(cfg, split, data_digest, bandwidth, seed)?;
    let point_failed = |snr: f64, e: HarnessError, failures: &mut Vec<String>| {
        failures.push(format!(
            "scheme={} bandwidth={} seed={} snr_test={}: {}",
            cfg.scheme.name(),
            bandwidth,
            seed,
            snr,
            e
        ));
    };
    match &trained {
        Trained::Ae(models) => {
            let gallery = Gallery::new(
                clean_features(&models.feature_encoder, &split.gallery.features)?,
                split.gallery.labels.clone(),
            )?;
            for &snr in &cfg.snr_grid {
                match eval_ae_point(cfg, models, &gallery, split, bandwidth, seed, snr) {
                    Ok(row) => rows.push(row),
                    Err(e) => point_failed(snr, e, failures),
                }
            }
        }
        Trained::Fc(models) => {
            // Gallery features are the clean normalized symbols (an
            // infinite-SNR pass: pure power normalization, no noise draw).
            let gallery = Gallery::new(
                fc_received_features(
                    models,
                    &split.gallery.features,
                    &ChannelConfig::awgn(f64::INFINITY),
                    0,
                )?,
                split.gallery.labels.clone(),
            )?;
            for &snr in &cfg.snr_grid {
                match eval_fc_point(cfg, models, &gallery, split, bandwidth, seed, snr) {
                    Ok(row) => rows.push(row),
                    Err(e) => point_failed(snr, e, failures),
                }
            }
        }
        Trained::Digital(family) => {
            let points: Vec<RatePoint> = family
                .iter()
                .map(|c| {
                    crate::digital::evaluate_rate_point(
                        c,
                        bandwidth,
                        &split.gallery.features,
                        &split.gallery.labels,
                        &split.query.features,
                        &split.query.labels,
                        cfg.metric,
                    )
                })
                .collect::<Result<_, _>>()?;
            fs::write(
                cfg.out_dir
                    .join(format!("rate_points_b{bandwidth}_seed{seed}.csv")),
                rate_points_csv(&points),
            )?;
            match cfg.channel_mode {
                ChannelMode::Awgn => {
                    for &snr in &cfg.snr_grid {
                        rows.push(static_digital_row(&points, bandwidth, seed, snr));
                    }
                }
                ChannelMode::SlowFading => {
                    let evals: Vec<CompressorEval> = family
                        .iter()
                        .map(|c| {
                            precompute_eval(
                                c,
                                &split.gallery.features,
                                &split.gallery.labels,
                                &split.query.features,
                                &split.query.labels,
                                cfg.metric,
                            )
                        })
                        .collect::<Result<_, _>>()?;
                    for &snr in &cfg.snr_grid {
                        match fading_digital_row(cfg, &evals, bandwidth, seed, snr) {
                            Ok(row) => rows.push(row),
                            Err(e) => point_failed(snr, e, failures),
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn eval_ae_point(
    cfg: &ExperimentConfig,
    models: &JsccModels,
    gallery: &Gallery,
    split: &DatasetSplit,
    bandwidth: usize,
    seed: u64,
    snr: f64,
) -> Result<ResultRow, HarnessError> {
    let noise_seed = mix_seed(&[
        "eval-noise",
        cfg.scheme.name(),
        &bandwidth.to_string(),
        &seed.to_string(),
        &snr.to_string(),
    ]);
    let received =
        ae_received_features(models, &split.query.features, &cfg.channel_at(snr), noise_seed)?;
    let (top1, top5, map) = score_retrieval(gallery, &received, &split.query.labels, cfg.metric)?;
    Ok(ResultRow {
        scheme: cfg.scheme.name(),
        snr_train: Some(cfg.snr_train_db),
        snr_test: snr,
        bandwidth,
        seed,
        top1,
        top5,
        map,
        mean_bits: None,
    })
}

fn eval_fc_point(
    cfg: &ExperimentConfig,
    models: &FcModels,
    gallery: &Gallery,
    split: &DatasetSplit,
    bandwidth: usize,
    seed: u64,
    snr: f64,
) -> Result<ResultRow, HarnessError> {
    let noise_seed = mix_seed(&[
        "eval-noise",
        cfg.scheme.name(),
        &bandwidth.to_string(),
        &seed.to_string(),
        &snr.to_string(),
    ]);
    let received =
        fc_received_features(models, &split.query.features, &cfg.channel_at(snr), noise_seed)?;
    let (top1, top5, map) = score_retrieval(gallery, &received, &split.query.labels, cfg.metric)?;
    Ok(ResultRow {
        scheme: cfg.scheme.name(),
        snr_train: Some(cfg.snr_train_db),
        snr_test: snr,
        bandwidth,
        seed,
        top1,
        top5,
        map,
        mean_bits: None,
    })
}

/// Static-channel digital row: the best family member whose equivalent SNR
/// fits the test SNR. When none fits, nothing can be delivered and every
/// metric is zero.
fn static_digital_row(points: &[RatePoint], bandwidth: usize, seed: u64, snr: f64) -> ResultRow {
    let base = ResultRow {
        scheme: "digital",
        snr_train: None,
        snr_test: snr,
        bandwidth,
        seed,
        top1: 0.0,
        top5: 0.0,
        map: 0.0,
        mean_bits: None,
    };
    match best_static_point(points, snr) {
        Some(p) => ResultRow {
            top1: p.top1,
            top5: p.top5,
            map: p.map_score,
            mean_bits: Some(p.mean_bits),
            ..base
        },
        None => base,
    }
}

/// Fading digital row under the configured protocol. Fixed-rate members are
/// scored as (success fraction) × (metric among successes); the
/// channel-aware protocol adapts per trial and reports plain means.
fn fading_digital_row(
    cfg: &ExperimentConfig,
    evals: &[CompressorEval],
    bandwidth: usize,
    seed: u64,
    snr: f64,
) -> Result<ResultRow, HarnessError> {
    let base = ResultRow {
        scheme: "digital",
        snr_train: None,
        snr_test: snr,
        bandwidth,
        seed,
        top1: 0.0,
        top5: 0.0,
        map: 0.0,
        mean_bits: None,
    };
    match cfg.fading_protocol {
        FadingProtocol::Outage => {
            let mut best: Option<ResultRow> = None;
            for (i, ev) in evals.iter().enumerate() {
                let trial_seed = mix_seed(&[
                    "fading-eval",
                    "outage",
                    &bandwidth.to_string(),
                    &seed.to_string(),
                    &snr.to_string(),
                    &i.to_string(),
                ]);
                let o = eval_fading_outage(ev, bandwidth, snr, cfg.fading_trials, trial_seed);
                let mean_bits = ev.per_query_bits.iter().sum::<usize>() as f64
                    / ev.per_query_bits.len().max(1) as f64;
                let row = ResultRow {
                    top1: o.score(),
                    top5: o.success_fraction * o.top5_given_success,
                    map: o.success_fraction * o.map_given_success,
                    mean_bits: Some(mean_bits),
                    ..base.clone()
                };
                if best.as_ref().map_or(true, |b| row.top1 > b.top1) {
                    best = Some(row);
                }
            }
            Ok(best.expect("validated non-empty lambda grid"))
        }
        FadingProtocol::Csi => {
            let trial_seed = mix_seed(&[
                "fading-eval",
                "csi",
                &bandwidth.to_string(),
                &seed.to_string(),
                &snr.to_string(),
            ]);
            let o =
                eval_fading_csi_metrics(evals, bandwidth, snr, cfg.fading_trials, trial_seed)?;
            Ok(ResultRow { top1: o.top1, top5: o.top5, map: o.map, ..base })
        }
    }
}

fn score_retrieval(
    gallery: &Gallery,
    queries: &Array2<f64>,
    labels: &[usize],
    metric: Metric,
) -> Result<(f64, f64, f64), HarnessError> {
    let top1 = top_k_accuracy(gallery, queries, labels, 1, metric, false)?;
    let top5 = top_k_accuracy(gallery, queries, labels, 5, metric, false)?;
    let map = mean_average_precision(gallery, queries, labels, metric, false)?;
    Ok((top1.accuracy(), top5.accuracy(), map.map))
}

// ---------------------------------------------------------------------------
// Checkpoint cache
// ---------------------------------------------------------------------------

fn save_checkpoint(dir: &Path, fingerprint: &str, t: &Trained) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("fingerprint.txt"), fingerprint)?;
    match t {
        Trained::Ae(m) => {
            save_net(&dir.join("feature_encoder.net"), &m.feature_encoder)?;
            save_net(&dir.join("encoder.net"), &m.encoder)?;
            save_net(&dir.join("decoder.net"), &m.decoder)?;
            save_net(&dir.join("classifier.net"), &m.classifier)?;
        }
        Trained::Fc(m) => {
            save_net(&dir.join("feature_encoder.net"), &m.feature_encoder)?;
            save_net(&dir.join("encoder.net"), &m.encoder)?;
            save_net(&dir.join("classifier.net"), &m.classifier)?;
        }
        Trained::Digital(family) => {
            for (i, comp) in family.iter().enumerate() {
                save_net(&dir.join(format!("reducer_{i}.net")), &comp.reducer)?;
                save_net(&dir.join(format!("classifier_{i}.net")), &comp.classifier)?;
                save_gmm(&dir.join(format!("gmm_{i}.bin")), &comp.gmm)?;
            }
        }
    }
    Ok(())
}

/// Reload a cached combo. Any missing or unreadable piece is a cache miss
/// (returns `None`), never an error — the caller retrains and overwrites.
fn load_checkpoint(
    cfg: &ExperimentConfig,
    dir: &Path,
    bandwidth: usize,
    split: &DatasetSplit,
) -> Option<Trained> {
    match cfg.scheme {
        Scheme::JsccAe => Some(Trained::Ae(JsccModels {
            spec: cfg.jscc_spec(bandwidth),
            feature_encoder: load_net(&dir.join("feature_encoder.net"))?,
            encoder: load_net(&dir.join("encoder.net"))?,
            decoder: load_net(&dir.join("decoder.net"))?,
            classifier: load_net(&dir.join("classifier.net"))?,
        })),
        Scheme::JsccFc => Some(Trained::Fc(FcModels {
            feature_dim: cfg.feature_dim,
            bandwidth,
            feature_encoder: load_net(&dir.join("feature_encoder.net"))?,
            encoder: load_net(&dir.join("encoder.net"))?,
            classifier: load_net(&dir.join("classifier.net"))?,
        })),
        Scheme::Digital => {
            let mut family = Vec::with_capacity(cfg.lambda_grid.len());
            for (i, &lambda) in cfg.lambda_grid.iter().enumerate() {
                family.push(DigitalCompressor {
                    spec: DigitalSpec {
                        feature_dim: split.train.dim(),
                        latent_dim: cfg.latent_dim,
                        num_classes: split.num_classes,
                        components: cfg.components,
                        lambda_max: lambda,
                    },
                    reducer: load_net(&dir.join(format!("reducer_{i}.net")))?,
                    classifier: load_net(&dir.join(format!("classifier_{i}.net")))?,
                    gmm: load_gmm(&dir.join(format!("gmm_{i}.bin")))?,
                });
            }
            Some(Trained::Digital(family))
        }
    }
}

fn save_net(path: &Path, net: &Network) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_network(net, &mut w)?;
    Ok(())
}

fn load_net(path: &Path) -> Option<Network> {
    let f = File::open(path).ok()?;
    read_network(&mut BufReader::new(f)).ok()
}

fn save_gmm(path: &Path, gmm: &GmmParams) -> Result<(), HarnessError> {
    let flat = gmm.to_flat();
    let mut bytes = Vec::with_capacity(4 + 8 * flat.len());
    bytes.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    for v in &flat {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn load_gmm(path: &Path) -> Option<GmmParams> {
    let bytes = fs::read(path).ok()?;
    if bytes.len() < 4 {
        return None;
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().ok()?) as usize;
    if bytes.len() != 4 + 8 * n {
        return None;
    }
    let flat: Vec<f64> = bytes[4..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GmmParams::from_flat(&flat).ok()
}

// ---------------------------------------------------------------------------
// Summary
// ---------------------------------------------------------------------------

fn render_summary(
    cfg: &ExperimentConfig,
    split: &DatasetSplit,
    rows: &[ResultRow],
    failures: &[String],
) -> String {
    let mut s = String::new();
    let mut line = |text: String| writeln!(s, "{text}").expect("string write");
    line("experiment summary".into());
    line("==================".into());
    line(format!("scheme: {}", cfg.scheme.name()));
    line(format!("config hash: {}", cfg.config_hash()));
    line(format!(
        "dataset: {} train / {} gallery / {} query rows, {} classes, dim {}",
        split.train.len(),
        split.gallery.len(),
        split.query.len(),
        split.num_classes,
        split.train.dim()
    ));
    line(format!(
        "grid: bandwidths [{}] x seeds [{}] x test snrs [{}] dB",
        join(&cfg.bandwidth_grid),
        join(&cfg.seeds),
        join(&cfg.snr_grid)
    ));
    line(format!("rows: {} ok, {} failed", rows.len(), failures.len()));
    line(String::new());
    line("mean over seeds:".into());
    for &b in &cfg.bandwidth_grid {
        for &snr in &cfg.snr_grid {
            let matching: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.bandwidth == b && r.snr_test == snr)
                .collect();
            if matching.is_empty() {
                continue;
            }
            let n = matching.len() as f64;
            let mean = |f: fn(&ResultRow) -> f64| matching.iter().map(|r| f(r)).sum::<f64>() / n;
            line(format!(
                "  B={b} snr={snr}: top1 {:.4} top5 {:.4} map {:.4} ({} seed(s))",
                mean(|r| r.top1),
                mean(|r| r.top5),
                mean(|r| r.map),
                matching.len()
            ));
        }
    }
    line(String::new());
    if failures.is_empty() {
        line("failures: none".into());
    } else {
        line("failures:".into());
        for f in failures {
            line(format!("  - {f}"));
        }
    }
    s
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
