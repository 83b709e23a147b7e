//! Flat key=value experiment configuration, shared by config files and CLI
//! overrides, plus the hashing that keys the checkpoint cache.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::channel::{ChannelConfig, ChannelMode};
use crate::digital::{desk_schedule, DEFAULT_LAMBDA_GRID};
use crate::jscc::{Activation, JsccModelSpec, JsccVariant, PhasePlan, Strategy, TrainPlan};
use crate::retrieval::Metric;

use super::data::SyntheticSpec;
use super::HarnessError;

/// Which transmission pipeline an experiment exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Feature autoencoder mapped straight onto channel symbols.
    JsccAe,
    /// Single fully-connected layer straight onto channel symbols.
    JsccFc,
    /// Quantized compressor + entropy coding under a capacity constraint.
    Digital,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::JsccAe => "jscc_ae",
            Scheme::JsccFc => "jscc_fc",
            Scheme::Digital => "digital",
        }
    }
}

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    File,
}

/// How the digital scheme handles a fading channel at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingProtocol {
    /// Fixed rate chosen per λ; deep fades are outages.
    Outage,
    /// Transmitter knows the instantaneous gain and picks the best fitting
    /// family member per transmission.
    Csi,
}

impl FadingProtocol {
    pub fn name(self) -> &'static str {
        match self {
            FadingProtocol::Outage => "outage",
            FadingProtocol::Csi => "csi",
        }
    }
}

/// Everything one experiment run depends on, as typed fields. The same
/// dotted keys work in config files and as CLI overrides; see [`apply`].
///
/// [`apply`]: ExperimentConfig::apply
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub source: DataSource,
    /// Feature file consumed when `source` is [`DataSource::File`].
    pub data_path: PathBuf,
    pub synthetic: SyntheticSpec,
    /// Split seed for file datasets (synthetic splits derive from the
    /// dataset seed).
    pub split_seed: u64,
    pub feature_dim: usize,
    pub variant: JsccVariant,
    pub activation: Activation,
    pub latent_dim: usize,
    pub components: usize,
    pub strategy: Strategy,
    pub snr_train_db: f64,
    pub batch_size: usize,
    pub feature_epochs: usize,
    pub ae_epochs: usize,
    pub joint_epochs: usize,
    pub fc_epochs: usize,
    pub digital_epochs: usize,
    pub channel_mode: ChannelMode,
    pub snr_grid: Vec<f64>,
    pub bandwidth_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub metric: Metric,
    pub seeds: Vec<u64>,
    pub fading_protocol: FadingProtocol,
    /// Monte-Carlo trials per fading evaluation point.
    pub fading_trials: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scheme: Scheme::JsccAe,
            source: DataSource::Synthetic,
            data_path: PathBuf::new(),
            synthetic: SyntheticSpec::default(),
            split_seed: 1,
            feature_dim: 64,
            variant: JsccVariant::D,
            activation: Activation::LeakyRelu,
            latent_dim: 16,
            components: 9,
            strategy: Strategy::T123,
            snr_train_db: 0.0,
            batch_size: 16,
            feature_epochs: 10,
            ae_epochs: 40,
            joint_epochs: 15,
            fc_epochs: 15,
            digital_epochs: 30,
            channel_mode: ChannelMode::Awgn,
            snr_grid: vec![-12.0, -6.0, 0.0, 6.0, 12.0],
            bandwidth_grid: vec![16],
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            metric: Metric::L2,
            seeds: vec![1, 2, 3],
            fading_protocol: FadingProtocol::Outage,
            fading_trials: 10_000,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Parse a config file body: one `key = value` per line; blank lines
    /// and lines starting with `#` are ignored. Unknown keys and bad values
    /// are reported with their line number.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::ParseError {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            cfg.apply(key, value).map_err(|e| match e {
                HarnessError::BadConfig(message) => {
                    HarnessError::ParseError { line: i + 1, message }
                }
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Set one dotted key. Used for every config-file line and for CLI
    /// overrides, so both spell settings identically.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        match key.trim() {
            "scheme" => self.scheme = parse_scheme(v)?,
            "data.source" => {
                self.source = match v {
                    "synthetic" => DataSource::Synthetic,
                    "file" => DataSource::File,
                    other => return Err(bad(format!("unknown data source {other:?}"))),
                }
            }
            "data.path" => self.data_path = PathBuf::from(v),
            "data.num_ids" => self.synthetic.num_ids = parse_num(key, v)?,
            "data.samples_per_id" => self.synthetic.samples_per_id = parse_num(key, v)?,
            "data.input_dim" => self.synthetic.input_dim = parse_num(key, v)?,
            "data.cluster_spread" => self.synthetic.cluster_spread = parse_real(key, v)?,
            "data.seed" => self.synthetic.seed = parse_num(key, v)?,
            "data.split_seed" => self.split_seed = parse_num(key, v)?,
            "model.feature_dim" => self.feature_dim = parse_num(key, v)?,
            "model.variant" => self.variant = parse_variant(v)?,
            "model.activation" => {
                self.activation = match v {
                    "leaky_relu" => Activation::LeakyRelu,
                    "prelu" => Activation::Prelu,
                    other => return Err(bad(format!("unknown activation {other:?}"))),
                }
            }
            "model.latent_dim" => self.latent_dim = parse_num(key, v)?,
            "model.components" => self.components = parse_num(key, v)?,
            "train.strategy" => {
                self.strategy = v.parse().map_err(bad)?;
            }
            "train.snr_db" => self.snr_train_db = parse_real(key, v)?,
            "train.batch_size" => self.batch_size = parse_num(key, v)?,
            "train.feature_epochs" => self.feature_epochs = parse_num(key, v)?,
            "train.ae_epochs" => self.ae_epochs = parse_num(key, v)?,
            "train.joint_epochs" => self.joint_epochs = parse_num(key, v)?,
            "train.fc_epochs" => self.fc_epochs = parse_num(key, v)?,
            "train.digital_epochs" => self.digital_epochs = parse_num(key, v)?,
            "channel.mode" => {
                self.channel_mode = match v {
                    "awgn" => ChannelMode::Awgn,
                    "slow_fading" => ChannelMode::SlowFading,
                    other => return Err(bad(format!("unknown channel mode {other:?}"))),
                }
            }
            "channel.snr_grid" => self.snr_grid = parse_list(key, v, parse_real)?,
            "channel.bandwidth_grid" => self.bandwidth_grid = parse_list(key, v, parse_num)?,
            "digital.lambda_grid" => self.lambda_grid = parse_list(key, v, parse_real)?,
            "eval.metric" => {
                self.metric = match v {
                    "l2" => Metric::L2,
                    "cosine" => Metric::Cosine,
                    other => return Err(bad(format!("unknown metric {other:?}"))),
                }
            }
            "eval.seeds" => self.seeds = parse_list(key, v, parse_num)?,
            "eval.fading_protocol" => {
                self.fading_protocol = match v {
                    "outage" => FadingProtocol::Outage,
                    "csi" => FadingProtocol::Csi,
                    other => return Err(bad(format!("unknown fading protocol {other:?}"))),
                }
            }
            "eval.trials" => self.fading_trials = parse_num(key, v)?,
            "out.dir" => self.out_dir = PathBuf::from(v),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.source == DataSource::Synthetic {
            self.synthetic.validate()?;
        } else if !self.data_path.is_file() {
            return Err(HarnessError::BadConfig(format!(
                "data.path {:?} does not exist",
                self.data_path
            )));
        }
        if self.snr_grid.is_empty() || self.bandwidth_grid.is_empty() || self.seeds.is_empty() {
            return Err(HarnessError::BadConfig(
                "snr, bandwidth, and seed grids must be non-empty".into(),
            ));
        }
        if self.scheme == Scheme::Digital && self.lambda_grid.is_empty() {
            return Err(HarnessError::BadConfig("lambda grid must be non-empty".into()));
        }
        if self.snr_train_db.is_nan() || self.snr_grid.iter().any(|s| s.is_nan()) {
            return Err(HarnessError::BadConfig("SNR values must not be NaN".into()));
        }
        if self.bandwidth_grid.iter().any(|&b| b == 0) {
            return Err(HarnessError::BadConfig("bandwidths must be positive".into()));
        }
        if self.feature_dim == 0
            || self.latent_dim == 0
            || self.components == 0
            || self.batch_size == 0
            || self.fading_trials == 0
        {
            return Err(HarnessError::BadConfig(
                "feature_dim, latent_dim, components, batch_size, and trials must be positive"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Every setting in a fixed order; parsing this text reproduces the
    /// config exactly.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k}={v}").expect("string write");
        put("scheme", self.scheme.name().into());
        put(
            "data.source",
            match self.source {
                DataSource::Synthetic => "synthetic".into(),
                DataSource::File => "file".into(),
            },
        );
        put("data.path", self.data_path.display().to_string());
        put("data.num_ids", self.synthetic.num_ids.to_string());
        put("data.samples_per_id", self.synthetic.samples_per_id.to_string());
        put("data.input_dim", self.synthetic.input_dim.to_string());
        put("data.cluster_spread", self.synthetic.cluster_spread.to_string());
        put("data.seed", self.synthetic.seed.to_string());
        put("data.split_seed", self.split_seed.to_string());
        put("model.feature_dim", self.feature_dim.to_string());
        put("model.variant", variant_name(self.variant).into());
        put(
            "model.activation",
            match self.activation {
                Activation::LeakyRelu => "leaky_relu".into(),
                Activation::Prelu => "prelu".into(),
            },
        );
        put("model.latent_dim", self.latent_dim.to_string());
        put("model.components", self.components.to_string());
        put("train.strategy", self.strategy.name().into());
        put("train.snr_db", self.snr_train_db.to_string());
        put("train.batch_size", self.batch_size.to_string());
        put("train.feature_epochs", self.feature_epochs.to_string());
        put("train.ae_epochs", self.ae_epochs.to_string());
        put("train.joint_epochs", self.joint_epochs.to_string());
        put("train.fc_epochs", self.fc_epochs.to_string());
        put("train.digital_epochs", self.digital_epochs.to_string());
        put("channel.mode", mode_name(self.channel_mode).into());
        put("channel.snr_grid", join(&self.snr_grid));
        put("channel.bandwidth_grid", join(&self.bandwidth_grid));
        put("digital.lambda_grid", join(&self.lambda_grid));
        put(
            "eval.metric",
            match self.metric {
                Metric::L2 => "l2".into(),
                Metric::Cosine => "cosine".into(),
            },
        );
        put("eval.seeds", join(&self.seeds));
        put("eval.fading_protocol", self.fading_protocol.name().into());
        put("eval.trials", self.fading_trials.to_string());
        put("out.dir", self.out_dir.display().to_string());
        s
    }

    /// Hash of the full canonical config.
    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical_string().as_bytes())
    }

    /// The fields that determine one trained bandwidth × seed combo —
    /// nothing more (so eval-only changes reuse checkpoints) and nothing
    /// less (so any training-relevant change invalidates them).
    /// `data_digest` stands in for the dataset content.
    pub fn train_fingerprint(&self, data_digest: &str, bandwidth: usize, seed: u64) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k}={v}").expect("string write");
        put("scheme", self.scheme.name().into());
        put("data", data_digest.into());
        put("model.feature_dim", self.feature_dim.to_string());
        put("model.variant", variant_name(self.variant).into());
        put(
            "model.activation",
            match self.activation {
                Activation::LeakyRelu => "leaky_relu".into(),
                Activation::Prelu => "prelu".into(),
            },
        );
        put("model.latent_dim", self.latent_dim.to_string());
        put("model.components", self.components.to_string());
        put("train.strategy", self.strategy.name().into());
        put("train.snr_db", self.snr_train_db.to_string());
        put("train.batch_size", self.batch_size.to_string());
        put("train.feature_epochs", self.feature_epochs.to_string());
        put("train.ae_epochs", self.ae_epochs.to_string());
        put("train.joint_epochs", self.joint_epochs.to_string());
        put("train.fc_epochs", self.fc_epochs.to_string());
        put("train.digital_epochs", self.digital_epochs.to_string());
        put("channel.mode", mode_name(self.channel_mode).into());
        put("digital.lambda_grid", join(&self.lambda_grid));
        put("bandwidth", bandwidth.to_string());
        put("seed", seed.to_string());
        s
    }

    /// Model shape for the autoencoder pipeline at one bandwidth.
    pub fn jscc_spec(&self, bandwidth: usize) -> JsccModelSpec {
        let mut spec = JsccModelSpec::from_variant(self.variant, self.feature_dim, bandwidth);
        spec.activation = self.activation;
        spec
    }

    /// Training recipe for the analog pipelines: desk-scale learning-rate
    /// schedule with the configured epoch budgets (step positions scale
    /// proportionally) and the configured training channel.
    pub fn jscc_plan(&self, seed: u64) -> TrainPlan {
        let mut plan = TrainPlan::desk_default(self.strategy, self.snr_train_db, seed);
        plan.channel = self.train_channel();
        plan.batch_size = self.batch_size;
        plan.feature_phase = scale_phase(plan.feature_phase, self.feature_epochs);
        plan.ae_phase = scale_phase(plan.ae_phase, self.ae_epochs);
        plan.joint_phase = scale_phase(plan.joint_phase, self.joint_epochs);
        plan.fc_phase = scale_phase(plan.fc_phase, self.fc_epochs);
        plan
    }

    /// Schedule for digital compressor training under the configured epoch
    /// budget.
    pub fn digital_schedule(&self) -> PhasePlan {
        scale_phase(desk_schedule(), self.digital_epochs)
    }

    /// Channel used while training analog pipelines: the configured mode at
    /// the configured training SNR.
    pub fn train_channel(&self) -> ChannelConfig {
        self.channel_at(self.snr_train_db)
    }

    /// Channel in the configured mode at an arbitrary SNR.
    pub fn channel_at(&self, snr_db: f64) -> ChannelConfig {
        match self.channel_mode {
            ChannelMode::Awgn => ChannelConfig::awgn(snr_db),
            ChannelMode::SlowFading => ChannelConfig::slow_fading(snr_db),
        }
    }
}

/// Rescale a phase's epoch budget, keeping the learning-rate step at the
/// same relative position.
fn scale_phase(base: PhasePlan, epochs: usize) -> PhasePlan {
    if epochs == base.epochs {
        return base;
    }
    let switch =
        ((base.lr_switch as f64 / base.epochs as f64) * epochs as f64).round() as usize;
    PhasePlan {
        epochs,
        lr0: base.lr0,
        lr1: base.lr1,
        lr_switch: switch.min(epochs),
    }
}

fn bad(message: impl Into<String>) -> HarnessError {
    HarnessError::BadConfig(message.into())
}

fn parse_scheme(v: &str) -> Result<Scheme, HarnessError> {
    match v {
        "jscc_ae" => Ok(Scheme::JsccAe),
        "jscc_fc" => Ok(Scheme::JsccFc),
        "digital" => Ok(Scheme::Digital),
        other => Err(bad(format!("unknown scheme {other:?}"))),
    }
}

fn parse_variant(v: &str) -> Result<JsccVariant, HarnessError> {
    match v {
        "a" | "A" => Ok(JsccVariant::A),
        "b" | "B" => Ok(JsccVariant::B),
        "c" | "C" => Ok(JsccVariant::C),
        "d" | "D" => Ok(JsccVariant::D),
        "e" | "E" => Ok(JsccVariant::E),
        other => Err(bad(format!("unknown model variant {other:?}"))),
    }
}

fn variant_name(v: JsccVariant) -> &'static str {
    match v {
        JsccVariant::A => "a",
        JsccVariant::B => "b",
        JsccVariant::C => "c",
        JsccVariant::D => "d",
        JsccVariant::E => "e",
    }
}

fn mode_name(mode: ChannelMode) -> &'static str {
    match mode {
        ChannelMode::Awgn => "awgn",
        ChannelMode::SlowFading => "slow_fading",
    }
}

/// Integer parser (usize/u64 and friends) with the key in the message.
fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.trim()
        .parse()
        .map_err(|_| bad(format!("invalid value {v:?} for {key}")))
}

/// Real parser accepting `inf`/`-inf` alongside decimals.
fn parse_real(key: &str, v: &str) -> Result<f64, HarnessError> {
    match v.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| bad(format!("invalid value {v:?} for {key}"))),
    }
}

fn parse_list<T>(
    key: &str,
    v: &str,
    item: fn(&str, &str) -> Result<T, HarnessError>,
) -> Result<Vec<T>, HarnessError> {
    let items: Vec<T> = v
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| item(key, t))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(format!("empty list for {key}")));
    }
    Ok(items)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("string write");
    }
    out
}

/// Derive an RNG seed from labeled parts, so unrelated random streams
/// (noise draws per grid point, per-λ training, …) never collide.
pub fn mix_seed(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has at least 8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_string_roundtrips_through_parse() {
        let mut cfg = ExperimentConfig::default();
        cfg.scheme = Scheme::Digital;
        cfg.snr_train_db = f64::INFINITY;
        cfg.snr_grid = vec![-3.5, 0.0, f64::INFINITY];
        cfg.seeds = vec![7];
        cfg.variant = JsccVariant::E;
        cfg.activation = Activation::Prelu;
        cfg.channel_mode = ChannelMode::SlowFading;
        cfg.fading_protocol = FadingProtocol::Csi;
        cfg.data_path = PathBuf::from("feats.txt");
        let reparsed = ExperimentConfig::parse(&cfg.canonical_string()).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn parse_skips_comments_and_reports_line_numbers() {
        let cfg = ExperimentConfig::parse(
            "# comment\n\nscheme=jscc_fc\nchannel.snr_grid=-6, 0 ,6\neval.seeds=4,5\n",
        )
        .unwrap();
        assert_eq!(cfg.scheme, Scheme::JsccFc);
        assert_eq!(cfg.snr_grid, vec![-6.0, 0.0, 6.0]);
        assert_eq!(cfg.seeds, vec![4, 5]);

        match ExperimentConfig::parse("scheme=jscc_fc\nbogus_key=1\n") {
            Err(HarnessError::ParseError { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus_key"), "message was {message:?}");
            }
            other => panic!("expected ParseError, got {other:?}"),
        }
        match ExperimentConfig::parse("scheme jscc_fc\n") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected ParseError, got {other:?}"),
        }
        match ExperimentConfig::parse("train.snr_db=fast\n") {
            Err(HarnessError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn infinity_spellings_parse() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply("train.snr_db", "inf").unwrap();
        assert_eq!(cfg.snr_train_db, f64::INFINITY);
        cfg.apply("train.snr_db", "-inf").unwrap();
        assert_eq!(cfg.snr_train_db, f64::NEG_INFINITY);
    }

    #[test]
    fn train_fingerprint_tracks_training_fields_only() {
        let cfg = ExperimentConfig::default();
        let base = cfg.train_fingerprint("digest", 16, 1);
        // Eval-side changes leave the fingerprint alone.
        let mut eval_only = cfg.clone();
        eval_only.snr_grid = vec![3.0];
        eval_only.metric = Metric::Cosine;
        eval_only.fading_trials = 77;
        eval_only.out_dir = PathBuf::from("elsewhere");
        assert_eq!(eval_only.train_fingerprint("digest", 16, 1), base);
        // Anything that reaches training does not.
        let mut t = cfg.clone();
        t.snr_train_db = 5.0;
        assert_ne!(t.train_fingerprint("digest", 16, 1), base);
        let mut t = cfg.clone();
        t.strategy = Strategy::T3;
        assert_ne!(t.train_fingerprint("digest", 16, 1), base);
        assert_ne!(cfg.train_fingerprint("digest", 8, 1), base);
        assert_ne!(cfg.train_fingerprint("digest", 16, 2), base);
        assert_ne!(cfg.train_fingerprint("other", 16, 1), base);
        // And the full config hash sees everything.
        assert_ne!(eval_only.config_hash(), cfg.config_hash());
    }

    #[test]
    fn epoch_overrides_rescale_learning_rate_steps() {
        let mut cfg = ExperimentConfig::default();
        cfg.ae_epochs = 80; // desk default 40 with the step at 30
        cfg.joint_epochs = 3;
        let plan = cfg.jscc_plan(0);
        assert_eq!(plan.ae_phase.epochs, 80);
        assert_eq!(plan.ae_phase.lr_switch, 60);
        assert_eq!(plan.joint_phase.epochs, 3);
        assert_eq!(plan.joint_phase.lr_switch, 2);
        // Defaults reproduce the desk schedule exactly.
        let default_plan = ExperimentConfig::default().jscc_plan(9);
        assert_eq!(default_plan, TrainPlan::desk_default(Strategy::T123, 0.0, 9));
        assert_eq!(ExperimentConfig::default().digital_schedule(), desk_schedule());
    }

    #[test]
    fn validate_rejects_empty_grids_and_missing_files() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.seeds.clear();
        assert!(matches!(cfg.validate(), Err(HarnessError::BadConfig(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.source = DataSource::File;
        cfg.data_path = PathBuf::from("/nonexistent/features.txt");
        assert!(matches!(cfg.validate(), Err(HarnessError::BadConfig(_))));
    }

    #[test]
    fn mix_seed_separates_labeled_streams() {
        let a = mix_seed(&["eval", "jscc_ae", "16", "1", "0"]);
        let b = mix_seed(&["eval", "jscc_ae", "16", "1", "6"]);
        let c = mix_seed(&["eval", "jscc_ae", "161", "", "0"]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, mix_seed(&["eval", "jscc_ae", "16", "1", "0"]));
    }
}
