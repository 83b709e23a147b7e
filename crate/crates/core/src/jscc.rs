//! Analog transmission of feature vectors: the autoencoder pipeline (a
//! learned channel encoder/decoder pair wrapped around the noisy channel)
//! and the single-layer pipeline (encoder only, retrieval directly on the
//! noisy symbols).
//!
//! Both map a `feature_dim` vector to `2B` reals, power-normalize them into
//! `B` complex channel symbols, and transmit through [`crate::channel`]. The
//! receiver never observes the fading gain; whatever arrives is what the
//! decoder (or the retrieval metric) works with.
//!
//! Training happens in up to three phases — feature-extractor pretraining on
//! clean data, channel-autoencoder pretraining on frozen features, and joint
//! fine-tuning through the channel — selected by [`Strategy`]. Gradients
//! flow through the power normalization and the channel's linear gain
//! analytically, so every phase is plain end-to-end SGD.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{
    normalize_power, sample_complex_gaussian, sample_gain, transmit_with, ChannelConfig,
    ChannelError,
};
use crate::nn::{
    cross_entropy, l1_loss, BatchNorm, Dense, Layer, LeakyRelu, Mode, Network, NnError, Prelu,
    Sgd, SgdConfig,
};

#[derive(Debug, Error)]
pub enum JsccError {
    #[error("bad model spec: {0}")]
    BadSpec(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Nonlinearity used between hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Prelu,
}

/// Named encoder/decoder depth combinations. All use the leaky rectifier by
/// default; the activation can be overridden independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsccVariant {
    A,
    B,
    C,
    D,
    E,
}

impl JsccVariant {
    /// `(encoder_layers, decoder_layers)`.
    pub fn layer_counts(self) -> (usize, usize) {
        match self {
            JsccVariant::A => (3, 3),
            JsccVariant::B => (3, 2),
            JsccVariant::C => (3, 4),
            JsccVariant::D => (2, 3),
            JsccVariant::E => (4, 3),
        }
    }
}

/// Shape of the channel autoencoder.
///
/// The encoder's first layer maps `feature_dim → 2B` and every further
/// encoder layer keeps the width at `2B`; the decoder mirrors this with its
/// last layer mapping `2B → feature_dim`. Hidden layers carry batch norm and
/// an activation; the final layer of each half is a bare affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JsccModelSpec {
    pub feature_dim: usize,
    /// Channel bandwidth `B` in complex symbols (the encoder emits `2B`
    /// reals).
    pub bandwidth: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub activation: Activation,
}

impl JsccModelSpec {
    pub fn from_variant(variant: JsccVariant, feature_dim: usize, bandwidth: usize) -> Self {
        let (encoder_layers, decoder_layers) = variant.layer_counts();
        JsccModelSpec {
            feature_dim,
            bandwidth,
            encoder_layers,
            decoder_layers,
            activation: Activation::LeakyRelu,
        }
    }

    pub fn validate(&self) -> Result<(), JsccError> {
        if self.feature_dim == 0 || self.bandwidth == 0 {
            return Err(JsccError::BadSpec(format!(
                "feature_dim {} and bandwidth {} must be positive",
                self.feature_dim, self.bandwidth
            )));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err(JsccError::BadSpec(
                "encoder and decoder need at least one layer each".into(),
            ));
        }
        Ok(())
    }

    fn activation_layer(&self) -> Layer {
        match self.activation {
            Activation::LeakyRelu => Layer::LeakyRelu(LeakyRelu::new()),
            Activation::Prelu => Layer::Prelu(Prelu::new(0.25)),
        }
    }

    /// Build the encoder/decoder pair with fresh random parameters.
    pub fn build_autoencoder<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(Network, Network), JsccError> {
        self.validate()?;
        let wide = 2 * self.bandwidth;
        let mut enc = Vec::new();
        for i in 0..self.encoder_layers {
            let in_dim = if i == 0 { self.feature_dim } else { wide };
            enc.push(Layer::Dense(Dense::new(in_dim, wide, rng)));
            if i + 1 < self.encoder_layers {
                enc.push(Layer::BatchNorm(BatchNorm::new(wide)));
                enc.push(self.activation_layer());
            }
        }
        let mut dec = Vec::new();
        for i in 0..self.decoder_layers {
            let out_dim = if i + 1 == self.decoder_layers {
                self.feature_dim
            } else {
                wide
            };
            dec.push(Layer::Dense(Dense::new(wide, out_dim, rng)));
            if i + 1 < self.decoder_layers {
                dec.push(Layer::BatchNorm(BatchNorm::new(wide)));
                dec.push(self.activation_layer());
            }
        }
        Ok((Network::new(enc), Network::new(dec)))
    }
}

/// Single-layer transmitter: one affine map `feature_dim → 2B`, no decoder.
pub fn build_fc_encoder<R: Rng + ?Sized>(
    feature_dim: usize,
    bandwidth: usize,
    rng: &mut R,
) -> Result<Network, JsccError> {
    if feature_dim == 0 || bandwidth == 0 {
        return Err(JsccError::BadSpec(format!(
            "feature_dim {feature_dim} and bandwidth {bandwidth} must be positive"
        )));
    }
    Ok(Network::new(vec![Layer::Dense(Dense::new(
        feature_dim,
        2 * bandwidth,
        rng,
    ))]))
}

/// Feature extractor stand-in: a two-layer perceptron `input_dim →
/// feature_dim` with a hidden batch-norm + leaky rectifier and a bare final
/// affine layer.
pub fn build_feature_encoder<R: Rng + ?Sized>(
    input_dim: usize,
    feature_dim: usize,
    rng: &mut R,
) -> Result<Network, JsccError> {
    if input_dim == 0 || feature_dim == 0 {
        return Err(JsccError::BadSpec(format!(
            "input_dim {input_dim} and feature_dim {feature_dim} must be positive"
        )));
    }
    Ok(Network::new(vec![
        Layer::Dense(Dense::new(input_dim, feature_dim, rng)),
        Layer::BatchNorm(BatchNorm::new(feature_dim)),
        Layer::LeakyRelu(LeakyRelu::new()),
        Layer::Dense(Dense::new(feature_dim, feature_dim, rng)),
    ]))
}

/// Identity classifier head: one affine map to per-class logits.
pub fn build_classifier<R: Rng + ?Sized>(
    in_dim: usize,
    classes: usize,
    rng: &mut R,
) -> Result<Network, JsccError> {
    if in_dim == 0 || classes < 2 {
        return Err(JsccError::BadSpec(format!(
            "classifier needs in_dim ≥ 1 and ≥ 2 classes, got {in_dim}/{classes}"
        )));
    }
    Ok(Network::new(vec![Layer::Dense(Dense::new(
        in_dim, classes, rng,
    ))]))
}

/// Which training phases run. The digits name the executed phases: feature
/// pretraining (1), autoencoder pretraining on frozen features (2), joint
/// fine-tuning through the channel (3). `T13L1` is `T13` with an added
/// reconstruction term during the joint phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    T3,
    T13,
    T13L1,
    T123,
}

impl Strategy {
    pub fn pretrains_features(self) -> bool {
        !matches!(self, Strategy::T3)
    }

    pub fn pretrains_autoencoder(self) -> bool {
        matches!(self, Strategy::T123)
    }

    pub fn joint_uses_l1(self) -> bool {
        matches!(self, Strategy::T13L1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::T3 => "t3",
            Strategy::T13 => "t13",
            Strategy::T13L1 => "t13_l1",
            Strategy::T123 => "t123",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "t3" | "T3" => Ok(Strategy::T3),
            "t13" | "T13" => Ok(Strategy::T13),
            "t13_l1" | "T13_L1" | "t13l1" => Ok(Strategy::T13L1),
            "t123" | "T123" => Ok(Strategy::T123),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

/// Epoch budget and step-schedule of one training phase: learning rate `lr0`
/// until `lr_switch` epochs have elapsed, then `lr1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePlan {
    pub epochs: usize,
    pub lr0: f64,
    pub lr1: f64,
    pub lr_switch: usize,
}

impl PhasePlan {
    pub fn constant(epochs: usize, lr: f64) -> Self {
        PhasePlan { epochs, lr0: lr, lr1: lr, lr_switch: epochs }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch < self.lr_switch {
            self.lr0
        } else {
            self.lr1
        }
    }
}

/// Full training recipe: strategy, channel operating point used during
/// training, per-phase schedules, and the optimizer constants shared by all
/// phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPlan {
    pub strategy: Strategy,
    pub channel: ChannelConfig,
    pub feature_phase: PhasePlan,
    pub ae_phase: PhasePlan,
    pub joint_phase: PhasePlan,
    /// Schedule for the single-layer pipeline's end-to-end training.
    pub fc_phase: PhasePlan,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainPlan {
    /// Desk-scale schedule: full-size learning rates, epoch counts shrunk to
    /// keep a complete run in the seconds range.
    pub fn desk_default(strategy: Strategy, snr_train_db: f64, seed: u64) -> Self {
        TrainPlan {
            strategy,
            channel: ChannelConfig::awgn(snr_train_db),
            feature_phase: PhasePlan::constant(10, 0.01),
            ae_phase: PhasePlan { epochs: 40, lr0: 0.1, lr1: 0.01, lr_switch: 30 },
            joint_phase: PhasePlan { epochs: 15, lr0: 1e-3, lr1: 1e-4, lr_switch: 10 },
            fc_phase: PhasePlan { epochs: 15, lr0: 0.01, lr1: 0.001, lr_switch: 9 },
            batch_size: 16,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed,
        }
    }

    /// Full-size schedule (feature pretrain 30 epochs; autoencoder 200
    /// epochs with the drop at 150; joint 30+10; single-layer 50 with the
    /// drop at 30).
    pub fn full_default(strategy: Strategy, snr_train_db: f64, seed: u64) -> Self {
        TrainPlan {
            strategy,
            channel: ChannelConfig::awgn(snr_train_db),
            feature_phase: PhasePlan::constant(30, 0.01),
            ae_phase: PhasePlan { epochs: 200, lr0: 0.1, lr1: 0.01, lr_switch: 150 },
            joint_phase: PhasePlan { epochs: 40, lr0: 1e-3, lr1: 1e-4, lr_switch: 30 },
            fc_phase: PhasePlan { epochs: 50, lr0: 0.01, lr1: 0.001, lr_switch: 30 },
            batch_size: 16,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed,
        }
    }

    fn sgd_config(&self, lr: f64) -> SgdConfig {
        SgdConfig { lr, momentum: self.momentum, weight_decay: self.weight_decay }
    }
}

/// Borrowed training set: one input row per sample plus identity labels in
/// `0..num_classes`.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub inputs: &'a Array2<f64>,
    pub labels: &'a [usize],
    pub num_classes: usize,
}

impl<'a> TrainData<'a> {
    pub fn validate(&self) -> Result<(), JsccError> {
        if self.inputs.nrows() == 0 {
            return Err(JsccError::EmptyDataset);
        }
        if self.inputs.nrows() != self.labels.len() {
            return Err(JsccError::BadSpec(format!(
                "{} input rows vs {} labels",
                self.inputs.nrows(),
                self.labels.len()
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(JsccError::BadSpec(format!(
                "label {l} outside 0..{}",
                self.num_classes
            )));
        }
        let first = self.labels[0];
        if self.labels.iter().all(|&l| l == first) {
            return Err(JsccError::BadSpec(
                "training needs at least two distinct identities".into(),
            ));
        }
        Ok(())
    }
}

/// The trained autoencoder pipeline: feature extractor, channel
/// encoder/decoder, and the classifier head used during training.
#[derive(Debug, Clone)]
pub struct JsccModels {
    pub spec: JsccModelSpec,
    pub feature_encoder: Network,
    pub encoder: Network,
    pub decoder: Network,
    pub classifier: Network,
}

/// The trained single-layer pipeline.
#[derive(Debug, Clone)]
pub struct FcModels {
    pub feature_dim: usize,
    pub bandwidth: usize,
    pub feature_encoder: Network,
    pub encoder: Network,
    pub classifier: Network,
}

/// Which phase an epoch-loss entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    FeaturePretrain,
    AePretrain,
    Joint,
}

/// One epoch of the loss trace (mean loss over the epoch's batches).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub phase: Phase,
    pub epoch: usize,
    pub loss: f64,
}

// ---------------------------------------------------------------------------
// Differentiable channel pass (training-time, batched)
// ---------------------------------------------------------------------------

/// Per-row caches of the power normalization `n = √(B/Σc²)·c`.
struct NormCache {
    normed: Array2<f64>,
    scale: Vec<f64>,
    sumsq: Vec<f64>,
}

fn normalize_rows(raw: &Array2<f64>) -> Result<NormCache, ChannelError> {
    let b = raw.ncols() / 2;
    let mut normed = raw.clone();
    let mut scale = Vec::with_capacity(raw.nrows());
    let mut sumsq = Vec::with_capacity(raw.nrows());
    for mut row in normed.rows_mut() {
        let p: f64 = row.iter().map(|v| v * v).sum();
        if p < crate::channel::ZERO_POWER_EPS {
            return Err(ChannelError::ZeroVector(p));
        }
        let s = (b as f64 / p).sqrt();
        row.mapv_inplace(|v| v * s);
        scale.push(s);
        sumsq.push(p);
    }
    Ok(NormCache { normed, scale, sumsq })
}

/// Gradient of the per-row normalization: `dL/dc = s·(g − c·(g·c)/Σc²)`.
fn normalize_rows_backward(raw: &Array2<f64>, cache: &NormCache, g: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(raw.dim());
    for (r, (raw_row, g_row)) in raw.rows().into_iter().zip(g.rows()).enumerate() {
        let dot: f64 = raw_row.iter().zip(g_row.iter()).map(|(c, gv)| c * gv).sum();
        let coef = dot / cache.sumsq[r];
        for (o, (&c, &gv)) in out
            .row_mut(r)
            .iter_mut()
            .zip(raw_row.iter().zip(g_row.iter()))
        {
            *o = cache.scale[r] * (gv - c * coef);
        }
    }
    out
}

/// A frozen sample of the channel randomness for one batch: one gain per row
/// and one complex noise term per symbol, stored as interleaved reals.
struct ChannelDraw {
    gains: Vec<Complex64>,
    noise: Array2<f64>,
}

impl ChannelDraw {
    fn sample<R: Rng>(rows: usize, bandwidth: usize, cfg: &ChannelConfig, rng: &mut R) -> Self {
        let var = cfg.noise_variance();
        let mut gains = Vec::with_capacity(rows);
        let mut noise = Array2::zeros((rows, 2 * bandwidth));
        for r in 0..rows {
            gains.push(sample_gain(cfg, rng));
            for j in 0..bandwidth {
                let z = sample_complex_gaussian(var, rng);
                noise[[r, 2 * j]] = z.re;
                noise[[r, 2 * j + 1]] = z.im;
            }
        }
        ChannelDraw { gains, noise }
    }

    /// `y = h·x + z` on interleaved reals.
    fn apply(&self, normed: &Array2<f64>) -> Array2<f64> {
        let mut out = self.noise.clone();
        for (r, row) in normed.rows().into_iter().enumerate() {
            let (p, q) = (self.gains[r].re, self.gains[r].im);
            for j in 0..row.len() / 2 {
                let (a, b) = (row[2 * j], row[2 * j + 1]);
                out[[r, 2 * j]] += p * a - q * b;
                out[[r, 2 * j + 1]] += q * a + p * b;
            }
        }
        out
    }

    /// Transpose of the per-row rotation/scaling `h·(·)`; noise is additive
    /// so it vanishes from the gradient.
    fn backward(&self, g: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(g.dim());
        for (r, row) in g.rows().into_iter().enumerate() {
            let (p, q) = (self.gains[r].re, self.gains[r].im);
            for j in 0..row.len() / 2 {
                let (gu, gv) = (row[2 * j], row[2 * j + 1]);
                out[[r, 2 * j]] = p * gu + q * gv;
                out[[r, 2 * j + 1]] = -q * gu + p * gv;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Inference-time transmission
// ---------------------------------------------------------------------------

/// Send already-extracted features through the trained pipeline in eval
/// mode: encode, power-normalize, transmit, and either decode (autoencoder)
/// or hand back the noisy `2B` reals (single-layer pipeline).
///
/// Every block is checked against the unit average-power budget before it
/// enters the channel. The same seed reproduces the same noise.
pub fn jscc_transmit(
    features: &Array2<f64>,
    encoder: &Network,
    decoder: Option<&Network>,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<Array2<f64>, JsccError> {
    let raw = encoder.infer(features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut received = Array2::zeros(raw.dim());
    for (r, row) in raw.rows().into_iter().enumerate() {
        let row: Vec<f64> = row.to_vec();
        let input = normalize_power(&row)?;
        let power = input.average_power();
        assert!(
            (power - 1.0).abs() < 1e-9,
            "power constraint violated: average power {power}"
        );
        let (output, _gain) = transmit_with(&input, cfg, &mut rng);
        for (j, y) in output.iter().enumerate() {
            received[[r, 2 * j]] = y.re;
            received[[r, 2 * j + 1]] = y.im;
        }
    }
    match decoder {
        Some(dec) => Ok(dec.infer(&received)?),
        None => Ok(received),
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

fn batches<R: Rng>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// Train the autoencoder pipeline according to the plan's strategy and
/// return the models plus the per-epoch loss trace (cross-entropy for the
/// classification phases, reconstruction error for the autoencoder phase).
pub fn train(
    plan: &TrainPlan,
    spec: &JsccModelSpec,
    data: &TrainData,
) -> Result<(JsccModels, Vec<EpochLoss>), JsccError> {
    spec.validate()?;
    data.validate()?;
    let input_dim = data.inputs.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut feature_encoder = build_feature_encoder(input_dim, spec.feature_dim, &mut rng)?;
    let (mut encoder, mut decoder) = spec.build_autoencoder(&mut rng)?;
    let mut classifier = build_classifier(spec.feature_dim, data.num_classes, &mut rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut trace = Vec::new();

    if plan.strategy.pretrains_features() {
        let phase = plan.feature_phase;
        let mut opt_fe = Sgd::new(&feature_encoder, plan.sgd_config(phase.lr0));
        let mut opt_cls = Sgd::new(&classifier, plan.sgd_config(phase.lr0));
        for epoch in 0..phase.epochs {
            opt_fe.set_lr(phase.lr_at(epoch));
            opt_cls.set_lr(phase.lr_at(epoch));
            let mut epoch_loss = 0.0;
            let batch_list = batches(data.inputs.nrows(), plan.batch_size, &mut shuffle_rng);
            let batch_count = batch_list.len();
            for idx in batch_list {
                let x = data.inputs.select(Axis(0), &idx);
                let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
                let f = feature_encoder.forward(&x, Mode::Train)?;
                let logits = classifier.forward(&f, Mode::Train)?;
                let (loss, dlogits) = cross_entropy(&logits, &labels)?;
                let df = classifier.backward(&dlogits)?;
                feature_encoder.backward(&df)?;
                opt_cls.step(&mut classifier);
                opt_fe.step(&mut feature_encoder);
                epoch_loss += loss;
            }
            trace.push(EpochLoss {
                phase: Phase::FeaturePretrain,
                epoch,
                loss: epoch_loss / batch_count as f64,
            });
        }
    }

    if plan.strategy.pretrains_autoencoder() {
        // Features are extracted once from the frozen encoder; only the
        // channel noise is resampled per batch.
        let frozen = feature_encoder.infer(data.inputs)?;
        let phase = plan.ae_phase;
        let mut opt_enc = Sgd::new(&encoder, plan.sgd_config(phase.lr0));
        let mut opt_dec = Sgd::new(&decoder, plan.sgd_config(phase.lr0));
        for epoch in 0..phase.epochs {
            opt_enc.set_lr(phase.lr_at(epoch));
            opt_dec.set_lr(phase.lr_at(epoch));
            let mut epoch_loss = 0.0;
            let batch_list = batches(frozen.nrows(), plan.batch_size, &mut shuffle_rng);
            let batch_count = batch_list.len();
            for idx in batch_list {
                let f = frozen.select(Axis(0), &idx);
                let raw = encoder.forward(&f, Mode::Train)?;
                let cache = normalize_rows(&raw)?;
                let draw =
                    ChannelDraw::sample(f.nrows(), spec.bandwidth, &plan.channel, &mut noise_rng);
                let received = draw.apply(&cache.normed);
                let recon = decoder.forward(&received, Mode::Train)?;
                let (loss, drecon) = l1_loss(&recon, &f)?;
                let g_received = decoder.backward(&drecon)?;
                let g_normed = draw.backward(&g_received);
                let g_raw = normalize_rows_backward(&raw, &cache, &g_normed);
                encoder.backward(&g_raw)?;
                opt_dec.step(&mut decoder);
                opt_enc.step(&mut encoder);
                epoch_loss += loss;
            }
            trace.push(EpochLoss {
                phase: Phase::AePretrain,
                epoch,
                loss: epoch_loss / batch_count as f64,
            });
        }
    }

    {
        let phase = plan.joint_phase;
        let cfg = plan.sgd_config(phase.lr0);
        let mut opt_fe = Sgd::new(&feature_encoder, cfg);
        let mut opt_enc = Sgd::new(&encoder, cfg);
        let mut opt_dec = Sgd::new(&decoder, cfg);
        let mut opt_cls = Sgd::new(&classifier, cfg);
        for epoch in 0..phase.epochs {
            let lr = phase.lr_at(epoch);
            for opt in [&mut opt_fe, &mut opt_enc, &mut opt_dec, &mut opt_cls] {
                opt.set_lr(lr);
            }
            let mut epoch_loss = 0.0;
            let batch_list = batches(data.inputs.nrows(), plan.batch_size, &mut shuffle_rng);
            let batch_count = batch_list.len();
            for idx in batch_list {
                let x = data.inputs.select(Axis(0), &idx);
                let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
                let f = feature_encoder.forward(&x, Mode::Train)?;
                let raw = encoder.forward(&f, Mode::Train)?;
                let cache = normalize_rows(&raw)?;
                let draw =
                    ChannelDraw::sample(x.nrows(), spec.bandwidth, &plan.channel, &mut noise_rng);
                let received = draw.apply(&cache.normed);
                let recon = decoder.forward(&received, Mode::Train)?;
                let logits = classifier.forward(&recon, Mode::Train)?;
                let (ce, dlogits) = cross_entropy(&logits, &labels)?;
                let mut g_recon = classifier.backward(&dlogits)?;
                let mut loss = ce;
                if plan.strategy.joint_uses_l1() {
                    // Reconstruction target is the current clean feature,
                    // treated as a constant (no gradient into the feature
                    // encoder through the target side).
                    let (l1, dl1) = l1_loss(&recon, &f)?;
                    loss += l1;
                    g_recon += &dl1;
                }
                let g_received = decoder.backward(&g_recon)?;
                let g_normed = draw.backward(&g_received);
                let g_raw = normalize_rows_backward(&raw, &cache, &g_normed);
                let g_f = encoder.backward(&g_raw)?;
                feature_encoder.backward(&g_f)?;
                opt_cls.step(&mut classifier);
                opt_dec.step(&mut decoder);
                opt_enc.step(&mut encoder);
                opt_fe.step(&mut feature_encoder);
                epoch_loss += loss;
            }
            trace.push(EpochLoss {
                phase: Phase::Joint,
                epoch,
                loss: epoch_loss / batch_count as f64,
            });
        }
    }

    let models = JsccModels {
        spec: *spec,
        feature_encoder,
        encoder,
        decoder,
        classifier,
    };
    Ok((models, trace))
}

/// Train the single-layer pipeline end to end: feature extractor, one-layer
/// channel encoder, and a classifier reading the noisy `2B` reals.
pub fn train_fc(
    plan: &TrainPlan,
    feature_dim: usize,
    bandwidth: usize,
    data: &TrainData,
) -> Result<(FcModels, Vec<EpochLoss>), JsccError> {
    data.validate()?;
    let input_dim = data.inputs.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut feature_encoder = build_feature_encoder(input_dim, feature_dim, &mut rng)?;
    let mut encoder = build_fc_encoder(feature_dim, bandwidth, &mut rng)?;
    let mut classifier = build_classifier(2 * bandwidth, data.num_classes, &mut rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut trace = Vec::new();

    let phase = plan.fc_phase;
    let cfg = plan.sgd_config(phase.lr0);
    let mut opt_fe = Sgd::new(&feature_encoder, cfg);
    let mut opt_enc = Sgd::new(&encoder, cfg);
    let mut opt_cls = Sgd::new(&classifier, cfg);
    for epoch in 0..phase.epochs {
        let lr = phase.lr_at(epoch);
        for opt in [&mut opt_fe, &mut opt_enc, &mut opt_cls] {
            opt.set_lr(lr);
        }
        let mut epoch_loss = 0.0;
        let batch_list = batches(data.inputs.nrows(), plan.batch_size, &mut shuffle_rng);
        let batch_count = batch_list.len();
        for idx in batch_list {
            let x = data.inputs.select(Axis(0), &idx);
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let f = feature_encoder.forward(&x, Mode::Train)?;
            let raw = encoder.forward(&f, Mode::Train)?;
            let cache = normalize_rows(&raw)?;
            let draw = ChannelDraw::sample(x.nrows(), bandwidth, &plan.channel, &mut noise_rng);
            let received = draw.apply(&cache.normed);
            let logits = classifier.forward(&received, Mode::Train)?;
            let (loss, dlogits) = cross_entropy(&logits, &labels)?;
            let g_received = classifier.backward(&dlogits)?;
            let g_normed = draw.backward(&g_received);
            let g_raw = normalize_rows_backward(&raw, &cache, &g_normed);
            let g_f = encoder.backward(&g_raw)?;
            feature_encoder.backward(&g_f)?;
            opt_cls.step(&mut classifier);
            opt_enc.step(&mut encoder);
            opt_fe.step(&mut feature_encoder);
            epoch_loss += loss;
        }
        trace.push(EpochLoss {
            phase: Phase::Joint,
            epoch,
            loss: epoch_loss / batch_count as f64,
        });
    }

    let models = FcModels {
        feature_dim,
        bandwidth,
        feature_encoder,
        encoder,
        classifier,
    };
    Ok((models, trace))
}

// ---------------------------------------------------------------------------
// Evaluation-side feature extraction
// ---------------------------------------------------------------------------

/// Clean (noise-free) feature vectors — the server-side gallery
/// representation for the autoencoder pipeline.
pub fn clean_features(feature_encoder: &Network, inputs: &Array2<f64>) -> Result<Array2<f64>, JsccError> {
    Ok(feature_encoder.infer(inputs)?)
}

/// Query features after a round trip through the channel and decoder.
pub fn ae_received_features(
    models: &JsccModels,
    inputs: &Array2<f64>,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<Array2<f64>, JsccError> {
    let f = clean_features(&models.feature_encoder, inputs)?;
    jscc_transmit(&f, &models.encoder, Some(&models.decoder), cfg, seed)
}

/// Noisy channel symbols used directly as query features by the
/// single-layer pipeline. Pass `snr_db = ∞` to obtain the clean normalized
/// symbols used as its gallery representation.
pub fn fc_received_features(
    models: &FcModels,
    inputs: &Array2<f64>,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<Array2<f64>, JsccError> {
    let f = clean_features(&models.feature_encoder, inputs)?;
    jscc_transmit(&f, &models.encoder, None, cfg, seed)
}
