//! The digital (separate source/channel coding) scheme: a learned linear
//! reduction to a small latent, scalar quantization, and arithmetic coding
//! driven by the Gaussian-mixture entropy model — evaluated under the
//! idealization that channel codes deliver exactly the Shannon capacity.
//!
//! Training minimizes `cross_entropy + λ_i · bits-per-query` on the
//! noise-relaxed latent, with the rate weight ramped over the schedule. At
//! evaluation time the latent is hard-quantized, entropy-coded to measure
//! the real bit cost, and the quantized latent itself serves as the
//! retrieval feature on both the gallery and query sides.

use ndarray::{Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{sample_gain, ChannelConfig};
use crate::coder::{encode, Bitstream, CoderError, PmfTable, DEFAULT_SUPPORT};
use crate::entropy::{
    entropy_bits_with_grad, init_params, lambda_at_epoch, quantize_infer, quantize_train,
    EntropyError, GmmGrad, GmmParams,
};
use crate::jscc::{JsccError, PhasePlan, TrainData};
use crate::nn::{cross_entropy, Dense, Layer, Mode, Network, NnError, Sgd, SgdConfig};
use crate::retrieval::{rank, top_k_accuracy, mean_average_precision, Gallery, Metric, RetrievalError};

/// Default rate-weight grid swept by the experiment harness.
pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [0.005, 0.01, 0.02, 0.05, 0.1, 0.2];

#[derive(Debug, Error)]
pub enum DigitalError {
    #[error("bad compressor spec: {0}")]
    BadSpec(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("compressor family is empty")]
    EmptyFamily,
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Coder(#[from] CoderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

impl From<JsccError> for DigitalError {
    fn from(e: JsccError) -> Self {
        match e {
            JsccError::EmptyDataset => DigitalError::EmptyDataset,
            other => DigitalError::BadSpec(other.to_string()),
        }
    }
}

/// Architecture and loss weighting of one compressor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalSpec {
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub num_classes: usize,
    /// Mixture components of the entropy model.
    pub components: usize,
    /// Final rate weight λ; the per-epoch weight ramps up to this value.
    pub lambda_max: f64,
}

impl DigitalSpec {
    pub fn validate(&self) -> Result<(), DigitalError> {
        if self.feature_dim == 0 || self.latent_dim == 0 {
            return Err(DigitalError::BadSpec(
                "feature_dim and latent_dim must be positive".into(),
            ));
        }
        if self.latent_dim > self.feature_dim {
            return Err(DigitalError::BadSpec(format!(
                "latent_dim {} exceeds feature_dim {}",
                self.latent_dim, self.feature_dim
            )));
        }
        if self.num_classes < 2 {
            return Err(DigitalError::BadSpec("need at least two classes".into()));
        }
        if self.components == 0 {
            return Err(DigitalError::BadSpec("entropy model needs ≥ 1 component".into()));
        }
        if !(self.lambda_max >= 0.0) {
            return Err(DigitalError::BadSpec(format!(
                "lambda_max {} must be ≥ 0",
                self.lambda_max
            )));
        }
        Ok(())
    }
}

/// Trained digital pipeline: a single affine reduction, the classifier head
/// used only by the training loss, and the entropy model that both prices
/// the latent during training and drives the arithmetic coder afterwards.
#[derive(Debug, Clone)]
pub struct DigitalCompressor {
    pub spec: DigitalSpec,
    pub reducer: Network,
    pub classifier: Network,
    pub gmm: GmmParams,
}

impl DigitalCompressor {
    /// Fresh, untrained compressor with the documented wide mixture
    /// initialization.
    pub fn build<R: Rng + ?Sized>(spec: &DigitalSpec, rng: &mut R) -> Result<Self, DigitalError> {
        spec.validate()?;
        let reducer = Network::new(vec![Layer::Dense(Dense::new(
            spec.feature_dim,
            spec.latent_dim,
            rng,
        ))]);
        let classifier = Network::new(vec![Layer::Dense(Dense::new(
            spec.latent_dim,
            spec.num_classes,
            rng,
        ))]);
        let gmm = init_params(spec.components)?;
        Ok(DigitalCompressor { spec: *spec, reducer, classifier, gmm })
    }

    /// Frequency table over the default symbol support, for coding.
    pub fn pmf_table(&self) -> Result<PmfTable, DigitalError> {
        Ok(PmfTable::from_gmm(&self.gmm, DEFAULT_SUPPORT.0, DEFAULT_SUPPORT.1)?)
    }
}

/// One epoch of the training trace. The minimized scalar is
/// `ce + lambda · rate_bits` (rate in bits per query).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalEpoch {
    /// 1-based epoch index, matching the rate-weight schedule.
    pub epoch: usize,
    pub lambda: f64,
    pub ce: f64,
    pub rate_bits: f64,
}

/// Momentum SGD over the raw mixture parameters (no weight decay — the
/// entropy model is a density, not a regularized predictor).
struct GmmOptimizer {
    velocity: Vec<f64>,
    momentum: f64,
}

impl GmmOptimizer {
    fn new(k: usize, momentum: f64) -> Self {
        GmmOptimizer { velocity: vec![0.0; 3 * k], momentum }
    }

    fn step(&mut self, params: &mut GmmParams, grad: &GmmGrad, scale: f64, lr: f64) {
        let flat_grad = grad
            .weight_logits
            .iter()
            .chain(&grad.means)
            .chain(&grad.scale_logits);
        let mut flat = params.to_flat();
        for ((p, &g), v) in flat.iter_mut().zip(flat_grad).zip(&mut self.velocity) {
            *v = self.momentum * *v + scale * g;
            *p -= lr * *v;
        }
        *params = GmmParams::from_flat(&flat).expect("same length");
    }
}

/// Desk-scale schedule: 30 epochs (the rate ramp needs more than 20), rate
/// drop at 12, batch 16.
pub fn desk_schedule() -> PhasePlan {
    PhasePlan { epochs: 30, lr0: 0.01, lr1: 0.001, lr_switch: 12 }
}

/// Train a fresh compressor. The classifier sees the noise-relaxed latent
/// `z + u`, the rate term prices the same relaxed latent under the mixture
/// model, and both gradients flow back into the reducer. Arithmetic coding
/// never runs during training.
pub fn train_digital(
    spec: &DigitalSpec,
    schedule: &PhasePlan,
    batch_size: usize,
    data: &TrainData,
    seed: u64,
) -> Result<(DigitalCompressor, Vec<DigitalEpoch>), DigitalError> {
    spec.validate()?;
    data.validate()?;
    if data.inputs.ncols() != spec.feature_dim {
        return Err(DigitalError::BadSpec(format!(
            "data dimension {} vs spec feature_dim {}",
            data.inputs.ncols(),
            spec.feature_dim
        )));
    }
    if data.num_classes != spec.num_classes {
        return Err(DigitalError::BadSpec(format!(
            "data classes {} vs spec num_classes {}",
            data.num_classes, spec.num_classes
        )));
    }
    // Surfaces BadSchedule before any work happens.
    lambda_at_epoch(spec.lambda_max, 1, schedule.epochs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut comp = DigitalCompressor::build(spec, &mut rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());

    let sgd_cfg = SgdConfig { lr: schedule.lr0, momentum: 0.9, weight_decay: 5e-4 };
    let mut opt_red = Sgd::new(&comp.reducer, sgd_cfg);
    let mut opt_cls = Sgd::new(&comp.classifier, sgd_cfg);
    let mut opt_gmm = GmmOptimizer::new(spec.components, 0.9);

    let n = data.inputs.nrows();
    let mut trace = Vec::with_capacity(schedule.epochs);
    for epoch in 1..=schedule.epochs {
        let lr = schedule.lr_at(epoch - 1);
        opt_red.set_lr(lr);
        opt_cls.set_lr(lr);
        let lambda = lambda_at_epoch(spec.lambda_max, epoch, schedule.epochs)?;

        let mut ep_ce = 0.0;
        let mut ep_bits = 0.0;
        let mut idx: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut shuffle_rng);
        let batch_list: Vec<Vec<usize>> =
            idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect();
        let batch_count = batch_list.len();
        for idx in batch_list {
            let x = data.inputs.select(Axis(0), &idx);
            let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
            let rows = x.nrows() as f64;

            let z = comp.reducer.forward(&x, Mode::Train)?;
            let flat: Vec<f64> = z.iter().copied().collect();
            let relaxed = quantize_train(&flat, &mut noise_rng);
            let q = Array2::from_shape_vec(z.dim(), relaxed).expect("same size");

            let logits = comp.classifier.forward(&q, Mode::Train)?;
            let (ce, dlogits) = cross_entropy(&logits, &labels)?;
            let mut g_q = comp.classifier.backward(&dlogits)?;

            let (bits, gmm_grad, d_values) =
                entropy_bits_with_grad(&comp.gmm, q.as_slice().expect("contiguous"));
            let rate_scale = lambda / rows;
            for (g, d) in g_q.iter_mut().zip(&d_values) {
                *g += rate_scale * d;
            }
            comp.reducer.backward(&g_q)?;

            opt_cls.step(&mut comp.classifier);
            opt_red.step(&mut comp.reducer);
            opt_gmm.step(&mut comp.gmm, &gmm_grad, rate_scale, lr);

            ep_ce += ce;
            ep_bits += bits / rows;
        }
        trace.push(DigitalEpoch {
            epoch,
            lambda,
            ce: ep_ce / batch_count as f64,
            rate_bits: ep_bits / batch_count as f64,
        });
    }
    Ok((comp, trace))
}

/// Hard-quantized latents for a batch of inputs — the retrieval feature
/// space of the digital scheme (identical on gallery and query sides).
pub fn quantized_latents(
    comp: &DigitalCompressor,
    inputs: &Array2<f64>,
) -> Result<Array2<f64>, DigitalError> {
    let z = comp.reducer.infer(inputs)?;
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let q = quantize_infer(row.as_slice().expect("contiguous"));
        for (dst, src) in row.iter_mut().zip(q) {
            *dst = src;
        }
    }
    Ok(out)
}

/// Quantize one feature vector and entropy-code it.
pub fn compress(
    comp: &DigitalCompressor,
    feature: ArrayView1<f64>,
) -> Result<(Vec<i64>, Bitstream), DigitalError> {
    let table = comp.pmf_table()?;
    compress_with_table(comp, feature, &table)
}

/// [`compress`] with a caller-cached frequency table (the table depends only
/// on the trained mixture, so sweeps reuse it across queries).
pub fn compress_with_table(
    comp: &DigitalCompressor,
    feature: ArrayView1<f64>,
    table: &PmfTable,
) -> Result<(Vec<i64>, Bitstream), DigitalError> {
    let x = feature
        .to_owned()
        .into_shape_with_order((1, feature.len()))
        .expect("row vector");
    let z = comp.reducer.infer(&x)?;
    let symbols: Vec<i64> = quantize_infer(z.as_slice().expect("contiguous"))
        .into_iter()
        .map(|v| v as i64)
        .collect();
    let bits = encode(&symbols, table)?;
    Ok((symbols, bits))
}

// ---------------------------------------------------------------------------
// Capacity arithmetic
// ---------------------------------------------------------------------------

/// Bits deliverable over `bandwidth` complex channel uses at the given SNR
/// under capacity-achieving codes: `B·log2(1 + 10^(snr/10))`.
pub fn capacity_bits(snr_db: f64, bandwidth: usize) -> f64 {
    if snr_db == f64::INFINITY {
        return f64::INFINITY;
    }
    let snr = 10f64.powf(snr_db / 10.0);
    bandwidth as f64 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Capacity with an instantaneous fading power gain: `B·log2(1 + |h|²·snr)`.
pub fn instantaneous_capacity_bits(gain_power: f64, snr_db: f64, bandwidth: usize) -> f64 {
    if snr_db == f64::INFINITY {
        return f64::INFINITY;
    }
    let snr = gain_power * 10f64.powf(snr_db / 10.0);
    bandwidth as f64 * snr.ln_1p() / std::f64::consts::LN_2
}

/// Lowest SNR (dB) at which `bits` fit into `bandwidth` channel uses:
/// `10·log10(2^(bits/B) − 1)`. Zero bits fit at any SNR (−∞).
pub fn min_snr_for_bits(bits: f64, bandwidth: usize) -> f64 {
    if bits == 0.0 {
        return f64::NEG_INFINITY;
    }
    let snr = (bits / bandwidth as f64 * std::f64::consts::LN_2).exp_m1();
    10.0 * snr.log10()
}

/// Closed-form outage probability of a unit-variance Rayleigh fading channel
/// at rate `rate_bits` per block: `P(B·log2(1+|h|²·snr) < rate)`, i.e.
/// `1 − exp(−(2^(rate/B) − 1)/snr_linear)`.
pub fn rayleigh_outage_probability(rate_bits: f64, bandwidth: usize, avg_snr_db: f64) -> f64 {
    if rate_bits <= 0.0 {
        return 0.0;
    }
    if avg_snr_db == f64::INFINITY {
        return 0.0;
    }
    let snr = 10f64.powf(avg_snr_db / 10.0);
    let threshold = (rate_bits / bandwidth as f64 * std::f64::consts::LN_2).exp_m1() / snr;
    -(-threshold).exp_m1()
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// One point of the rate-accuracy frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub lambda: f64,
    /// Mean arithmetic-coded length per query, in bits (including the coder
    /// flush).
    pub mean_bits: f64,
    /// SNR at which capacity equals `mean_bits` — the static-channel
    /// operating point this compressor needs.
    pub snr_db_equivalent: f64,
    pub top1: f64,
    pub top5: f64,
    pub map_score: f64,
}

/// CSV rows for a λ sweep, header included.
pub fn rate_points_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("lambda,mean_bits,snr_db_equivalent,top1,top5,map\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.lambda, p.mean_bits, p.snr_db_equivalent, p.top1, p.top5, p.map_score
        ));
    }
    out
}

/// Evaluate one trained compressor: code every query to measure the real bit
/// cost, and rank quantized query latents against the quantized gallery.
pub fn evaluate_rate_point(
    comp: &DigitalCompressor,
    bandwidth: usize,
    gallery_inputs: &Array2<f64>,
    gallery_labels: &[usize],
    query_inputs: &Array2<f64>,
    query_labels: &[usize],
    metric: Metric,
) -> Result<RatePoint, DigitalError> {
    let table = comp.pmf_table()?;
    let mut total_bits = 0usize;
    for row in query_inputs.rows() {
        let (_, bits) = compress_with_table(comp, row, &table)?;
        total_bits += bits.bit_count();
    }
    let mean_bits = total_bits as f64 / query_inputs.nrows().max(1) as f64;

    let g = Gallery::new(quantized_latents(comp, gallery_inputs)?, gallery_labels.to_vec())?;
    let q = quantized_latents(comp, query_inputs)?;
    let top1 = top_k_accuracy(&g, &q, query_labels, 1, metric, false)?.accuracy();
    let top5 = top_k_accuracy(&g, &q, query_labels, 5, metric, false)?.accuracy();
    let map_score = mean_average_precision(&g, &q, query_labels, metric, false)?.map;
    Ok(RatePoint {
        lambda: comp.spec.lambda_max,
        mean_bits,
        snr_db_equivalent: min_snr_for_bits(mean_bits, bandwidth),
        top1,
        top5,
        map_score,
    })
}

/// Among rate points whose equivalent SNR fits the test SNR, the one with
/// the best top-1 (ties toward the smaller λ). `None` when no member's rate
/// fits — the digital scheme cannot operate at that SNR.
pub fn best_static_point(points: &[RatePoint], snr_test_db: f64) -> Option<&RatePoint> {
    points
        .iter()
        .filter(|p| p.snr_db_equivalent <= snr_test_db)
        .min_by(|a, b| {
            b.top1
                .total_cmp(&a.top1)
                .then(a.lambda.total_cmp(&b.lambda))
        })
}

/// Frozen per-query facts needed by the fading protocols: exact coded length
/// and how the query retrieves when delivered (top-1/top-5 hit and average
/// precision — delivery is lossless, so these do not depend on the channel).
#[derive(Debug, Clone)]
pub struct CompressorEval {
    pub lambda: f64,
    pub per_query_bits: Vec<usize>,
    pub correct_top1: Vec<bool>,
    pub correct_top5: Vec<bool>,
    pub average_precision: Vec<f64>,
}

impl CompressorEval {
    /// Convenience constructor for protocol tests and synthetic scenarios:
    /// top-5 and average precision mirror the top-1 outcome.
    pub fn from_top1(lambda: f64, per_query_bits: Vec<usize>, correct_top1: Vec<bool>) -> Self {
        let correct_top5 = correct_top1.clone();
        let average_precision = correct_top1
            .iter()
            .map(|&c| if c { 1.0 } else { 0.0 })
            .collect();
        CompressorEval {
            lambda,
            per_query_bits,
            correct_top1,
            correct_top5,
            average_precision,
        }
    }
}

/// Precompute [`CompressorEval`] for one compressor over a query set.
/// Queries whose identity is absent from the gallery count as incorrect.
pub fn precompute_eval(
    comp: &DigitalCompressor,
    gallery_inputs: &Array2<f64>,
    gallery_labels: &[usize],
    query_inputs: &Array2<f64>,
    query_labels: &[usize],
    metric: Metric,
) -> Result<CompressorEval, DigitalError> {
    let table = comp.pmf_table()?;
    let g = Gallery::new(quantized_latents(comp, gallery_inputs)?, gallery_labels.to_vec())?;
    let q = quantized_latents(comp, query_inputs)?;
    let mut eval = CompressorEval {
        lambda: comp.spec.lambda_max,
        per_query_bits: Vec::with_capacity(query_inputs.nrows()),
        correct_top1: Vec::with_capacity(query_inputs.nrows()),
        correct_top5: Vec::with_capacity(query_inputs.nrows()),
        average_precision: Vec::with_capacity(query_inputs.nrows()),
    };
    for (i, row) in query_inputs.rows().into_iter().enumerate() {
        let (_, bits) = compress_with_table(comp, row, &table)?;
        eval.per_query_bits.push(bits.bit_count());
        let order = rank(&g, q.row(i), metric, None)?;
        let label = query_labels[i];
        eval.correct_top1.push(gallery_labels[order[0]] == label);
        eval.correct_top5
            .push(order.iter().take(5).any(|&j| gallery_labels[j] == label));
        let mut relevant = 0usize;
        let mut psum = 0.0;
        for (pos, &j) in order.iter().enumerate() {
            if gallery_labels[j] == label {
                relevant += 1;
                psum += relevant as f64 / (pos + 1) as f64;
            }
        }
        eval.average_precision
            .push(if relevant == 0 { 0.0 } else { psum / relevant as f64 });
    }
    Ok(eval)
}

/// Per-metric scores of the transmitter-side channel-knowledge protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiOutcome {
    pub top1: f64,
    pub top5: f64,
    pub map: f64,
}

/// Slow-fading protocol with transmitter-side channel knowledge: per trial,
/// draw a gain, compute the instantaneous capacity, and send with the
/// lowest-λ (highest-rate, most accurate) family member whose coded length
/// for that query fits. A query no member can fit scores zero.
pub fn eval_fading_csi(
    family: &[CompressorEval],
    bandwidth: usize,
    avg_snr_db: f64,
    n_trials: usize,
    seed: u64,
) -> Result<f64, DigitalError> {
    eval_fading_csi_metrics(family, bandwidth, avg_snr_db, n_trials, seed).map(|o| o.top1)
}

/// Same protocol as [`eval_fading_csi`], reporting top-1, top-5, and mean
/// average precision together (failed trials contribute zero to each).
pub fn eval_fading_csi_metrics(
    family: &[CompressorEval],
    bandwidth: usize,
    avg_snr_db: f64,
    n_trials: usize,
    seed: u64,
) -> Result<CsiOutcome, DigitalError> {
    if family.is_empty() {
        return Err(DigitalError::EmptyFamily);
    }
    let mut members: Vec<&CompressorEval> = family.iter().collect();
    members.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let n_queries = members[0].per_query_bits.len();
    if n_queries == 0 || members.iter().any(|m| m.per_query_bits.len() != n_queries) {
        return Err(DigitalError::BadSpec(
            "family members must cover the same non-empty query set".into(),
        ));
    }
    let cfg = ChannelConfig::slow_fading(avg_snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut top1 = 0.0;
    let mut top5 = 0.0;
    let mut map = 0.0;
    for t in 0..n_trials {
        let qi = t % n_queries;
        let h = sample_gain(&cfg, &mut rng);
        let cap = instantaneous_capacity_bits(h.norm_sqr(), avg_snr_db, bandwidth);
        if let Some(m) = members
            .iter()
            .find(|m| m.per_query_bits[qi] as f64 <= cap)
        {
            if m.correct_top1[qi] {
                top1 += 1.0;
            }
            if m.correct_top5[qi] {
                top5 += 1.0;
            }
            map += m.average_precision[qi];
        }
    }
    let n = n_trials.max(1) as f64;
    Ok(CsiOutcome {
        top1: top1 / n,
        top5: top5 / n,
        map: map / n,
    })
}

/// Result of the no-channel-knowledge fading protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageOutcome {
    /// Fraction of trials whose instantaneous capacity covered the query's
    /// coded length.
    pub success_fraction: f64,
    /// Top-1 accuracy over the successful trials only.
    pub accuracy_given_success: f64,
    /// Top-5 accuracy over the successful trials only.
    pub top5_given_success: f64,
    /// Mean average precision over the successful trials only.
    pub map_given_success: f64,
}

impl OutageOutcome {
    /// The reported score: success fraction × accuracy among successes.
    pub fn score(&self) -> f64 {
        self.success_fraction * self.accuracy_given_success
    }
}

/// Slow-fading protocol without channel knowledge: the compressor always
/// sends at its own rate; trials whose instantaneous capacity falls short
/// are outages.
pub fn eval_fading_outage(
    eval: &CompressorEval,
    bandwidth: usize,
    avg_snr_db: f64,
    n_trials: usize,
    seed: u64,
) -> OutageOutcome {
    let n_queries = eval.per_query_bits.len();
    let cfg = ChannelConfig::slow_fading(avg_snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0usize;
    let mut correct = 0usize;
    let mut correct5 = 0usize;
    let mut ap_sum = 0.0;
    for t in 0..n_trials {
        let qi = t % n_queries.max(1);
        let h = sample_gain(&cfg, &mut rng);
        let cap = instantaneous_capacity_bits(h.norm_sqr(), avg_snr_db, bandwidth);
        if n_queries > 0 && eval.per_query_bits[qi] as f64 <= cap {
            successes += 1;
            if eval.correct_top1[qi] {
                correct += 1;
            }
            if eval.correct_top5[qi] {
                correct5 += 1;
            }
            ap_sum += eval.average_precision[qi];
        }
    }
    let success_fraction = successes as f64 / n_trials.max(1) as f64;
    let over = |x: f64| if successes > 0 { x / successes as f64 } else { 0.0 };
    OutageOutcome {
        success_fraction,
        accuracy_given_success: over(correct as f64),
        top5_given_success: over(correct5 as f64),
        map_given_success: over(ap_sum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::entropy_bits;
    use ndarray::Array2;

    fn toy_spec(feature_dim: usize, latent_dim: usize, classes: usize, lambda: f64) -> DigitalSpec {
        DigitalSpec {
            feature_dim,
            latent_dim,
            num_classes: classes,
            components: 4,
            lambda_max: lambda,
        }
    }

    fn toy_data(ids: usize, per_id: usize, dim: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = ids * per_id;
        let mut x = Array2::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for id in 0..ids {
            for s in 0..per_id {
                let row = id * per_id + s;
                x[[row, id % dim]] = 4.0;
                x[[row, (id + 1) % dim]] = -2.0;
                for c in 0..dim {
                    x[[row, c]] += 0.3 * rng.gen_range(-1.0..1.0);
                }
                labels.push(id);
            }
        }
        (x, labels)
    }

    #[test]
    fn capacity_reference_values() {
        assert_eq!(capacity_bits(0.0, 64), 64.0);
        // Frozen high-precision evaluation of 64·log2(1 + 10^1.5).
        assert!((capacity_bits(15.0, 64) - 321.77969109443323).abs() < 1e-9);
        assert_eq!(capacity_bits(f64::INFINITY, 8), f64::INFINITY);
        assert_eq!(instantaneous_capacity_bits(1.0, 0.0, 64), 64.0);
        // Gain power scales the effective SNR.
        assert!(
            (instantaneous_capacity_bits(10f64.powf(1.5), 0.0, 64) - capacity_bits(15.0, 64)).abs()
                < 1e-9
        );
    }

    #[test]
    fn min_snr_inverts_capacity() {
        assert!(min_snr_for_bits(64.0, 64).abs() < 1e-12);
        assert_eq!(min_snr_for_bits(0.0, 16), f64::NEG_INFINITY);
        // Round trip across nine decades.
        let mut x = 1e-3;
        while x < 1e4 {
            for b in [1usize, 16, 64] {
                let snr = min_snr_for_bits(x, b);
                let back = capacity_bits(snr, b);
                assert!(
                    (back - x).abs() <= 1e-9 * x.max(1.0),
                    "bits {x} bandwidth {b}: round trip {back}"
                );
            }
            x *= 10.0;
        }
    }

    #[test]
    fn rayleigh_outage_closed_form() {
        // Rate exactly at the average-SNR capacity → threshold 1 → 1 − 1/e.
        let rate = capacity_bits(0.0, 16);
        let p = rayleigh_outage_probability(rate, 16, 0.0);
        assert!((p - 0.6321205588285577).abs() < 1e-12);
        assert_eq!(rayleigh_outage_probability(0.0, 16, 0.0), 0.0);
        assert_eq!(rayleigh_outage_probability(100.0, 16, f64::INFINITY), 0.0);
        // Monotone in rate.
        assert!(
            rayleigh_outage_probability(32.0, 16, 0.0)
                > rayleigh_outage_probability(8.0, 16, 0.0)
        );
    }

    #[test]
    fn schedule_validation_and_lambda_wiring() {
        let (x, labels) = toy_data(3, 4, 8, 1);
        let data = TrainData { inputs: &x, labels: &labels, num_classes: 3 };
        let spec = toy_spec(8, 3, 3, 0.1);

        let bad = PhasePlan { epochs: 20, lr0: 0.01, lr1: 0.001, lr_switch: 10 };
        assert!(matches!(
            train_digital(&spec, &bad, 8, &data, 0),
            Err(DigitalError::Entropy(EntropyError::BadSchedule(20)))
        ));

        let ok = PhasePlan { epochs: 24, lr0: 0.01, lr1: 0.001, lr_switch: 12 };
        let (_, trace) = train_digital(&spec, &ok, 8, &data, 0).unwrap();
        assert_eq!(trace.len(), 24);
        for e in &trace {
            let expect = lambda_at_epoch(0.1, e.epoch, 24).unwrap();
            assert_eq!(e.lambda, expect, "epoch {}", e.epoch);
            assert!(e.ce.is_finite() && e.rate_bits >= 0.0);
        }
        // Ramp reaches the maximum before the end and stays there.
        assert_eq!(trace.last().unwrap().lambda, 0.1);
        assert!(trace[0].lambda < 0.1);
    }

    #[test]
    fn rate_penalty_shrinks_coded_length() {
        let (x, labels) = toy_data(5, 6, 10, 2);
        let data = TrainData { inputs: &x, labels: &labels, num_classes: 5 };
        let schedule = PhasePlan { epochs: 26, lr0: 0.01, lr1: 0.001, lr_switch: 13 };
        let mut mean_bits = Vec::new();
        for lambda in [0.0, 0.05] {
            let spec = toy_spec(10, 4, 5, lambda);
            let (comp, _) = train_digital(&spec, &schedule, 8, &data, 7).unwrap();
            let table = comp.pmf_table().unwrap();
            let total: usize = x
                .rows()
                .into_iter()
                .map(|r| compress_with_table(&comp, r, &table).unwrap().1.bit_count())
                .sum();
            mean_bits.push(total as f64 / x.nrows() as f64);
        }
        assert!(
            mean_bits[0] > mean_bits[1],
            "unpenalized {} bits vs penalized {} bits",
            mean_bits[0],
            mean_bits[1]
        );
    }

    #[test]
    fn compress_is_lossless_and_near_entropy() {
        let (x, labels) = toy_data(4, 5, 8, 3);
        let data = TrainData { inputs: &x, labels: &labels, num_classes: 4 };
        let spec = toy_spec(8, 4, 4, 0.02);
        let schedule = PhasePlan { epochs: 22, lr0: 0.01, lr1: 0.001, lr_switch: 11 };
        let (comp, _) = train_digital(&spec, &schedule, 8, &data, 5).unwrap();
        let table = comp.pmf_table().unwrap();
        for row in x.rows() {
            let (symbols, bits) = compress_with_table(&comp, row, &table).unwrap();
            let decoded = crate::coder::decode(&bits, &table, symbols.len()).unwrap();
            assert_eq!(decoded, symbols);
            let sym_f: Vec<f64> = symbols.iter().map(|&s| s as f64).collect();
            let h = entropy_bits(&comp.gmm, &sym_f);
            let len = bits.bit_count() as f64;
            assert!(len < h * 1.02 + 34.0, "len {len} vs entropy {h}");
        }
        // Zero vector compresses deterministically.
        let zero = ndarray::Array1::zeros(8);
        let a = compress(&comp, zero.view()).unwrap();
        let b = compress(&comp, zero.view()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bytes(), b.1.to_bytes());
    }

    #[test]
    fn quantized_latents_are_integers_shared_by_both_sides() {
        let (x, labels) = toy_data(3, 4, 8, 4);
        let data = TrainData { inputs: &x, labels: &labels, num_classes: 3 };
        let spec = toy_spec(8, 3, 3, 0.01);
        let schedule = PhasePlan { epochs: 21, lr0: 0.01, lr1: 0.001, lr_switch: 21 };
        let (comp, _) = train_digital(&spec, &schedule, 8, &data, 9).unwrap();
        let lat = quantized_latents(&comp, &x).unwrap();
        assert_eq!(lat.dim(), (12, 3));
        assert!(lat.iter().all(|v| v.fract() == 0.0));
        let point =
            evaluate_rate_point(&comp, 16, &x, &labels, &x, &labels, Metric::L2).unwrap();
        assert!(point.mean_bits > 0.0);
        assert!(point.top1 >= 0.0 && point.top1 <= 1.0);
        assert!(point.snr_db_equivalent.is_finite());
    }

    #[test]
    fn best_static_point_respects_the_capacity_constraint() {
        let mk = |lambda, mean_bits, snr, top1| RatePoint {
            lambda,
            mean_bits,
            snr_db_equivalent: snr,
            top1,
            top5: top1,
            map_score: top1,
        };
        let points = vec![
            mk(0.005, 200.0, 9.0, 0.95),
            mk(0.05, 80.0, 2.0, 0.85),
            mk(0.2, 30.0, -4.0, 0.60),
        ];
        assert_eq!(best_static_point(&points, 10.0).unwrap().lambda, 0.005);
        assert_eq!(best_static_point(&points, 2.5).unwrap().lambda, 0.05);
        assert_eq!(best_static_point(&points, -3.0).unwrap().lambda, 0.2);
        assert!(best_static_point(&points, -10.0).is_none());
    }

    #[test]
    fn outage_protocol_matches_closed_form_and_edge_cases() {
        // Hand-built eval: constant 16-bit queries, all correct.
        let eval = CompressorEval::from_top1(0.1, vec![16; 10], vec![true; 10]);
        let outcome = eval_fading_outage(&eval, 16, 0.0, 10_000, 77);
        let expected_success = 1.0 - rayleigh_outage_probability(16.0, 16, 0.0);
        assert!(
            (outcome.success_fraction - expected_success).abs() < 0.02,
            "empirical {} vs closed form {}",
            outcome.success_fraction,
            expected_success
        );
        assert_eq!(outcome.accuracy_given_success, 1.0);
        assert!((outcome.score() - outcome.success_fraction).abs() < 1e-12);

        // Infinite SNR: every trial succeeds, score = plain accuracy.
        let eval =
            CompressorEval::from_top1(0.1, vec![1000; 4], vec![true, false, true, true]);
        let outcome = eval_fading_outage(&eval, 16, f64::INFINITY, 400, 0);
        assert_eq!(outcome.success_fraction, 1.0);
        assert!((outcome.score() - 0.75).abs() < 1e-12);

        // Hopeless SNR: essentially everything fails.
        let outcome = eval_fading_outage(&eval, 16, -100.0, 1000, 0);
        assert!(outcome.score() < 0.01);
    }

    #[test]
    fn csi_selection_prefers_the_highest_fitting_rate() {
        // Two members: λ=0.01 needs 100 bits (always correct), λ=0.2 needs
        // 10 bits (never correct). With infinite capacity the low-λ member
        // is chosen; at low SNR only the high-λ member fits.
        let family = vec![
            CompressorEval::from_top1(0.2, vec![10; 5], vec![false; 5]),
            CompressorEval::from_top1(0.01, vec![100; 5], vec![true; 5]),
        ];
        let hi = eval_fading_csi(&family, 16, f64::INFINITY, 100, 1).unwrap();
        assert_eq!(hi, 1.0);
        let lo = eval_fading_csi(&family, 16, -6.0, 4000, 1).unwrap();
        assert!(lo < 0.05, "low-SNR CSI score {lo}");
        assert!(matches!(
            eval_fading_csi(&[], 16, 0.0, 10, 0),
            Err(DigitalError::EmptyFamily)
        ));

        // Single member that never fits → exactly zero.
        let lone = vec![CompressorEval::from_top1(0.01, vec![10_000; 3], vec![true; 3])];
        assert_eq!(eval_fading_csi(&lone, 4, 0.0, 500, 3).unwrap(), 0.0);
    }

    #[test]
    fn csi_beats_fixed_rate_outage_on_a_shared_channel() {
        // All members perfectly accurate: per trial, the CSI protocol
        // succeeds whenever any member fits, a superset of any fixed
        // member's successes.
        let family = vec![
            CompressorEval::from_top1(0.005, vec![48; 6], vec![true; 6]),
            CompressorEval::from_top1(0.05, vec![24; 6], vec![true; 6]),
            CompressorEval::from_top1(0.2, vec![8; 6], vec![true; 6]),
        ];
        let csi = eval_fading_csi(&family, 16, 0.0, 6000, 11).unwrap();
        let best_fixed = family
            .iter()
            .map(|m| eval_fading_outage(m, 16, 0.0, 6000, 11).score())
            .fold(0.0, f64::max);
        assert!(
            csi >= best_fixed - 1e-12,
            "csi {csi} vs best fixed {best_fixed}"
        );
    }

    #[test]
    fn spec_validation_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = toy_spec(4, 8, 3, 0.1); // latent > feature
        assert!(matches!(
            DigitalCompressor::build(&bad, &mut rng),
            Err(DigitalError::BadSpec(_))
        ));
        let bad = toy_spec(8, 4, 1, 0.1);
        assert!(matches!(
            DigitalCompressor::build(&bad, &mut rng),
            Err(DigitalError::BadSpec(_))
        ));
        let bad = toy_spec(8, 4, 3, -0.5);
        assert!(matches!(
            DigitalCompressor::build(&bad, &mut rng),
            Err(DigitalError::BadSpec(_))
        ));
    }

    #[test]
    fn rate_csv_is_stable() {
        let points = vec![RatePoint {
            lambda: 0.05,
            mean_bits: 41.25,
            snr_db_equivalent: -1.5,
            top1: 0.875,
            top5: 0.9375,
            map_score: 0.8,
        }];
        assert_eq!(
            rate_points_csv(&points),
            "lambda,mean_bits,snr_db_equivalent,top1,top5,map\n0.05,41.25,-1.5,0.875,0.9375,0.8\n"
        );
    }
}
