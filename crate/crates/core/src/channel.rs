//! Simulated wireless link for feature transmission.
//!
//! Real-valued network outputs are packed into complex baseband symbols,
//! normalized to a unit average-power budget, and sent through either an
//! additive white Gaussian noise channel or a slow (block) fading channel
//! in which a single complex gain multiplies the whole vector. All noise is
//! drawn from a counter-based seeded generator so every realization is
//! reproducible.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Power below which an input vector is considered all-zero and cannot be
/// scaled onto the power budget.
pub const ZERO_POWER_EPS: f64 = 1e-30;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("input power {0:.3e} is below {ZERO_POWER_EPS:.0e}; cannot normalize an all-zero vector")]
    ZeroVector(f64),
    #[error("real input length {0} is odd; complex packing consumes values in pairs")]
    OddLength(usize),
}

/// Channel family: pure additive noise, or additive noise behind a random
/// complex gain that stays constant for the whole transmitted vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Awgn,
    SlowFading,
}

/// Operating point of the simulated link.
///
/// `snr_db` may be `f64::INFINITY`, which disables noise entirely. In slow
/// fading mode the quoted SNR is the *average* SNR, so the noise variance
/// scales with the fading gain variance `fading_variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub mode: ChannelMode,
    /// Variance of the complex fading gain `h` (total, both parts). Ignored
    /// in AWGN mode.
    pub fading_variance: f64,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64) -> Self {
        ChannelConfig {
            snr_db,
            mode: ChannelMode::Awgn,
            fading_variance: 1.0,
        }
    }

    pub fn slow_fading(snr_db: f64) -> Self {
        ChannelConfig {
            snr_db,
            mode: ChannelMode::SlowFading,
            fading_variance: 1.0,
        }
    }

    /// Total complex noise variance that realizes the configured SNR under
    /// the unit transmit-power budget.
    pub fn noise_variance(&self) -> f64 {
        match self.mode {
            ChannelMode::Awgn => snr_to_noise_var(self.snr_db),
            ChannelMode::SlowFading => self.fading_variance * snr_to_noise_var(self.snr_db),
        }
    }
}

/// Noise variance for a given SNR in dB under a unit power budget:
/// `10^(-snr_db/10)`. An infinite SNR maps to exactly zero noise.
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// A power-normalized block of complex channel symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInput {
    pub symbols: Vec<Complex64>,
}

impl ChannelInput {
    /// Number of complex channel uses (the bandwidth `B` of the block).
    pub fn bandwidth(&self) -> usize {
        self.symbols.len()
    }

    /// Average complex-symbol power `(1/B) Σ |x_i|²`.
    pub fn average_power(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

/// One pass through the channel: the received symbols, the gain that was
/// applied (exactly `1 + 0i` for AWGN) and the seed the noise was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub output: Vec<Complex64>,
    pub gain: Complex64,
    pub noise_seed: u64,
}

impl ChannelRealization {
    /// Received symbols flattened back to interleaved reals
    /// `(re_0, im_0, re_1, im_1, ...)`.
    pub fn as_reals(&self) -> Vec<f64> {
        unpack_complex(&self.output)
    }
}

/// Pack interleaved reals `(x_0, x_1, ...)` into complex symbols
/// `(x_0 + i·x_1, x_2 + i·x_3, ...)`.
pub fn pack_complex(reals: &[f64]) -> Result<Vec<Complex64>, ChannelError> {
    if reals.len() % 2 != 0 {
        return Err(ChannelError::OddLength(reals.len()));
    }
    Ok(reals
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect())
}

/// Inverse of [`pack_complex`].
pub fn unpack_complex(symbols: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push(s.re);
        out.push(s.im);
    }
    out
}

/// Scale a real vector onto the unit average-power budget and pack it into
/// complex symbols. With `B = len/2` symbols the scale is
/// `sqrt(B / Σ x_j²)`, so the result satisfies `(1/B) Σ |x_i|² = 1` exactly
/// (up to rounding).
pub fn normalize_power(raw: &[f64]) -> Result<ChannelInput, ChannelError> {
    if raw.len() % 2 != 0 {
        return Err(ChannelError::OddLength(raw.len()));
    }
    let sum_sq: f64 = raw.iter().map(|v| v * v).sum();
    if sum_sq < ZERO_POWER_EPS {
        return Err(ChannelError::ZeroVector(sum_sq));
    }
    let bandwidth = raw.len() / 2;
    let scale = (bandwidth as f64 / sum_sq).sqrt();
    let scaled: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    Ok(ChannelInput {
        symbols: pack_complex(&scaled).expect("even length is checked above"),
    })
}

/// Draw one circularly symmetric complex Gaussian with total variance `var`
/// (each real part gets `var/2`).
pub fn sample_complex_gaussian<R: Rng>(var: f64, rng: &mut R) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draw the block gain for one transmitted vector: `1` in AWGN mode, one
/// complex Gaussian with variance `fading_variance` in slow fading mode.
pub fn sample_gain<R: Rng>(config: &ChannelConfig, rng: &mut R) -> Complex64 {
    match config.mode {
        ChannelMode::Awgn => Complex64::new(1.0, 0.0),
        ChannelMode::SlowFading => sample_complex_gaussian(config.fading_variance, rng),
    }
}

/// Apply the channel using an existing generator. Used by training loops that
/// stream many blocks from one seeded generator; [`transmit`] is the
/// one-shot seeded entry point.
pub fn transmit_with<R: Rng>(
    input: &ChannelInput,
    config: &ChannelConfig,
    rng: &mut R,
) -> (Vec<Complex64>, Complex64) {
    let gain = sample_gain(config, rng);
    let noise_var = config.noise_variance();
    let output = input
        .symbols
        .iter()
        .map(|&x| gain * x + sample_complex_gaussian(noise_var, rng))
        .collect();
    (output, gain)
}

/// Send one block through the channel: `y_i = h·x_i + z_i` with one gain `h`
/// for the whole block and i.i.d. complex Gaussian noise `z`. The same
/// `(input, config, seed)` triple always yields the same realization.
pub fn transmit(input: &ChannelInput, config: &ChannelConfig, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (output, gain) = transmit_with(input, config, &mut rng);
    ChannelRealization {
        output,
        gain,
        noise_seed: seed,
    }
}
