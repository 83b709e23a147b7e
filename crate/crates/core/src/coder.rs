//! Range coder for quantized latent symbols.
//!
//! Symbol probabilities come from the entropy model, quantized once per
//! model into a 16-bit integer frequency table over a finite support window;
//! values outside the window ride an escape slot followed by a 16-bit raw
//! two's-complement payload. The coder itself is a classic 32-bit
//! low/high coder with deferred carry bits. Streams round-trip losslessly
//! and serialize with a small bit-count header so they can be stored or
//! compared byte for byte.

use crate::entropy::{gmm_pmf, GmmParams};
use thiserror::Error;

/// All slot frequencies in a table sum to exactly this.
pub const FREQ_TOTAL: u32 = 1 << 16;

/// Widest allowed support window (number of integer symbols).
pub const MAX_SUPPORT_WIDTH: usize = 1 << 15;

/// Support window used by the digital pipeline unless configured otherwise.
pub const DEFAULT_SUPPORT: (i64, i64) = (-64, 63);

const HALF: u64 = 1 << 31;
const QUARTER: u64 = 1 << 30;
const THREE_QUARTERS: u64 = 3 << 30;
const MASK: u64 = (1 << 32) - 1;

#[derive(Debug, Error, PartialEq)]
pub enum CoderError {
    #[error("support [{0}, {1}] spans {2} symbols; the table caps at {MAX_SUPPORT_WIDTH}")]
    SupportTooWide(i64, i64, usize),
    #[error("symbol {0} does not fit the 16-bit escape payload")]
    SymbolOverflow(i64),
    #[error("bitstream ended after {0} bits while more symbols were expected")]
    TruncatedStream(usize),
    #[error("malformed stream container: {0}")]
    Malformed(String),
}

/// Integer frequency table over `[q_min, q_max]` plus one escape slot.
///
/// Built once per trained model from the mixture PMF; frequencies are
/// proportional to the PMF, every slot keeps at least one count (so nothing
/// in the window ever costs more than 16 bits), and the grand total is
/// exactly [`FREQ_TOTAL`].
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    q_min: i64,
    q_max: i64,
    /// Cumulative frequencies, `cum[0] = 0`, `cum[slots] = FREQ_TOTAL`.
    /// The last slot is the escape symbol.
    cum: Vec<u32>,
}

impl PmfTable {
    /// Quantize the mixture PMF over the window into integer frequencies.
    /// The window must be sane (`q_min ≤ -1 < 1 ≤ q_max`) and no wider than
    /// [`MAX_SUPPORT_WIDTH`] symbols.
    pub fn from_gmm(params: &GmmParams, q_min: i64, q_max: i64) -> Result<Self, CoderError> {
        if q_min > q_max {
            return Err(CoderError::SupportTooWide(q_min, q_max, 0));
        }
        let width = (q_max - q_min + 1) as usize;
        if width > MAX_SUPPORT_WIDTH {
            return Err(CoderError::SupportTooWide(q_min, q_max, width));
        }
        debug_assert!(q_min <= -1 && q_max >= 1, "window should cover the unit bins");

        let mut masses: Vec<f64> = (q_min..=q_max).map(|q| gmm_pmf(params, q as f64)).collect();
        let in_support: f64 = masses.iter().sum();
        masses.push((1.0 - in_support).max(0.0)); // escape carries the tail mass
        let total_mass: f64 = masses.iter().sum();

        // Floor-with-minimum keeps equal masses at equal frequencies, so a
        // symmetric model stays symmetric in the code; the rounding surplus
        // or deficit lands on the heaviest slot(s), which can absorb it.
        let slots = width + 1;
        let mut freq: Vec<u32> = masses
            .iter()
            .map(|&m| (((m / total_mass) * FREQ_TOTAL as f64).floor() as u32).max(1))
            .collect();
        let mut assigned: i64 = freq.iter().map(|&f| f as i64).sum();
        let argmax = |freq: &[u32]| {
            let mut best = 0;
            for (i, &f) in freq.iter().enumerate() {
                if f > freq[best] {
                    best = i;
                }
            }
            best
        };
        if assigned < FREQ_TOTAL as i64 {
            let i = argmax(&freq);
            freq[i] += (FREQ_TOTAL as i64 - assigned) as u32;
        } else {
            while assigned > FREQ_TOTAL as i64 {
                let i = argmax(&freq);
                let take = (assigned - FREQ_TOTAL as i64).min(freq[i] as i64 - 1).max(1) as u32;
                freq[i] -= take;
                assigned -= take as i64;
            }
        }

        let mut cum = Vec::with_capacity(slots + 1);
        let mut acc = 0u32;
        cum.push(0);
        for &f in &freq {
            acc += f;
            cum.push(acc);
        }
        debug_assert_eq!(acc, FREQ_TOTAL);
        Ok(PmfTable { q_min, q_max, cum })
    }

    pub fn support(&self) -> (i64, i64) {
        (self.q_min, self.q_max)
    }

    /// Number of slots including the escape slot.
    pub fn slots(&self) -> usize {
        self.cum.len() - 1
    }

    fn escape_slot(&self) -> usize {
        self.slots() - 1
    }

    fn slot_of(&self, q: i64) -> Option<usize> {
        if q < self.q_min || q > self.q_max {
            None
        } else {
            Some((q - self.q_min) as usize)
        }
    }

    /// Frequency count of one slot (escape slot is the last).
    pub fn freq(&self, slot: usize) -> u32 {
        self.cum[slot + 1] - self.cum[slot]
    }

    /// Entropy of the quantized table distribution in bits per symbol — the
    /// code-length target an ideal coder for this table would meet.
    pub fn entropy_bits_per_symbol(&self) -> f64 {
        (0..self.slots())
            .map(|s| {
                let p = self.freq(s) as f64 / FREQ_TOTAL as f64;
                -p * p.log2()
            })
            .sum()
    }
}

/// A bit-packed code stream. Bits are stored most-significant-first within
/// each byte; the on-disk form carries a 4-byte little-endian bit count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_count: usize,
}

impl Bitstream {
    pub fn bit_count(&self) -> usize {
        self.bit_count
    }

    fn push(&mut self, bit: bool) {
        let byte = self.bit_count / 8;
        if byte == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte] |= 0x80 >> (self.bit_count % 8);
        }
        self.bit_count += 1;
    }

    fn get(&self, idx: usize) -> Option<bool> {
        if idx >= self.bit_count {
            return None;
        }
        Some(self.bytes[idx / 8] & (0x80 >> (idx % 8)) != 0)
    }

    /// Serialize: 4-byte little-endian bit count, then the packed payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.bytes.len());
        out.extend_from_slice(&(self.bit_count as u32).to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Inverse of [`Bitstream::to_bytes`]; the payload length must match the
    /// declared bit count exactly.
    pub fn from_bytes(data: &[u8]) -> Result<Self, CoderError> {
        if data.len() < 4 {
            return Err(CoderError::Malformed(format!(
                "container holds {} bytes, header needs 4",
                data.len()
            )));
        }
        let bit_count = u32::from_le_bytes([data[0], data[1], data[2], data[3]]) as usize;
        let payload = &data[4..];
        let needed = bit_count.div_ceil(8);
        if payload.len() < needed {
            return Err(CoderError::TruncatedStream(payload.len() * 8));
        }
        if payload.len() > needed {
            return Err(CoderError::Malformed(format!(
                "{} payload bytes but {} bits declared",
                payload.len(),
                bit_count
            )));
        }
        Ok(Bitstream {
            bytes: payload.to_vec(),
            bit_count,
        })
    }
}

struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    /// Total renormalization shifts; the decoder consumes exactly one bit
    /// per shift on top of its 32 priming bits.
    shifts: usize,
    out: Bitstream,
}

impl Encoder {
    fn new() -> Self {
        Encoder {
            low: 0,
            high: MASK,
            pending: 0,
            shifts: 0,
            out: Bitstream::default(),
        }
    }

    fn put(&mut self, bit: bool) {
        self.out.push(bit);
        while self.pending > 0 {
            self.out.push(!bit);
            self.pending -= 1;
        }
    }

    /// Narrow the interval to the cumulative range `[c_lo, c_hi)` out of
    /// [`FREQ_TOTAL`], then renormalize.
    fn interval(&mut self, c_lo: u32, c_hi: u32) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * c_hi as u64 / FREQ_TOTAL as u64 - 1;
        self.low += range * c_lo as u64 / FREQ_TOTAL as u64;
        loop {
            if self.high < HALF {
                self.put(false);
            } else if self.low >= HALF {
                self.put(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.shifts += 1;
        }
    }

    /// Resolve the final interval, then zero-pad so the stream always covers
    /// the decoder's needs: 32 priming bits plus one bit per shift. The flush
    /// therefore adds at least 32 bits beyond the data, and exactly 32 for an
    /// empty sequence.
    fn finish(mut self) -> Bitstream {
        self.pending += 1;
        self.put(self.low >= QUARTER);
        while self.out.bit_count < self.shifts + 32 {
            self.out.push(false);
        }
        self.out
    }
}

struct Decoder<'a> {
    low: u64,
    high: u64,
    code: u64,
    stream: &'a Bitstream,
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(stream: &'a Bitstream) -> Result<Self, CoderError> {
        let mut d = Decoder {
            low: 0,
            high: MASK,
            code: 0,
            stream,
            pos: 0,
        };
        for _ in 0..32 {
            let bit = d.next_bit()?;
            d.code = (d.code << 1) | bit as u64;
        }
        Ok(d)
    }

    fn next_bit(&mut self) -> Result<bool, CoderError> {
        let bit = self
            .stream
            .get(self.pos)
            .ok_or(CoderError::TruncatedStream(self.stream.bit_count))?;
        self.pos += 1;
        Ok(bit)
    }

    /// Scaled position of the code point inside the current interval,
    /// in `[0, FREQ_TOTAL)`.
    fn value(&self) -> u32 {
        let range = self.high - self.low + 1;
        (((self.code - self.low + 1) * FREQ_TOTAL as u64 - 1) / range) as u32
    }

    fn interval(&mut self, c_lo: u32, c_hi: u32) -> Result<(), CoderError> {
        let range = self.high - self.low + 1;
        self.high = self.low + range * c_hi as u64 / FREQ_TOTAL as u64 - 1;
        self.low += range * c_lo as u64 / FREQ_TOTAL as u64;
        loop {
            if self.high < HALF {
                // nothing to subtract
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.code -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.code -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            let bit = self.next_bit()?;
            self.code = (self.code << 1) | bit as u64;
        }
        Ok(())
    }
}

/// Encode a symbol sequence against a table. Out-of-window symbols cost the
/// escape slot plus 16 raw bits and must fit in an `i16`.
pub fn encode(symbols: &[i64], table: &PmfTable) -> Result<Bitstream, CoderError> {
    let mut enc = Encoder::new();
    for &q in symbols {
        match table.slot_of(q) {
            Some(slot) => enc.interval(table.cum[slot], table.cum[slot + 1]),
            None => {
                if q < i16::MIN as i64 || q > i16::MAX as i64 {
                    return Err(CoderError::SymbolOverflow(q));
                }
                let esc = table.escape_slot();
                enc.interval(table.cum[esc], table.cum[esc + 1]);
                let raw = (q as i16) as u16;
                for b in (0..16).rev() {
                    let bit = raw & (1 << b) != 0;
                    let mid = FREQ_TOTAL / 2;
                    if bit {
                        enc.interval(mid, FREQ_TOTAL);
                    } else {
                        enc.interval(0, mid);
                    }
                }
            }
        }
    }
    Ok(enc.finish())
}

/// Decode exactly `n` symbols. Asking for fewer symbols than were encoded
/// yields the prefix; asking for more fails with
/// [`CoderError::TruncatedStream`] once the bits run out.
pub fn decode(stream: &Bitstream, table: &PmfTable, n: usize) -> Result<Vec<i64>, CoderError> {
    let mut dec = Decoder::new(stream)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v = dec.value();
        let slot = self_partition(&table.cum, v) - 1;
        dec.interval(table.cum[slot], table.cum[slot + 1])?;
        if slot == table.escape_slot() {
            let mut raw: u16 = 0;
            for _ in 0..16 {
                let mid = FREQ_TOTAL / 2;
                let bit = dec.value() >= mid;
                raw = (raw << 1) | bit as u16;
                if bit {
                    dec.interval(mid, FREQ_TOTAL)?;
                } else {
                    dec.interval(0, mid)?;
                }
            }
            out.push((raw as i16) as i64);
        } else {
            out.push(table.q_min + slot as i64);
        }
    }
    Ok(out)
}

/// Number of cumulative entries `≤ v` (the cum vector is strictly
/// increasing because every slot holds at least one count).
fn self_partition(cum: &[u32], v: u32) -> usize {
    cum.partition_point(|&c| c <= v)
}
