//! Bit-exact network serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"EJNN"
//! version  u32
//! layers   u32
//! manifest per layer: tag u32, dim0 u32, dim1 u32
//! payload  per layer: f64 values
//! ```
//!
//! Tags: 1 = dense `(out, in)` with weights then bias; 2 = batch norm `(dim)`
//! with momentum, eps, gamma, beta, running mean, running variance; 3 = leaky
//! rectifier (no payload); 4 = learned-slope rectifier (one slope). Floats
//! round-trip through their exact bit patterns, so save/load is lossless.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{BatchNorm, Dense, Layer, LeakyRelu, Network, NnError, Prelu};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"EJNN";
pub const CHECKPOINT_VERSION: u32 = 1;

const TAG_DENSE: u32 = 1;
const TAG_BATCH_NORM: u32 = 2;
const TAG_LEAKY: u32 = 3;
const TAG_PRELU: u32 = 4;

pub fn write_network<W: Write>(net: &Network, out: &mut W) -> Result<(), NnError> {
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(net.layers().len() as u32).to_le_bytes())?;
    for layer in net.layers() {
        let (tag, d0, d1) = match layer {
            Layer::Dense(l) => (TAG_DENSE, l.out_dim() as u32, l.in_dim() as u32),
            Layer::BatchNorm(l) => (TAG_BATCH_NORM, l.dim() as u32, 0),
            Layer::LeakyRelu(_) => (TAG_LEAKY, 0, 0),
            Layer::Prelu(_) => (TAG_PRELU, 0, 0),
        };
        for v in [tag, d0, d1] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for layer in net.layers() {
        match layer {
            Layer::Dense(l) => {
                write_floats(out, l.w.as_slice().expect("contiguous"))?;
                write_floats(out, l.b.as_slice().expect("contiguous"))?;
            }
            Layer::BatchNorm(l) => {
                write_floats(out, &[l.momentum, l.eps])?;
                write_floats(out, l.gamma.as_slice().expect("contiguous"))?;
                write_floats(out, l.beta.as_slice().expect("contiguous"))?;
                write_floats(out, l.running_mean.as_slice().expect("contiguous"))?;
                write_floats(out, l.running_var.as_slice().expect("contiguous"))?;
            }
            Layer::LeakyRelu(_) => {}
            Layer::Prelu(l) => write_floats(out, &[l.slope()])?,
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(input: &mut R) -> Result<Network, NnError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NnError::BadCheckpoint(format!("magic {magic:02x?}")));
    }
    let version = read_u32(input)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(input)? as usize;
    if count > 1 << 16 {
        return Err(NnError::BadCheckpoint(format!("implausible layer count {count}")));
    }
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let tag = read_u32(input)?;
        let d0 = read_u32(input)? as usize;
        let d1 = read_u32(input)? as usize;
        manifest.push((tag, d0, d1));
    }
    let mut layers = Vec::with_capacity(count);
    for (tag, d0, d1) in manifest {
        let layer = match tag {
            TAG_DENSE => {
                let w = read_floats(input, d0 * d1)?;
                let b = read_floats(input, d0)?;
                let w = Array2::from_shape_vec((d0, d1), w)
                    .map_err(|e| NnError::BadCheckpoint(e.to_string()))?;
                Layer::Dense(Dense::from_parts(w, Array1::from(b)))
            }
            TAG_BATCH_NORM => {
                let head = read_floats(input, 2)?;
                let gamma = Array1::from(read_floats(input, d0)?);
                let beta = Array1::from(read_floats(input, d0)?);
                let mean = Array1::from(read_floats(input, d0)?);
                let var = Array1::from(read_floats(input, d0)?);
                Layer::BatchNorm(BatchNorm::from_parts(gamma, beta, mean, var, head[0], head[1]))
            }
            TAG_LEAKY => Layer::LeakyRelu(LeakyRelu::new()),
            TAG_PRELU => {
                let s = read_floats(input, 1)?;
                Layer::Prelu(Prelu::new(s[0]))
            }
            other => return Err(NnError::BadCheckpoint(format!("unknown layer tag {other}"))),
        };
        layers.push(layer);
    }
    Ok(Network::new(layers))
}

fn write_floats<W: Write>(out: &mut W, values: &[f64]) -> Result<(), NnError> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_floats<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>, NnError> {
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, NnError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::super::{gradient_check, l1_loss, Mode};
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_network(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Network::new(vec![
            Layer::Dense(Dense::new(5, 8, &mut rng)),
            Layer::BatchNorm(BatchNorm::new(8)),
            Layer::LeakyRelu(LeakyRelu::new()),
            Layer::Dense(Dense::new(8, 4, &mut rng)),
            Layer::Prelu(Prelu::new(0.25)),
        ]);
        // Give the running statistics non-default values.
        for _ in 0..5 {
            let x = Array2::from_shape_fn((6, 5), |_| rng.gen_range(-1.0..1.0));
            net.forward(&x, Mode::Train).unwrap();
        }
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_network(99);
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();
        let restored = read_network(&mut buf.as_slice()).unwrap();

        let mut a = Vec::new();
        let mut b = Vec::new();
        for l in net.layers() {
            l.visit_params(&mut |_, p| a.extend(p.iter().map(|v| v.to_bits())));
        }
        for l in restored.layers() {
            l.visit_params(&mut |_, p| b.extend(p.iter().map(|v| v.to_bits())));
        }
        assert_eq!(a, b);

        // Running statistics must survive too: eval outputs are identical.
        let x = Array2::from_shape_fn((3, 5), |(i, j)| (i as f64) - 0.3 * j as f64);
        let ya = net.infer(&x).unwrap();
        let yb = restored.infer(&x).unwrap();
        assert_eq!(
            ya.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            yb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );

        // And a restored network is immediately trainable.
        let mut restored = restored;
        let x = Array2::from_shape_fn((4, 5), |(i, j)| 1.0 + i as f64 + j as f64);
        let target = Array2::from_elem((4, 4), 0.7);
        let worst = gradient_check(&mut restored, &x, &|o| l1_loss(o, &target).unwrap(), 1e-4);
        assert!(worst < 1e-3, "post-restore gradient error {worst}");
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let net = sample_network(1);
        let mut buf = Vec::new();
        write_network(&net, &mut buf).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] ^= 0xff;
        assert!(matches!(
            read_network(&mut bad_magic.as_slice()),
            Err(NnError::BadCheckpoint(_))
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 0xee;
        assert!(matches!(
            read_network(&mut bad_version.as_slice()),
            Err(NnError::BadCheckpoint(_))
        ));

        let mut bad_tag = buf.clone();
        bad_tag[12] = 0x7f;
        assert!(matches!(
            read_network(&mut bad_tag.as_slice()),
            Err(NnError::BadCheckpoint(_))
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            read_network(&mut &truncated[..]),
            Err(NnError::Io(_))
        ));
    }
}
