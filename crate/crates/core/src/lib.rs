//! Desk-scale simulation toolkit for image-retrieval features sent over
//! simulated wireless links.
//!
//! The crate covers two transmission schemes for a retrieval-at-the-edge
//! pipeline and the machinery to compare them:
//!
//! * an analog scheme ([`jscc`]): a fully-connected autoencoder maps feature
//!   vectors straight to channel symbols, which cross a simulated AWGN or
//!   slow-fading link ([`channel`]) and are decoded back into feature space;
//! * a digital scheme ([`digital`]): a learned reducer quantizes features
//!   into integer latents whose code length under a trainable Gaussian
//!   mixture ([`entropy`]) is realized by a range coder ([`coder`]), with
//!   channel capacity deciding what rate survives a given SNR.
//!
//! Both schemes are scored by nearest-neighbour retrieval ([`retrieval`]),
//! and [`harness`] drives full experiment grids from flat config files into
//! deterministic CSV results. All randomness is seeded; identical configs
//! reproduce identical bytes.

pub mod channel;
pub mod coder;
pub mod digital;
pub mod entropy;
pub mod harness;
pub mod jscc;
pub mod nn;
pub mod retrieval;
