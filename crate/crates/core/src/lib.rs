//! Explicit time-frequency evidence for audio-LLM style speech deepfake
//! detection.
//!
//! The crate builds the whole pipeline at desk scale:
//!
//! - [`signal`]: WAV I/O, Hann windows, DFT/FFT and STFT.
//! - [`features`]: constant-Q transform plus mel, STFT, LFCC, MFCC and CQCC
//!   views, dB conversion and normalization.
//! - [`render`]: pseudo-color evidence images, training samples and
//!   JSON-lines manifests.
//! - [`model`]: a small causal multimodal transformer with audio and visual
//!   token frontends, LoRA adapters and attention export.
//! - [`train`]: AdamW with warmup, ACC/F1/AUC metrics and the modality
//!   ablation harness.
//! - [`data`]: ASVspoof-style protocol parsing and a two-domain synthetic
//!   corpus.
//! - [`cli`]: the `evidence-sdd` command line.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

// Negated float comparisons in this crate are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
mod digest;
pub mod error;
pub mod features;
pub mod model;
pub mod render;
pub mod signal;
pub mod train;

pub use digest::sha256_hex;
pub use error::{Error, Result};
