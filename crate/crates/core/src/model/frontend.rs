//! Modality frontends: pooled log-mel audio tokens and patch-embedded
//! visual tokens, both mapped to the model width.

use ndarray::Array2;

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::features::{FilterBank, FilterScale};
use crate::render::EvidenceImage;
use crate::signal::{stft, Waveform, WindowSpec};

/// Absolute dB floor of the audio frontend (power referenced to 1.0).
pub const AUDIO_FLOOR_DB: f64 = -80.0;
const AUDIO_DB_SCALE: f64 = 40.0;

/// Log-mel frames mean-pooled in groups of `token_stride`, one row per
/// audio token (`ceil(n_frames / stride) x n_mels`). Values are dB / 40.
pub fn audio_features(waveform: &Waveform, cfg: &ModelConfig) -> Result<Array2<f64>> {
    let spec = stft(
        waveform,
        WindowSpec::new(cfg.audio_window, cfg.audio_hop)?,
        cfg.audio_n_fft,
    )?;
    let fb = FilterBank::new(FilterScale::Mel, cfg.n_mels, cfg.audio_n_fft, waveform.sample_rate())?;
    let energies = fb.apply(&spec.power())?;
    let frames = energies.ncols();
    let n_tokens = frames.div_ceil(cfg.token_stride);
    let mut out = Array2::zeros((n_tokens, cfg.n_mels));
    for t in 0..n_tokens {
        let lo = t * cfg.token_stride;
        let hi = (lo + cfg.token_stride).min(frames);
        for m in 0..cfg.n_mels {
            let sum: f64 = (lo..hi)
                .map(|f| (10.0 * energies[[m, f]].max(1e-10).log10()).max(AUDIO_FLOOR_DB))
                .sum();
            out[[t, m]] = sum / (hi - lo) as f64 / AUDIO_DB_SCALE;
        }
    }
    Ok(out)
}

/// Non-overlapping `p x p` RGB patches in row-major grid order, flattened
/// row, column, channel and scaled to `[-0.5, 0.5]`.
pub fn image_patches(image: &EvidenceImage, cfg: &ModelConfig) -> Result<Array2<f64>> {
    let p = cfg.patch_size;
    if !image.width.is_multiple_of(p) || !image.height.is_multiple_of(p) {
        return Err(Error::Shape(format!(
            "image {}x{} is not divisible into {p}x{p} patches",
            image.width, image.height
        )));
    }
    if image.width != cfg.image_width || image.height != cfg.image_height {
        return Err(Error::Shape(format!(
            "image is {}x{}, model expects {}x{}",
            image.width, image.height, cfg.image_width, cfg.image_height
        )));
    }
    let (gr, gc) = cfg.grid();
    let mut out = Array2::zeros((gr * gc, cfg.patch_dim()));
    for r in 0..gr {
        for c in 0..gc {
            let mut row = out.row_mut(r * gc + c);
            let mut i = 0;
            for y in r * p..(r + 1) * p {
                let base = (y * image.width + c * p) * 3;
                for &v in &image.pixels[base..base + 3 * p] {
                    row[i] = v as f64 / 255.0 - 0.5;
                    i += 1;
                }
            }
        }
    }
    Ok(out)
}

/// `T_aud`: projection of pooled log-mel features to the model width.
pub fn encode_audio_tokens(waveform: &Waveform, params: &ModelParams) -> Result<Array2<f64>> {
    let feats = audio_features(waveform, &params.config)?;
    project_audio(&feats, params)
}

pub(crate) fn project_audio(feats: &Array2<f64>, params: &ModelParams) -> Result<Array2<f64>> {
    let w = &params.tensor("audio.proj.w")?.value;
    let b = &params.tensor("audio.proj.b")?.value;
    if feats.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "audio features have {} bands, projection expects {}",
            feats.ncols(),
            w.nrows()
        )));
    }
    Ok(feats.dot(w) + b.row(0))
}

/// `T_vis`: frozen patch embedding with 2-D positions, then the frozen
/// aligner projection.
pub fn encode_visual_tokens(image: &EvidenceImage, params: &ModelParams) -> Result<Array2<f64>> {
    let patches = image_patches(image, &params.config)?;
    visual_from_patches(&patches, params)
}

pub(crate) fn visual_from_patches(patches: &Array2<f64>, params: &ModelParams) -> Result<Array2<f64>> {
    let cfg = &params.config;
    let (gr, gc) = cfg.grid();
    if patches.dim() != (gr * gc, cfg.patch_dim()) {
        return Err(Error::Shape(format!(
            "expected {}x{} patch matrix, got {}x{}",
            gr * gc,
            cfg.patch_dim(),
            patches.nrows(),
            patches.ncols()
        )));
    }
    let mut h = patches.dot(&params.tensor("vision.patch.w")?.value) + params.tensor("vision.patch.b")?.value.row(0);
    let rows = &params.tensor("vision.pos_row")?.value;
    let cols = &params.tensor("vision.pos_col")?.value;
    for r in 0..gr {
        for c in 0..gc {
            let mut t = h.row_mut(r * gc + c);
            t += &rows.row(r);
            t += &cols.row(c);
        }
    }
    Ok(h.dot(&params.tensor("aligner.w")?.value) + params.tensor("aligner.b")?.value.row(0))
}
