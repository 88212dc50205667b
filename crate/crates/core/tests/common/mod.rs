//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use evidence_sdd::features::CqtConfig;
use evidence_sdd::model::{
    loss_and_grad, ModelConfig, ModelParams, ParamKind, Role, SegmentContent, TokenSequence,
};
use evidence_sdd::render::Label;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

/// Constant-Q magnitudes by direct summation: bin `k`, frame `tau` is
/// `|sum_m x[m] w_k[m - tau*hop + N_k/2] exp(-2 pi i f_k m / fs)|` over the
/// reflect-extended signal, computed term by term.
pub fn cqt_direct(x: &[f64], cfg: &CqtConfig) -> Array2<f64> {
    let q = 1.0 / (2f64.powf(1.0 / cfg.bins_per_octave as f64) - 1.0);
    let len = x.len();
    let reflect = |i: isize| -> f64 {
        let n = len as isize;
        let mut j = i;
        while j < 0 || j >= n {
            if j < 0 {
                j = -j;
            }
            if j >= n {
                j = 2 * (n - 1) - j;
            }
        }
        x[j as usize]
    };
    let frames = 1 + (len - 1) / cfg.hop;
    let mut out = Array2::zeros((cfg.n_bins, frames));
    for k in 0..cfg.n_bins {
        let fk = cfg.f_min * 2f64.powf(k as f64 / cfg.bins_per_octave as f64);
        let nk = (q * cfg.sample_rate as f64 / fk).ceil() as usize;
        for t in 0..frames {
            let start = (t * cfg.hop) as isize - (nk / 2) as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..nk {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / nk as f64).cos();
                // Absolute sample index: the frame offset is a unit phasor
                // and drops out of the magnitude.
                let m = start + n as isize;
                let phase = -2.0 * std::f64::consts::PI * fk * m as f64 / cfg.sample_rate as f64;
                acc += Complex64::from_polar(reflect(m) * w, phase);
            }
            out[[k, t]] = acc.norm();
        }
    }
    out
}

/// Pairwise AUC in doubled integer units: `(2 * wins + ties, 2 * n_pos * n_neg)`.
pub fn auc_pairwise(scores: &[f64], fake: &[bool]) -> (u64, u64) {
    let mut num = 0;
    let mut pairs = 0;
    for (i, &si) in scores.iter().enumerate() {
        if !fake[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if fake[j] {
                continue;
            }
            pairs += 1;
            num += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    (num, 2 * pairs)
}

pub fn small_config(d: usize, layers: usize) -> ModelConfig {
    ModelConfig {
        d_model: d,
        n_layers: layers,
        n_heads: 4,
        n_mels: 8,
        image_width: 32,
        image_height: 32,
        patch_size: 16,
        max_seq_len: 64,
        ..ModelConfig::default()
    }
}

/// A fused-layout sequence with random audio features and patches.
pub fn random_fused_sequence(cfg: &ModelConfig, seed: u64) -> TokenSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let text = |n: usize, rng: &mut ChaCha8Rng| SegmentContent::Text((0..n).map(|_| rng.random_range(0..256)).collect());
    let sys = text(5, &mut rng);
    let pre = text(4, &mut rng);
    let post = text(3, &mut rng);
    let audio = Array2::from_shape_simple_fn((6, cfg.n_mels), || rng.random_range(-2.0..1.0));
    let patches = Array2::from_shape_simple_fn((cfg.n_visual_tokens(), cfg.patch_dim()), || rng.random_range(-0.5..0.5));
    TokenSequence::from_segments(vec![
        (Role::Sys, sys),
        (Role::Aud, SegmentContent::Audio(audio)),
        (Role::Pre, pre),
        (Role::Vis, SegmentContent::Visual(patches)),
        (Role::Post, post),
    ])
    .unwrap()
}

/// Gives every LoRA `B` small random values so adapter gradients are non-trivial.
pub fn randomize_lora_b(params: &mut ModelParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut params.tensors {
        if p.kind == ParamKind::LoraB {
            p.value.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
    }
}

pub fn loss_only(seq: &TokenSequence, label: Label, params: &ModelParams) -> f64 {
    let layout = params.layout().unwrap();
    let mut grads = vec![None; params.tensors.len()];
    loss_and_grad(seq, label, params, &layout, &mut grads, 1.0).unwrap().0
}

/// Per-tensor relative error `|a - n| / max(|a|, |n|, 1e-6)` (norms over
/// the checked entries) between analytic and central-difference gradients.
/// The floor keeps tensors whose true gradient is zero (key biases, under
/// softmax shift invariance) from dividing rounding noise by itself.
/// Checks the largest-gradient entries plus a random sample of each tensor.
pub fn gradient_check(params: &ModelParams, seq: &TokenSequence, label: Label, h: f64, per_tensor: usize) -> Vec<(String, f64)> {
    let layout = params.layout().unwrap();
    let mut grads = params.zero_grads();
    loss_and_grad(seq, label, params, &layout, &mut grads, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut report = Vec::new();
    for (ti, p) in params.tensors.iter().enumerate() {
        let Some(g) = &grads[ti] else { continue };
        let flat: Vec<f64> = g.iter().copied().collect();
        let mut idx: Vec<usize> = (0..flat.len()).collect();
        idx.sort_by(|&a, &b| flat[b].abs().total_cmp(&flat[a].abs()));
        let mut picks: Vec<usize> = idx.iter().take(per_tensor).copied().collect();
        for _ in 0..per_tensor {
            picks.push(rng.random_range(0..flat.len()));
        }
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for &e in &picks {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let cols = p.value.ncols();
            plus.tensors[ti].value[[e / cols, e % cols]] += h;
            minus.tensors[ti].value[[e / cols, e % cols]] -= h;
            let fd = (loss_only(seq, label, &plus) - loss_only(seq, label, &minus)) / (2.0 * h);
            diff += (fd - flat[e]).powi(2);
            na += flat[e].powi(2);
            nn += fd.powi(2);
        }
        let rel = diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-6);
        report.push((p.name.clone(), rel));
    }
    report
}
