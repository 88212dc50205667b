//! Deterministic two-domain synthetic corpus.
//!
//! Real utterances are a few harmonics of a vibrato F0 plus pink-ish noise.
//! Fake utterances use the same construction with artifacts: periodic phase
//! resets, short-time spectral smoothing and a fixed spectral notch. Domain
//! B moves the F0 range up, raises the noise and is recorded at a lower
//! level. In domain A the output level also correlates with the label
//! (fakes are quieter), a dataset-specific cue that per-utterance
//! normalized views cannot see and that does not carry over to domain B.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::render::{build_sample, write_manifest, Label, RenderConfig, Sample, Split};
use crate::signal::{fft_in_place, Complex64, Waveform};

/// Notch band removed from every fake utterance.
pub const NOTCH_LO_HZ: f64 = 300.0;
pub const NOTCH_HI_HZ: f64 = 600.0;
/// Default attenuation inside the notch band.
pub const NOTCH_DEPTH_DB: f64 = 24.0;
/// Spacing of fake phase resets.
pub const PHASE_RESET_SECS: f64 = 0.05;
/// Frame length of the fake spectral smoothing.
pub const SMOOTH_BLOCK: usize = 256;
/// Samples over which a phase reset is ramped in.
const RESET_RAMP: usize = 160;
const VIBRATO_HZ: f64 = 5.0;
const VIBRATO_DEPTH: f64 = 0.02;
const FADE_SECS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::A => "A",
            Domain::B => "B",
        }
    }

    /// Domain constants: F0 range (Hz), noise level, and output peak ranges
    /// for real and fake utterances.
    pub fn profile(self) -> DomainProfile {
        match self {
            Domain::A => DomainProfile {
                f0_hz: (105.0, 160.0),
                noise: 0.01,
                real_peak: (0.5, 0.9),
                fake_peak: (0.15, 0.4),
            },
            Domain::B => DomainProfile {
                f0_hz: (170.0, 250.0),
                noise: 0.015,
                real_peak: (0.05, 0.25),
                fake_peak: (0.05, 0.25),
            },
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Domain::A),
            "B" | "b" => Ok(Domain::B),
            _ => Err(Error::invalid(format!("unknown domain `{s}` (A or B)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainProfile {
    pub f0_hz: (f64, f64),
    /// Standard deviation of the unit-RMS pink noise added before scaling.
    pub noise: f64,
    pub real_peak: (f64, f64),
    pub fake_peak: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactKinds {
    pub notch: bool,
    pub phase_resets: bool,
    pub smoothing: bool,
}

impl Default for ArtifactKinds {
    fn default() -> Self {
        Self {
            notch: true,
            phase_resets: true,
            smoothing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub domain: Domain,
    pub seed: u64,
    pub artifacts: ArtifactKinds,
    pub notch_depth_db: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 64,
            duration_s: 1.2,
            sample_rate: 16_000,
            domain: Domain::A,
            seed: 0,
            artifacts: ArtifactKinds::default(),
            notch_depth_db: NOTCH_DEPTH_DB,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || !self.n_samples.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "n_samples must be a positive even number, got {}",
                self.n_samples
            )));
        }
        if !(self.duration_s >= 0.5) {
            return Err(Error::Config(format!("duration must be at least 0.5 s, got {}", self.duration_s)));
        }
        if !(self.notch_depth_db >= 0.0) {
            return Err(Error::Config("notch depth must be non-negative".into()));
        }
        if self.sample_rate < 4 * NOTCH_HI_HZ as u32 {
            return Err(Error::Config(format!("sample rate {} is too low", self.sample_rate)));
        }
        Ok(())
    }
}

/// Even indices are real, odd indices fake.
pub fn label_for_index(index: usize) -> Label {
    if index.is_multiple_of(2) {
        Label::Real
    } else {
        Label::Fake
    }
}

/// Independent stream per `(seed, domain, split, index)`.
fn utterance_rng(cfg: &SynthConfig, split: Split, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domain = cfg.domain as u64;
    let split = split as u64;
    rng.set_stream((domain << 40) | (split << 32) | index as u64);
    rng
}

fn pink_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            b0 = 0.99765 * b0 + w * 0.099_046;
            b1 = 0.963 * b1 + w * 0.296_516_4;
            b2 = 0.57 * b2 + w * 1.052_691_3;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    out.iter_mut().for_each(|v| *v /= rms);
    out
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Attenuates every FFT bin between the notch edges (and the mirrored
/// bins) by `depth_db`.
fn apply_notch(x: &mut [f64], sample_rate: u32, depth_db: f64) {
    let n = next_pow2(x.len());
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    fft_in_place(&mut buf).expect("power of two");
    let df = sample_rate as f64 / n as f64;
    let gain = 10f64.powf(-depth_db / 20.0);
    for k in 1..n / 2 {
        let f = k as f64 * df;
        if (NOTCH_LO_HZ..=NOTCH_HI_HZ).contains(&f) {
            buf[k] *= gain;
            buf[n - k] *= gain;
        }
    }
    inverse_fft(&mut buf);
    for (v, c) in x.iter_mut().zip(&buf) {
        *v = c.re;
    }
}

fn inverse_fft(buf: &mut [Complex64]) {
    buf.iter_mut().for_each(|c| *c = c.conj());
    fft_in_place(buf).expect("power of two");
    let n = buf.len() as f64;
    buf.iter_mut().for_each(|c| *c = c.conj() / n);
}

/// Short-time smoothing: frames of [`SMOOTH_BLOCK`] samples at 50%
/// overlap under a square-root Hann window; each frame's magnitude spectrum
/// is blurred with a `[1/4, 1/2, 1/4]` kernel across bins (phase kept) and
/// the frames are overlap-added back.
fn smooth_frames(x: &mut [f64]) {
    let n = SMOOTH_BLOCK;
    let hop = n / 2;
    let win: Vec<f64> = (0..n)
        .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).sqrt())
        .collect();
    let mut padded = vec![0.0; x.len() + 2 * n];
    padded[hop..hop + x.len()].copy_from_slice(x);
    let mut out = vec![0.0; padded.len()];
    let mut start = 0;
    while start + n <= padded.len() {
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(padded[start + i] * win[i], 0.0))
            .collect();
        fft_in_place(&mut buf).expect("power of two");
        let mags: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm()).collect();
        for k in 1..n / 2 {
            let m = 0.25 * mags[k - 1] + 0.5 * mags[k] + 0.25 * mags[k + 1];
            let c = buf[k];
            let scaled = if c.norm() > 0.0 { c * (m / c.norm()) } else { c };
            buf[k] = scaled;
            buf[n - k] = scaled.conj();
        }
        inverse_fft(&mut buf);
        for i in 0..n {
            out[start + i] += buf[i].re * win[i];
        }
        start += hop;
    }
    x.copy_from_slice(&out[hop..hop + x.len()]);
}

/// Utterance `index` of `split`; the label follows [`label_for_index`].
pub fn synth_utterance(cfg: &SynthConfig, split: Split, index: usize) -> Result<(Waveform, Label)> {
    cfg.validate()?;
    let label = label_for_index(index);
    let fake = label == Label::Fake;
    let profile = cfg.domain.profile();
    let mut rng = utterance_rng(cfg, split, index);
    let sr = cfg.sample_rate as f64;
    let n = (cfg.duration_s * sr).round() as usize;

    let f0 = rng.random_range(profile.f0_hz.0..profile.f0_hz.1);
    let n_harm = rng.random_range(3..=6);
    let amps: Vec<f64> = (1..=n_harm).map(|h| rng.random_range(0.7..1.3) / h as f64).collect();
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let mut phases: Vec<f64> = (0..n_harm).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let reset_every = (PHASE_RESET_SECS * sr).round() as usize;
    let mut ramp = vec![0.0; n_harm];
    let mut ramp_left = 0;

    let mut x = vec![0.0; n];
    for (i, v) in x.iter_mut().enumerate() {
        if fake && cfg.artifacts.phase_resets && i > 0 && i % reset_every == 0 {
            for r in ramp.iter_mut() {
                *r = rng.random_range(-PI / 4.0..PI / 4.0) / RESET_RAMP as f64;
            }
            ramp_left = RESET_RAMP;
        }
        if ramp_left > 0 {
            for (p, r) in phases.iter_mut().zip(&ramp) {
                *p += r;
            }
            ramp_left -= 1;
        }
        let t = i as f64 / sr;
        let f = f0 * (1.0 + VIBRATO_DEPTH * (2.0 * PI * VIBRATO_HZ * t + vib_phase).sin());
        let mut s = 0.0;
        for (h, (a, p)) in amps.iter().zip(phases.iter_mut()).enumerate() {
            s += a * p.sin();
            *p += 2.0 * PI * f * (h + 1) as f64 / sr;
        }
        *v = s;
    }
    for (v, w) in x.iter_mut().zip(pink_noise(&mut rng, n)) {
        *v += profile.noise * w;
    }
    if fake && cfg.artifacts.smoothing {
        smooth_frames(&mut x);
    }
    if fake && cfg.artifacts.notch {
        apply_notch(&mut x, cfg.sample_rate, cfg.notch_depth_db);
    }
    let fade = (FADE_SECS * sr) as usize;
    for i in 0..fade.min(n / 2) {
        let g = i as f64 / fade as f64;
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
    let range = if fake { profile.fake_peak } else { profile.real_peak };
    let peak_target = rng.random_range(range.0..range.1);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v *= peak_target / peak);
    Ok((Waveform::new(x, cfg.sample_rate)?, label))
}

pub fn utterance_id(domain: Domain, split: Split, index: usize) -> String {
    format!("synth_{}_{}_{index:05}", domain.as_str().to_lowercase(), split.as_str())
}

/// Writes `n_samples` utterances of one split under `out_dir` (`audio/*.wav`,
/// `images/*.ppm|png`) and returns their samples with paths relative to
/// `out_dir`. Generation runs in parallel; the result does not depend on
/// scheduling.
pub fn synth_split(
    cfg: &SynthConfig,
    split: Split,
    features: &FeatureConfig,
    render: &RenderConfig,
    out_dir: &Path,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    for sub in ["audio", "images"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let ext = match render.format {
        crate::render::ImageFormat::Ppm => "ppm",
        crate::render::ImageFormat::Png => "png",
    };
    (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let (wave, label) = synth_utterance(cfg, split, i)?;
            let id = utterance_id(cfg.domain, split, i);
            let audio_rel = Path::new("audio").join(format!("{id}.wav"));
            let image_rel = Path::new("images").join(format!("{id}.{ext}"));
            let audio_abs = out_dir.join(&audio_rel);
            if audio_abs.exists() {
                std::fs::remove_file(&audio_abs).map_err(|e| Error::io(&audio_abs, e))?;
            }
            let s = build_sample(
                &wave,
                label,
                features,
                render,
                &audio_abs,
                &out_dir.join(&image_rel),
                split,
                cfg.domain.as_str(),
            )?;
            Ok(Sample {
                audio_path: audio_rel,
                image_path: image_rel,
                ..s
            })
        })
        .collect()
}

/// Corpus layout used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
    /// Domain A training utterances.
    pub n_train: usize,
    /// Held-out domain A utterances.
    pub n_dev: usize,
    /// Domain B utterances.
    pub n_eval: usize,
    pub artifacts: ArtifactKinds,
    pub notch_depth_db: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 1.2,
            sample_rate: 16_000,
            n_train: 64,
            n_dev: 64,
            n_eval: 64,
            artifacts: ArtifactKinds::default(),
            notch_depth_db: NOTCH_DEPTH_DB,
        }
    }
}

/// Domain A train and dev splits plus a domain B eval split, written to
/// `out_dir/manifest.jsonl`.
pub fn synth_dataset(
    corpus: &CorpusConfig,
    features: &FeatureConfig,
    render: &RenderConfig,
    out_dir: &Path,
) -> Result<Vec<Sample>> {
    let mut all = Vec::new();
    for (domain, split, n) in [
        (Domain::A, Split::Train, corpus.n_train),
        (Domain::A, Split::Dev, corpus.n_dev),
        (Domain::B, Split::Eval, corpus.n_eval),
    ] {
        if n == 0 {
            continue;
        }
        let cfg = SynthConfig {
            n_samples: n,
            duration_s: corpus.duration_s,
            sample_rate: corpus.sample_rate,
            domain,
            seed: corpus.seed,
            artifacts: corpus.artifacts,
            notch_depth_db: corpus.notch_depth_db,
        };
        all.extend(synth_split(&cfg, split, features, render, out_dir)?);
    }
    write_manifest(out_dir.join("manifest.jsonl"), &all)?;
    Ok(all)
}
