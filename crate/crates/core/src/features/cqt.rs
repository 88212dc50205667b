//! Constant-Q transform by per-bin Hann-windowed complex kernels.
//!
//! Bin `k` has center `f_k = f_min * 2^(k/B)` and window length
//! `N_k = ceil(Q fs / f_k)` with `Q = 1 / (2^(1/B) - 1)`. Frame `tau` centers
//! every window on sample `tau * hop` of the original signal, which is
//! reflect-padded by half the longest window on each side. Short kernels are
//! evaluated by direct summation; long ones by FFT cross-correlation against
//! the padded signal, which gives every lag at once.

use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{TfKind, TfMatrix, TfScale};
use crate::error::{Error, Result};
use crate::signal::{hann_window, Complex64, Waveform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqtConfig {
    pub f_min: f64,
    pub bins_per_octave: usize,
    pub n_bins: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for CqtConfig {
    fn default() -> Self {
        Self {
            f_min: 32.7,
            bins_per_octave: 24,
            n_bins: 168,
            hop: 160,
            sample_rate: 16_000,
        }
    }
}

impl CqtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0) || !self.f_min.is_finite() {
            return Err(Error::invalid(format!("cqt f_min {} must be positive", self.f_min)));
        }
        if self.bins_per_octave == 0 || self.n_bins == 0 || self.hop == 0 {
            return Err(Error::invalid("cqt bins_per_octave, n_bins and hop must be at least 1"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("cqt sample rate must be positive"));
        }
        let top = self.center_freq(self.n_bins - 1);
        if top >= self.sample_rate as f64 / 2.0 {
            return Err(Error::invalid(format!(
                "highest cqt center frequency {top:.1} Hz is not below Nyquist ({} Hz)",
                self.sample_rate as f64 / 2.0
            )));
        }
        Ok(())
    }

    /// Quality factor `1 / (2^(1/B) - 1)`.
    pub fn q(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn center_freq(&self, k: usize) -> f64 {
        self.f_min * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }

    pub fn center_freqs(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.center_freq(k)).collect()
    }

    pub fn window_len(&self, k: usize) -> usize {
        (self.q() * self.sample_rate as f64 / self.center_freq(k)).ceil() as usize
    }

    /// Reflect padding applied to each edge: half the longest (bin 0) window.
    pub fn pad(&self) -> usize {
        self.window_len(0) / 2
    }

    /// Shortest waveform accepted by [`cqt`].
    pub fn min_signal_len(&self) -> usize {
        self.window_len(0) + 1
    }

    pub fn n_frames(&self, signal_len: usize) -> usize {
        1 + (signal_len - 1) / self.hop
    }
}

/// Reflect-pads `x` by `pad` samples on each side without repeating the edge.
pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    debug_assert!(pad < x.len());
    let n = x.len() as isize;
    (-(pad as isize)..n + pad as isize)
        .map(|i| {
            let j = if i < 0 {
                -i
            } else if i >= n {
                2 * (n - 1) - i
            } else {
                i
            };
            x[j as usize]
        })
        .collect()
}

/// Magnitude CQT, bins ordered low to high.
pub fn cqt(waveform: &Waveform, cfg: &CqtConfig) -> Result<TfMatrix> {
    cfg.validate()?;
    if waveform.sample_rate() != cfg.sample_rate {
        return Err(Error::invalid(format!(
            "waveform rate {} Hz does not match cqt config rate {} Hz",
            waveform.sample_rate(),
            cfg.sample_rate
        )));
    }
    let x = waveform.samples();
    if x.len() < cfg.min_signal_len() {
        return Err(Error::TooShort(format!(
            "cqt needs at least {} samples (longest window is {}), waveform has {}",
            cfg.min_signal_len(),
            cfg.window_len(0),
            x.len()
        )));
    }
    let pad = cfg.pad();
    let padded = reflect_pad(x, pad);
    let n_frames = cfg.n_frames(x.len());
    let fft_len = padded.len().next_power_of_two();
    let fft_cost = fft_len as f64 * (fft_len as f64).log2();

    let needs_fft = (0..cfg.n_bins).any(|k| (n_frames * cfg.window_len(k)) as f64 > fft_cost);
    let signal_spectrum = needs_fft.then(|| {
        let mut buf: Vec<Complex64> = padded.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(fft_len, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);
        buf
    });

    let rows: Vec<Vec<f64>> = (0..cfg.n_bins)
        .into_par_iter()
        .map(|k| {
            let n_k = cfg.window_len(k);
            let kernel = bin_kernel(cfg, k);
            let first = pad - n_k / 2;
            let starts = (0..n_frames).map(|t| first + t * cfg.hop);
            if (n_frames * n_k) as f64 <= fft_cost {
                starts
                    .map(|s| {
                        padded[s..s + n_k]
                            .iter()
                            .zip(&kernel)
                            .fold(Complex64::new(0.0, 0.0), |acc, (&v, a)| acc + a * v)
                            .norm()
                    })
                    .collect()
            } else {
                let lags = correlate(signal_spectrum.as_ref().unwrap(), &kernel);
                starts.map(|s| lags[s].norm()).collect()
            }
        })
        .collect();

    let mut values = Array2::<f32>::zeros((cfg.n_bins, n_frames));
    for (k, row) in rows.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            values[[k, t]] = v as f32;
        }
    }
    TfMatrix::new(
        TfKind::Cqt,
        TfScale::Magnitude,
        values,
        cfg.center_freqs(),
        cfg.sample_rate as f64 / cfg.hop as f64,
    )
}

/// `a_k[i] = w_k[i] exp(-j 2 pi f_k i / fs)` for `i < N_k`.
fn bin_kernel(cfg: &CqtConfig, k: usize) -> Vec<Complex64> {
    let n_k = cfg.window_len(k);
    let w = hann_window(n_k).expect("window length is at least 1");
    let omega = -2.0 * PI * cfg.center_freq(k) / cfg.sample_rate as f64;
    w.iter()
        .enumerate()
        .map(|(i, &wi)| Complex64::from_polar(wi, omega * i as f64))
        .collect()
}

/// Returns `c[s] = sum_i x[s + i] a[i]` for every lag `s`, given the
/// spectrum of the zero-padded `x`.
fn correlate(signal_spectrum: &[Complex64], kernel: &[Complex64]) -> Vec<Complex64> {
    let n = signal_spectrum.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = kernel.iter().map(|a| a.conj()).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    planner.plan_fft_forward(n).process(&mut buf);
    for (b, x) in buf.iter_mut().zip(signal_spectrum) {
        *b = x * b.conj();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}
