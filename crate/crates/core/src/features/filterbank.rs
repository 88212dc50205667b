use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// HTK mel scale: `2595 log10(1 + f / 700)`.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterScale {
    Mel,
    Linear,
}

/// Unit-peak triangular filters with shared edges, centers equally spaced
/// on the chosen scale between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub scale: FilterScale,
    /// `n_filters + 2` edge frequencies in Hz; filter `m` peaks at `edges[m + 1]`.
    pub edges_hz: Vec<f64>,
    /// `n_filters x (n_fft/2 + 1)` weights sampled at the FFT bin frequencies.
    pub weights: Array2<f64>,
}

impl FilterBank {
    pub fn new(scale: FilterScale, n_filters: usize, n_fft: usize, sample_rate: u32) -> Result<Self> {
        let n_bins = n_fft / 2 + 1;
        if n_filters < 2 {
            return Err(Error::invalid("a filterbank needs at least 2 filters"));
        }
        if n_filters > n_bins {
            return Err(Error::invalid(format!(
                "{n_filters} filters exceed the {n_bins} available FFT bins"
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let edges_hz: Vec<f64> = match scale {
            FilterScale::Mel => {
                let top = hz_to_mel(nyquist);
                (0..n_filters + 2)
                    .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
                    .collect()
            }
            FilterScale::Linear => (0..n_filters + 2)
                .map(|i| nyquist * i as f64 / (n_filters + 1) as f64)
                .collect(),
        };
        let mut fb = Self {
            scale,
            edges_hz,
            weights: Array2::zeros((n_filters, n_bins)),
        };
        let bin_hz = sample_rate as f64 / n_fft as f64;
        for m in 0..n_filters {
            for j in 0..n_bins {
                fb.weights[[m, j]] = fb.response(m, j as f64 * bin_hz);
            }
        }
        Ok(fb)
    }

    pub fn n_filters(&self) -> usize {
        self.edges_hz.len() - 2
    }

    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    /// Continuous triangle response of filter `m` at `f_hz`.
    pub fn response(&self, m: usize, f_hz: f64) -> f64 {
        let (lo, mid, hi) = (self.edges_hz[m], self.edges_hz[m + 1], self.edges_hz[m + 2]);
        if f_hz <= lo || f_hz >= hi {
            0.0
        } else if f_hz <= mid {
            (f_hz - lo) / (mid - lo)
        } else {
            (hi - f_hz) / (hi - mid)
        }
    }

    /// Filter energies: `weights . power`, giving `n_filters x frames`.
    pub fn apply(&self, power: &Array2<f64>) -> Result<Array2<f64>> {
        if power.nrows() != self.weights.ncols() {
            return Err(Error::Shape(format!(
                "filterbank expects {} bins, spectrum has {}",
                self.weights.ncols(),
                power.nrows()
            )));
        }
        Ok(self.weights.dot(power))
    }
}
