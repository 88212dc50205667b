use ndarray::Array2;
use rustfft::FftPlanner;

use super::{hann_window, is_power_of_two, Complex64, Waveform, WindowSpec};
use crate::error::{Error, Result};

/// Complex time-frequency matrix, rows are frequency bins and columns frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub data: Array2<Complex64>,
    /// Bin center frequencies in Hz, one per row.
    pub freqs_hz: Vec<f64>,
    /// Frame center times in seconds, one per column.
    pub times_s: Vec<f64>,
}

impl ComplexMatrix {
    pub fn n_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    pub fn power(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm_sqr())
    }
}

/// Short-time Fourier transform with a periodic Hann window.
///
/// Frames start at multiples of `hop` with no edge padding, so the frame
/// count is `1 + (len - window) / hop`. Each windowed frame is zero-padded to
/// `n_fft` (a power of two) and only bins `0..=n_fft/2` are kept.
pub fn stft(waveform: &Waveform, window: WindowSpec, n_fft: usize) -> Result<ComplexMatrix> {
    window.validate()?;
    if n_fft < window.length {
        return Err(Error::invalid(format!(
            "n_fft {n_fft} is smaller than the window length {}",
            window.length
        )));
    }
    if !is_power_of_two(n_fft) {
        return Err(Error::invalid(format!("n_fft {n_fft} is not a power of two")));
    }
    let x = waveform.samples();
    if x.len() < window.length {
        return Err(Error::TooShort(format!(
            "waveform has {} samples, one analysis window needs {}",
            x.len(),
            window.length
        )));
    }
    let w = hann_window(window.length)?;
    let n_frames = 1 + (x.len() - window.length) / window.hop;
    let n_bins = n_fft / 2 + 1;
    let fs = waveform.sample_rate() as f64;

    let plan = FftPlanner::new().plan_fft_forward(n_fft);
    let mut data = Array2::zeros((n_bins, n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * window.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < window.length {
                Complex64::new(x[start + i] * w[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        plan.process(&mut buf);
        for m in 0..n_bins {
            data[[m, t]] = buf[m];
        }
    }
    Ok(ComplexMatrix {
        data,
        freqs_hz: (0..n_bins).map(|m| m as f64 * fs / n_fft as f64).collect(),
        times_s: (0..n_frames)
            .map(|t| (t * window.hop) as f64 / fs + window.length as f64 / (2.0 * fs))
            .collect(),
    })
}
