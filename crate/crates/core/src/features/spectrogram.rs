use serde::{Deserialize, Serialize};

use super::filterbank::{FilterBank, FilterScale};
use super::{magnitude_to_db_max_ref, TfKind, TfMatrix, TfScale, DEFAULT_FLOOR_DB};
use crate::error::Result;
use crate::signal::{stft, Waveform, WindowSpec};

/// STFT framing shared by the mel, STFT, LFCC and MFCC views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftParams {
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        // 25 ms / 10 ms at 16 kHz
        Self {
            window: 400,
            hop: 160,
            n_fft: 512,
        }
    }
}

impl StftParams {
    pub fn window_spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.window, self.hop)
    }
}

/// STFT magnitude, bins `0..=n_fft/2`.
pub fn stft_spectrogram(waveform: &Waveform, params: &StftParams) -> Result<TfMatrix> {
    let s = stft(waveform, params.window_spec()?, params.n_fft)?;
    TfMatrix::new(
        TfKind::Stft,
        TfScale::Magnitude,
        s.magnitude().mapv(|v| v as f32),
        s.freqs_hz,
        waveform.sample_rate() as f64 / params.hop as f64,
    )
}

/// Filterbank energies of the STFT power spectrum (`n_filters x frames`).
pub(crate) fn filterbank_energies(
    waveform: &Waveform,
    params: &StftParams,
    scale: FilterScale,
    n_filters: usize,
) -> Result<(FilterBank, ndarray::Array2<f64>)> {
    let fb = FilterBank::new(scale, n_filters, params.n_fft, waveform.sample_rate())?;
    let s = stft(waveform, params.window_spec()?, params.n_fft)?;
    let energies = fb.apply(&s.power())?;
    Ok((fb, energies))
}

/// HTK mel filterbank over the power spectrum, in dB relative to the
/// loudest cell.
pub fn mel_spectrogram(waveform: &Waveform, params: &StftParams, n_mels: usize) -> Result<TfMatrix> {
    let (fb, energies) = filterbank_energies(waveform, params, FilterScale::Mel, n_mels)?;
    let amplitude = TfMatrix::new(
        TfKind::Mel,
        TfScale::Magnitude,
        energies.mapv(|p| p.sqrt() as f32),
        (0..n_mels).map(|m| fb.center_hz(m)).collect(),
        waveform.sample_rate() as f64 / params.hop as f64,
    )?;
    magnitude_to_db_max_ref(&amplitude, DEFAULT_FLOOR_DB)
}
