//! Time-frequency representations: the constant-Q transform and the five
//! comparison views (mel, STFT, LFCC, MFCC, CQCC), plus dB conversion and
//! min-max normalization.

mod cepstral;
mod cqt;
mod filterbank;
mod scale;
mod spectrogram;
mod tfmatrix;

pub use cepstral::{cepstral, dct2_orthonormal, dct3_orthonormal, CepstralKind};
pub use cqt::{cqt, CqtConfig};
pub use filterbank::{hz_to_mel, mel_to_hz, FilterBank, FilterScale};
pub use scale::{magnitude_to_db, magnitude_to_db_max_ref, minmax_normalize, DB_EPSILON, DEFAULT_FLOOR_DB};
pub use spectrogram::{mel_spectrogram, stft_spectrogram, StftParams};
pub use tfmatrix::{TfKind, TfMatrix, TfScale};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::signal::Waveform;

/// Parameters for every representation `represent` can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub stft: StftParams,
    pub n_mels: usize,
    pub n_linear_filters: usize,
    pub n_ceps: usize,
    pub cqt: CqtConfig,
    pub floor_db: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            stft: StftParams::default(),
            n_mels: 80,
            n_linear_filters: 80,
            n_ceps: 20,
            cqt: CqtConfig::default(),
            floor_db: DEFAULT_FLOOR_DB,
        }
    }
}

/// Computes `kind` in the form that gets rendered: dB (max-referenced) for
/// the spectral views, raw coefficients for the cepstra.
pub fn represent(waveform: &Waveform, kind: TfKind, cfg: &FeatureConfig) -> Result<TfMatrix> {
    let cqt_cfg = CqtConfig {
        sample_rate: waveform.sample_rate(),
        ..cfg.cqt.clone()
    };
    match kind {
        TfKind::Cqt => magnitude_to_db_max_ref(&cqt(waveform, &cqt_cfg)?, cfg.floor_db),
        TfKind::Stft => magnitude_to_db_max_ref(&stft_spectrogram(waveform, &cfg.stft)?, cfg.floor_db),
        TfKind::Mel => mel_spectrogram(waveform, &cfg.stft, cfg.n_mels),
        TfKind::Mfcc => cepstral(waveform, CepstralKind::Mfcc, cfg.n_ceps, &cfg.stft, cfg.n_mels, None),
        TfKind::Lfcc => cepstral(
            waveform,
            CepstralKind::Lfcc,
            cfg.n_ceps,
            &cfg.stft,
            cfg.n_linear_filters,
            None,
        ),
        TfKind::Cqcc => cepstral(waveform, CepstralKind::Cqcc, cfg.n_ceps, &cfg.stft, 0, Some(&cqt_cfg)),
    }
}
