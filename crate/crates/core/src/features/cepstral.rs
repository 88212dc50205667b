use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::filterbank::FilterScale;
use super::spectrogram::{filterbank_energies, StftParams};
use super::{cqt, CqtConfig, TfKind, TfMatrix, TfScale};
use crate::error::{Error, Result};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CepstralKind {
    Mfcc,
    Lfcc,
    Cqcc,
}

const LOG_FLOOR: f64 = 1e-20;

/// Orthonormal DCT-II.
pub fn dct2_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            let norm = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            norm * s
        })
        .collect()
}

/// Orthonormal DCT-III, the inverse of [`dct2_orthonormal`].
pub fn dct3_orthonormal(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let norm = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    norm * v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

/// Linear interpolation of `values` sampled at increasing `xs` onto `grid`.
fn interp(xs: &[f64], values: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut j = 0;
    grid.iter()
        .map(|&g| {
            while j + 2 < xs.len() && xs[j + 1] < g {
                j += 1;
            }
            let (x0, x1) = (xs[j], xs[j + 1]);
            let t = ((g - x0) / (x1 - x0)).clamp(0.0, 1.0);
            values[j] * (1.0 - t) + values[j + 1] * t
        })
        .collect()
}

/// Cepstral coefficients, `n_coeffs x frames`.
///
/// MFCC and LFCC take the DCT of log mel/linear filterbank energies
/// (`n_filters` bands over the STFT). CQCC takes the log-power CQT,
/// resamples its geometric frequency axis onto a uniform grid of the same
/// size by linear interpolation, then applies the DCT.
pub fn cepstral(
    waveform: &Waveform,
    kind: CepstralKind,
    n_coeffs: usize,
    stft_params: &StftParams,
    n_filters: usize,
    cqt_config: Option<&CqtConfig>,
) -> Result<TfMatrix> {
    if n_coeffs == 0 {
        return Err(Error::invalid("n_coeffs must be at least 1"));
    }
    let (log_bands, frame_rate, tf_kind) = match kind {
        CepstralKind::Mfcc | CepstralKind::Lfcc => {
            if cqt_config.is_some() {
                return Err(Error::invalid(format!("{kind:?} does not take a cqt config")));
            }
            let scale = if kind == CepstralKind::Mfcc { FilterScale::Mel } else { FilterScale::Linear };
            let (_, energies) = filterbank_energies(waveform, stft_params, scale, n_filters)?;
            let tf_kind = if kind == CepstralKind::Mfcc { TfKind::Mfcc } else { TfKind::Lfcc };
            (
                energies.mapv(|e| e.max(LOG_FLOOR).ln()),
                waveform.sample_rate() as f64 / stft_params.hop as f64,
                tf_kind,
            )
        }
        CepstralKind::Cqcc => {
            let cfg = cqt_config.ok_or_else(|| Error::invalid("CQCC requires a cqt config"))?;
            let mag = cqt(waveform, cfg)?;
            let freqs = cfg.center_freqs();
            let k = freqs.len();
            let grid: Vec<f64> = if k == 1 {
                vec![freqs[0]]
            } else {
                (0..k)
                    .map(|i| freqs[0] + (freqs[k - 1] - freqs[0]) * i as f64 / (k - 1) as f64)
                    .collect()
            };
            let mut out = Array2::zeros((k, mag.n_frames()));
            for t in 0..mag.n_frames() {
                let logp: Vec<f64> = mag
                    .values
                    .column(t)
                    .iter()
                    .map(|&m| ((m as f64) * (m as f64)).max(LOG_FLOOR).ln())
                    .collect();
                let col = if k == 1 { logp } else { interp(&freqs, &logp, &grid) };
                for (i, v) in col.into_iter().enumerate() {
                    out[[i, t]] = v;
                }
            }
            (out, mag.frame_rate, TfKind::Cqcc)
        }
    };

    let n_bands = log_bands.nrows();
    if n_coeffs > n_bands {
        return Err(Error::invalid(format!(
            "n_coeffs {n_coeffs} exceeds the {n_bands} underlying bands"
        )));
    }
    let mut values = Array2::<f32>::zeros((n_coeffs, log_bands.ncols()));
    for (t, col) in log_bands.columns().into_iter().enumerate() {
        let c = dct2_orthonormal(&col.to_vec());
        for i in 0..n_coeffs {
            values[[i, t]] = c[i] as f32;
        }
    }
    TfMatrix::new(
        tf_kind,
        TfScale::Cepstral,
        values,
        (0..n_coeffs).map(|i| i as f64).collect(),
        frame_rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dct_of_constant_has_only_dc() {
        let c = dct2_orthonormal(&[3.0; 16]);
        assert!((c[0] - 3.0 * 4.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn dct_inverse_recovers_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 7, 40] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let back = dct3_orthonormal(&dct2_orthonormal(&x));
            let num: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = x.iter().map(|a| a * a).sum();
            assert!((num / den).sqrt() < 1e-10);
        }
    }

    #[test]
    fn interp_hits_nodes_and_midpoints() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [0.0, 1.0, 3.0];
        assert_eq!(interp(&xs, &ys, &[1.0, 1.5, 3.0, 4.0]), vec![0.0, 0.5, 2.0, 3.0]);
    }

    fn noise(n: usize) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Waveform::new((0..n).map(|_| rng.random_range(-0.3..0.3)).collect(), 16_000).unwrap()
    }

    #[test]
    fn shapes_for_each_kind() {
        let w = noise(16_000);
        let sp = StftParams::default();
        let mfcc = cepstral(&w, CepstralKind::Mfcc, 13, &sp, 40, None).unwrap();
        assert_eq!((mfcc.n_bins(), mfcc.n_frames()), (13, 98));
        assert_eq!(mfcc.kind, TfKind::Mfcc);
        let lfcc = cepstral(&w, CepstralKind::Lfcc, 20, &sp, 40, None).unwrap();
        assert_eq!((lfcc.n_bins(), lfcc.n_frames()), (20, 98));
        let cfg = CqtConfig {
            f_min: 65.4,
            n_bins: 96,
            ..CqtConfig::default()
        };
        let cqcc = cepstral(&w, CepstralKind::Cqcc, 20, &sp, 0, Some(&cfg)).unwrap();
        assert_eq!(cqcc.n_bins(), 20);
        assert_eq!(cqcc.n_frames(), cfg.n_frames(16_000));
    }

    #[test]
    fn config_mismatches_are_errors() {
        let w = noise(4000);
        let sp = StftParams::default();
        assert!(cepstral(&w, CepstralKind::Cqcc, 10, &sp, 0, None).is_err());
        assert!(cepstral(&w, CepstralKind::Mfcc, 10, &sp, 40, Some(&CqtConfig::default())).is_err());
        assert!(cepstral(&w, CepstralKind::Mfcc, 41, &sp, 40, None).is_err());
        assert!(cepstral(&w, CepstralKind::Mfcc, 0, &sp, 40, None).is_err());
    }
}
