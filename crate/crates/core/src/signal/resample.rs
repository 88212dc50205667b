use super::Waveform;
use crate::error::{Error, Result};

/// Linear-interpolation resampler. Opt-in; the pipeline otherwise runs at
/// the file's native rate.
pub fn resample_linear(waveform: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    if target_rate == waveform.sample_rate() {
        return Ok(waveform.clone());
    }
    let x = waveform.samples();
    let ratio = waveform.sample_rate() as f64 / target_rate as f64;
    let out_len = ((x.len() as f64) / ratio).floor().max(1.0) as usize;
    let last = x.len() - 1;
    let samples = (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = pos - i0 as f64;
            x[i0] * (1.0 - frac) + x[i1] * frac
        })
        .collect();
    Waveform::new(samples, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_and_interpolates() {
        let w = Waveform::new(vec![0.0, 0.5, 1.0, 0.5], 32_000).unwrap();
        let r = resample_linear(&w, 16_000).unwrap();
        assert_eq!(r.samples(), &[0.0, 1.0]);
        let up = resample_linear(&Waveform::new(vec![0.0, 1.0], 8_000).unwrap(), 16_000).unwrap();
        assert_eq!(up.samples(), &[0.0, 0.5, 1.0, 1.0]);
    }
}
