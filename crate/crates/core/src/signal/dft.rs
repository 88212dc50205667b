use std::f64::consts::PI;

use rustfft::FftPlanner;

use super::{is_power_of_two, Complex64};
use crate::error::{Error, Result};

/// Direct O(N^2) evaluation of `X[m] = sum_n x[n] exp(-j 2 pi m n / N)`.
///
/// Accepts any length. The phase index `m*n` is reduced modulo `N` before
/// the trig call so large products keep full precision.
pub fn dft_naive(frame: &[f64]) -> Result<Vec<Complex64>> {
    if frame.is_empty() {
        return Err(Error::invalid("dft of an empty frame"));
    }
    let n = frame.len();
    let step = -2.0 * PI / n as f64;
    Ok((0..n)
        .map(|m| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &x) in frame.iter().enumerate() {
                let k = (m * i) % n;
                let (s, c) = (step * k as f64).sin_cos();
                acc += Complex64::new(x * c, x * s);
            }
            acc
        })
        .collect())
}

/// Fast transform of a real frame whose length is a power of two.
pub fn fft(frame: &[f64]) -> Result<Vec<Complex64>> {
    let mut buf: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf)?;
    Ok(buf)
}

/// Forward transform of a complex buffer in place; length must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    if !is_power_of_two(buf.len()) {
        return Err(Error::invalid(format!(
            "fft length {} is not a power of two (zero-pad the frame)",
            buf.len()
        )));
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn impulse_and_dc() {
        let x = dft_naive(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for v in &x {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let x = dft_naive(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((x[0] - Complex64::new(4.0, 0.0)).norm() < 1e-15);
        for v in &x[1..] {
            assert!(v.norm() < 1e-14);
        }
        let f = fft(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(f.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn parseval_on_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 16, 31, 100] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let spec = dft_naive(&x).unwrap();
            let time: f64 = x.iter().map(|v| v * v).sum();
            let freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
            assert!(((time - freq) / time).abs() < 1e-10);
        }
    }

    #[test]
    fn fft_matches_naive_and_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = fft(&x).unwrap();
        let b = dft_naive(&x).unwrap();
        assert!(rel_err(&a, &b) < 1e-10);

        let scaled: Vec<f64> = x.iter().map(|v| 2.5 * v).collect();
        let c = fft(&scaled).unwrap();
        let expect: Vec<Complex64> = a.iter().map(|v| v * 2.5).collect();
        assert!(rel_err(&c, &expect) < 1e-14);
    }

    #[test]
    fn fft_rejects_non_power_of_two() {
        assert!(fft(&[0.0; 12]).is_err());
        assert!(fft(&[]).is_err());
    }
}
