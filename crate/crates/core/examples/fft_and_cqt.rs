//! FFT against the direct DFT, then a constant-Q transform of a two-tone
//! signal: the loudest bin in each half should sit on the tone's pitch.
//!
//! cargo run --release --example fft_and_cqt

use std::f64::consts::PI;

use evidence_sdd::features::{cqt, CqtConfig};
use evidence_sdd::signal::{dft_naive, fft, Waveform};

fn main() -> evidence_sdd::Result<()> {
    let frame: Vec<f64> = (0..256).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
    let fast = fft(&frame)?;
    let slow = dft_naive(&frame)?;
    let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("fft vs direct DFT, n = 256: max |diff| = {err:.2e}");

    let sr = 16_000;
    let x: Vec<f64> = (0..sr)
        .map(|i| {
            let t = i as f64 / sr as f64;
            let f = if t < 0.5 { 220.0 } else { 440.0 };
            (2.0 * PI * f * t).sin()
        })
        .collect();
    let wave = Waveform::new(x, sr as u32)?;
    let cfg = CqtConfig {
        f_min: 110.0,
        bins_per_octave: 12,
        n_bins: 48,
        ..CqtConfig::default()
    };
    let tf = cqt(&wave, &cfg)?;
    println!("cqt: {} bins x {} frames, Q = {:.2}", tf.n_bins(), tf.n_frames(), cfg.q());
    for frame in [tf.n_frames() / 4, 3 * tf.n_frames() / 4] {
        let col = tf.values.column(frame);
        let k = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        println!("frame {frame}: peak at bin {k} ({:.1} Hz)", tf.freq_axis[k]);
    }
    Ok(())
}
