//! Every time-frequency view of one synthetic utterance with its shape and
//! value range. Writes `<kind>.tfm` files to the output directory.
//!
//! cargo run --release --example feature_tour -- [out_dir]

use evidence_sdd::data::{synth_utterance, SynthConfig};
use evidence_sdd::features::{represent, FeatureConfig, TfKind};
use evidence_sdd::render::Split;

fn main() -> evidence_sdd::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/feature_tour".into()));
    std::fs::create_dir_all(&out).map_err(|e| evidence_sdd::Error::io(&out, e))?;
    let (wave, label) = synth_utterance(&SynthConfig::default(), Split::Train, 0)?;
    println!("{label} utterance, {:.2} s", wave.duration_secs());
    let cfg = FeatureConfig::default();
    for kind in TfKind::ALL {
        let t = std::time::Instant::now();
        let tf = represent(&wave, kind, &cfg)?;
        let (lo, hi) = tf.values.iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        println!(
            "{kind:>5}: {:>3} x {:<3} {:?} range [{lo:8.2}, {hi:8.2}] in {:.1?}",
            tf.n_bins(),
            tf.n_frames(),
            tf.scale,
            t.elapsed()
        );
        let path = out.join(format!("{kind}.tfm"));
        std::fs::write(&path, tf.to_bytes()).map_err(|e| evidence_sdd::Error::io(&path, e))?;
    }
    Ok(())
}
