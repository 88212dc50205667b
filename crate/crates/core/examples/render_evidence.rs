//! Renders CQT evidence images for a real and a fake utterance from each
//! synthetic domain, as PNG, and reads one back.
//!
//! cargo run --release --example render_evidence -- [out_dir]

use evidence_sdd::data::{synth_utterance, Domain, SynthConfig};
use evidence_sdd::features::FeatureConfig;
use evidence_sdd::render::{decode_image_file, encode_image_file, evidence_image, ImageFormat, RenderConfig, Split};

fn main() -> evidence_sdd::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/render_evidence".into()));
    std::fs::create_dir_all(&out).map_err(|e| evidence_sdd::Error::io(&out, e))?;
    let render = RenderConfig {
        format: ImageFormat::Png,
        ..RenderConfig::default()
    };
    let features = FeatureConfig::default();
    for domain in [Domain::A, Domain::B] {
        let cfg = SynthConfig { domain, ..SynthConfig::default() };
        for index in [0, 1] {
            let (wave, label) = synth_utterance(&cfg, Split::Train, index)?;
            let image = evidence_image(&wave, &features, &render)?;
            let path = out.join(format!("{}_{label}.png", domain.as_str()));
            encode_image_file(&image, &path, render.format)?;
            println!("{}", path.display());
        }
    }
    let back = decode_image_file(out.join("A_real.png"))?;
    println!("read back {}x{}, bottom-left pixel {:?}", back.width, back.height, back.pixel(0, back.height - 1));
    Ok(())
}
