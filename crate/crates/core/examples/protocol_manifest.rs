//! Parses an ASVspoof-style protocol over a directory of WAVs, renders the
//! evidence images and writes a JSON-lines manifest.
//!
//! cargo run --release --example protocol_manifest -- [work_dir]

use evidence_sdd::data::{parse_protocol, synth_utterance, SynthConfig};
use evidence_sdd::features::FeatureConfig;
use evidence_sdd::render::{build_sample, read_manifest, write_manifest, RenderConfig, Split};
use evidence_sdd::signal::wav::write_wav;
use evidence_sdd::Error;

fn main() -> evidence_sdd::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/protocol_manifest".into()));
    let audio = dir.join("flac");
    std::fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;

    // A stand-in corpus: synthetic audio under LA-style utterance ids.
    let mut protocol = String::new();
    for (i, utt) in ["LA_T_1000001", "LA_T_1000002", "LA_D_2000001", "LA_E_3000001"].iter().enumerate() {
        let (wave, label) = synth_utterance(&SynthConfig::default(), Split::Train, i)?;
        write_wav(audio.join(format!("{utt}.wav")), &wave)?;
        let (sys, key) = if label.is_fake() { ("A01", "spoof") } else { ("-", "bonafide") };
        protocol.push_str(&format!("LA_0079 {utt} - {sys} {key}\n"));
    }
    let proto_path = dir.join("LA.cm.train.trl.txt");
    std::fs::write(&proto_path, protocol).map_err(|e| Error::io(&proto_path, e))?;

    let features = FeatureConfig::default();
    let render = RenderConfig::desk_scale();
    let mut samples = Vec::new();
    for s in parse_protocol(&proto_path, &audio)? {
        let wave = evidence_sdd::signal::wav::load_wav(&s.audio_path)?;
        let image = dir.join("images").join(s.audio_path.file_stem().unwrap()).with_extension("ppm");
        std::fs::create_dir_all(image.parent().unwrap()).map_err(|e| Error::io(&image, e))?;
        samples.push(build_sample(&wave, s.label, &features, &render, &s.audio_path, &image, s.split, &s.domain)?);
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &samples)?;
    for s in read_manifest(&manifest)? {
        println!("{:<5} {:<5} {:<20} {}", s.split.as_str(), s.label.as_str(), s.domain, s.image_path.display());
    }
    Ok(())
}
