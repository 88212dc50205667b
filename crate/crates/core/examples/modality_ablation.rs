//! Desk-scale modality ablation on a synthetic corpus written by the
//! `synthetic_corpus` example: trains audio_only, acoustic_only and fused
//! models for several seeds and prints the table for each.
//!
//! cargo run --release --example modality_ablation -- <corpus_dir> [n_seeds] [steps] [lr]

use std::time::Instant;

use evidence_sdd::model::{ModelConfig, Prompts, Setting};
use evidence_sdd::render::{read_manifest, Split};
use evidence_sdd::train::{load_examples, run_ablation, AblationData, TrainConfig};

fn main() -> evidence_sdd::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let dir = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("target/synthetic_corpus"));
    let n_seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);

    let model = ModelConfig::desk_scale();
    let samples = read_manifest(dir.join("manifest.jsonl"))?;
    let pick = |split: Split| -> Vec<_> { samples.iter().filter(|s| s.split == split).cloned().collect() };
    let train = load_examples(&pick(Split::Train), &model, true, true)?;
    let dev = load_examples(&pick(Split::Dev), &model, true, true)?;
    let shifted = load_examples(&pick(Split::Eval), &model, true, true)?;
    let data = AblationData {
        train: &train,
        in_domain: ("A", &dev),
        shifted: ("B", &shifted),
    };
    let mut drops = Vec::new();
    for seed in 0..n_seeds {
        // Fixed budget, no early stop, so every setting sees the same steps.
        let cfg = TrainConfig {
            lr,
            steps,
            seed,
            eval_every: 0,
            ..TrainConfig::desk_scale()
        };
        let t = Instant::now();
        let out = run_ablation(&data, &model, &cfg, &Prompts::default())?;
        let r = &out.report;
        println!("seed {seed} ({:.1?}) steps {:?}", t.elapsed(), r.steps);
        r.write_table(std::io::stdout()).unwrap();
        let audio = r.accuracy_drop(Setting::AudioOnly, "A", "B")?;
        let acoustic = r.accuracy_drop(Setting::AcousticOnly, "A", "B")?;
        println!("drop A->B: audio_only {audio:.2}, acoustic_only {acoustic:.2}\n");
        drops.push((audio, acoustic, r.gain("A").unwrap_or(f64::NAN)));
    }
    println!("(audio drop, acoustic drop, gain A) per seed: {drops:?}");
    Ok(())
}
