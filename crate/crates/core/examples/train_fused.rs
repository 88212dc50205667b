//! Trains the fused model on a small synthetic corpus and scores the
//! held-out split of both domains.
//!
//! cargo run --release --example train_fused -- [out_dir] [steps]

use evidence_sdd::data::{synth_dataset, CorpusConfig};
use evidence_sdd::features::FeatureConfig;
use evidence_sdd::model::{ModelConfig, ModelParams, Prompts, Setting};
use evidence_sdd::render::{RenderConfig, Split};
use evidence_sdd::train::{evaluate, load_examples, train, TrainConfig};

fn main() -> evidence_sdd::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let out = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("target/train_fused"));
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let corpus = CorpusConfig {
        n_train: 32,
        n_dev: 32,
        n_eval: 32,
        ..CorpusConfig::default()
    };
    let samples = synth_dataset(&corpus, &FeatureConfig::default(), &RenderConfig::desk_scale(), &out)?;
    let samples: Vec<_> = samples
        .into_iter()
        .map(|s| evidence_sdd::render::Sample {
            audio_path: out.join(&s.audio_path),
            image_path: out.join(&s.image_path),
            ..s
        })
        .collect();
    let model = ModelConfig::desk_scale();
    let split = |sp: Split| -> evidence_sdd::Result<_> {
        let picked: Vec<_> = samples.iter().filter(|s| s.split == sp).cloned().collect();
        load_examples(&picked, &model, true, true)
    };
    let (tr, dev, shifted) = (split(Split::Train)?, split(Split::Dev)?, split(Split::Eval)?);

    let cfg = TrainConfig {
        steps,
        setting: Setting::Fused,
        ..TrainConfig::desk_scale()
    };
    let prompts = Prompts::default();
    let t = std::time::Instant::now();
    let outcome = train(&tr, ModelParams::init(&model)?, &cfg, &prompts)?;
    println!("{} steps in {:.1?}", outcome.steps_run, t.elapsed());
    for p in outcome.curve.iter().filter(|p| p.train_acc.is_some()) {
        println!("step {:>4}  loss {:.4}  train acc {:.1}", p.step, p.loss, p.train_acc.unwrap());
    }
    for (name, set) in [("A", &dev), ("B", &shifted)] {
        let (r, _) = evaluate(set, &outcome.params, Setting::Fused, &prompts, name)?;
        println!("domain {name}: acc {:.2} f1 {:.2} auc {:?}", r.acc, r.f1, r.auc);
    }
    Ok(())
}
