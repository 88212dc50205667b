//! Attention of a freshly initialized fused model on one utterance,
//! collapsed to role-by-role region matrices.
//!
//! cargo run --release --example attention_regions

use evidence_sdd::data::{synth_utterance, SynthConfig};
use evidence_sdd::features::FeatureConfig;
use evidence_sdd::model::{assemble_sequence, export_attention, HeadSelect, ModelConfig, ModelParams, Prompts, Setting};
use evidence_sdd::render::{evidence_image, Label, RenderConfig, Split};

fn main() -> evidence_sdd::Result<()> {
    let model = ModelConfig::desk_scale();
    let params = ModelParams::init(&model)?;
    let (wave, label) = synth_utterance(&SynthConfig::default(), Split::Dev, 1)?;
    let image = evidence_image(&wave, &FeatureConfig::default(), &RenderConfig::desk_scale())?;
    let seq = assemble_sequence(Setting::Fused, Some(&wave), Some(&image), &Prompts::default(), &model)?;
    let seq = seq.with_answer(label)?;
    assert_eq!(label, Label::Fake);

    for layer in 0..model.n_layers {
        let export = export_attention(&seq, &params, layer, HeadSelect::Mean)?;
        println!("layer {layer}, mean over heads: attention mass from row role to column role");
        let names: Vec<&str> = export.regions.roles.iter().map(|r| r.as_str()).collect();
        println!("{:>7} {}", "", names.iter().map(|n| format!("{n:>7}")).collect::<String>());
        for (a, name) in names.iter().enumerate() {
            let row: String = export.regions.mass.row(a).iter().map(|v| format!("{v:7.3}")).collect();
            println!("{name:>7} {row}");
        }
    }
    Ok(())
}
