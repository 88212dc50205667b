//! How the three input settings lay out their token sequences, with
//! one-based spans per role and the position that predicts the label.
//!
//! cargo run --release --example token_assembly

use evidence_sdd::data::{synth_utterance, SynthConfig};
use evidence_sdd::features::FeatureConfig;
use evidence_sdd::model::{assemble_sequence, ModelConfig, Prompts, Setting};
use evidence_sdd::render::{evidence_image, Label, RenderConfig, Split};

fn main() -> evidence_sdd::Result<()> {
    let model = ModelConfig::desk_scale();
    let (wave, _) = synth_utterance(&SynthConfig::default(), Split::Train, 0)?;
    let image = evidence_image(&wave, &FeatureConfig::default(), &RenderConfig::desk_scale())?;
    let prompts = Prompts::default();
    for setting in Setting::ALL {
        let seq = assemble_sequence(setting, Some(&wave), Some(&image), &prompts, &model)?;
        let spans: Vec<String> = seq
            .spans()
            .iter()
            .map(|s| {
                let (a, b) = s.one_based();
                format!("{} {a}..{b}", s.role)
            })
            .collect();
        println!("{setting:>13}: {} tokens, query at {}", seq.len(), seq.query_position() + 1);
        println!("               {}", spans.join(", "));
    }
    let seq = assemble_sequence(Setting::Fused, Some(&wave), Some(&image), &prompts, &model)?;
    println!("with answer appended: {} tokens", seq.with_answer(Label::Fake)?.len());
    Ok(())
}
