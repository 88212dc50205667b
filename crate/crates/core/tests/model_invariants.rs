mod common;

use common::{randomize_lora_b, random_fused_sequence, small_config};
use evidence_sdd::model::{
    assemble_from_features, export_attention, forward, lora_merge, sft_loss, HeadSelect, LoraAdapter, ModelConfig,
    ModelParams, Prompts, Role, Setting,
};
use evidence_sdd::render::Label;
use evidence_sdd::train::{train, Example, TrainConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn features(cfg: &ModelConfig, frames: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let audio = Array2::from_shape_simple_fn((frames, cfg.n_mels), || rng.random_range(-2.0..1.0));
    let patches = Array2::from_shape_simple_fn((cfg.n_visual_tokens(), cfg.patch_dim()), || rng.random_range(-0.5..0.5));
    (audio, patches)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spans_partition_the_sequence(frames in 1usize..12, sys in "[a-z ]{0,20}", pre in "[a-z ]{1,20}", post in "[a-z ]{0,20}", seed in any::<u64>()) {
        let cfg = small_config(16, 1);
        let prompts = Prompts { system: sys, pre, post };
        for setting in Setting::ALL {
            let (audio, patches) = features(&cfg, frames, seed);
            let seq = match assemble_from_features(setting, Some(audio), Some(patches), &prompts) {
                Ok(s) => s,
                // Empty text segments are rejected; nothing else may fail.
                Err(_) => { prop_assert!(prompts.system.is_empty() || prompts.post.is_empty()); continue; }
            };
            let mut next = 0;
            for s in seq.spans() {
                prop_assert_eq!(s.start, next);
                next += s.len;
            }
            prop_assert_eq!(next, seq.len());
            prop_assert_eq!(seq.roles(), setting.roles().to_vec());
        }
    }

    #[test]
    fn sft_loss_matches_direct_softmax(seed in any::<u64>(), rows in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = 261;
        let logits = Array2::from_shape_simple_fn((rows, v), || rng.random_range(-8.0..8.0));
        let positions: Vec<usize> = (0..rows).collect();
        let targets: Vec<u32> = (0..rows).map(|_| rng.random_range(0..v as u32)).collect();
        let fast = sft_loss(&logits, &targets, &positions).unwrap();
        let mut direct = 0.0;
        for (&t, &p) in targets.iter().zip(&positions) {
            let z: f64 = logits.row(p).iter().map(|x| x.exp()).sum();
            direct -= (logits[[p, t as usize]].exp() / z).ln();
        }
        direct /= rows as f64;
        prop_assert!((fast - direct).abs() / direct.abs() < 1e-10, "{} vs {}", fast, direct);
    }
}

#[test]
fn merged_lora_matches_unmerged() {
    let cfg = small_config(32, 2);
    let mut params = ModelParams::init(&cfg).unwrap();
    randomize_lora_b(&mut params, 17);
    let merged = lora_merge(&params).unwrap();
    assert!(!merged.has_lora());
    for seed in 0..4 {
        let seq = random_fused_sequence(&cfg, seed);
        let a = forward(&seq, &params).unwrap().logits;
        let b = forward(&seq, &merged).unwrap().logits;
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err / scale < 1e-6, "relative error {err:e}");
    }
}

#[test]
fn adapter_parameter_count() {
    let ad = LoraAdapter::zeros(4, 32, 128, 2.0);
    assert_eq!(ad.param_count(), 4 * (32 + 128));
}

#[test]
fn region_matrix_is_the_block_mean_of_the_full_map() {
    let cfg = small_config(16, 2);
    let mut params = ModelParams::init(&cfg).unwrap();
    randomize_lora_b(&mut params, 2);
    let seq = random_fused_sequence(&cfg, 4).with_answer(Label::Fake).unwrap();
    let export = export_attention(&seq, &params, 1, HeadSelect::Mean).unwrap();
    assert_eq!(export.regions.roles.len(), 6);
    assert_eq!(export.regions.roles[5], Role::Answer);
    for (a, sa) in export.spans.iter().enumerate() {
        for (b, sb) in export.spans.iter().enumerate() {
            let mut sum = 0.0;
            for i in sa.start..sa.start + sa.len {
                for j in sb.start..sb.start + sb.len {
                    sum += export.full[[i, j]];
                }
            }
            let want = sum / (sa.len * sb.len) as f64;
            let got = export.regions.block_mean[[a, b]];
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-300), "({a},{b}) {got} vs {want}");
        }
        let row: f64 = export.regions.mass.row(a).sum();
        assert!((row - 1.0).abs() < 1e-6);
    }
    let prompt_only = export_attention(&seq.prompt(), &params, 0, HeadSelect::Head(0)).unwrap();
    assert_eq!(prompt_only.regions.roles.len(), 5);
}

#[test]
fn attention_selection_out_of_range_is_an_error() {
    let cfg = small_config(16, 2);
    let params = ModelParams::init(&cfg).unwrap();
    let seq = random_fused_sequence(&cfg, 1);
    assert!(export_attention(&seq, &params, 2, HeadSelect::Mean).is_err());
    assert!(export_attention(&seq, &params, 0, HeadSelect::Head(4)).is_err());
    assert!(export_attention(&seq, &params, 1, HeadSelect::Head(3)).is_ok());
}

/// Audio features carry the label in their sign, so a few steps suffice.
fn learnable_examples(cfg: &ModelConfig, n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Real } else { Label::Fake };
            let (mut audio, patches) = features(cfg, 3, i as u64);
            let sign = if label == Label::Fake { 1.0 } else { -1.0 };
            audio.mapv_inplace(|v| sign * (v.abs() + 0.5));
            Example {
                id: format!("u{i}"),
                label,
                audio: Some(audio),
                patches: Some(patches),
            }
        })
        .collect()
}

#[test]
fn training_is_deterministic_and_learns() {
    let cfg = ModelConfig {
        max_seq_len: 256,
        ..small_config(16, 1)
    };
    let examples = learnable_examples(&cfg, 8);
    let tc = TrainConfig {
        lr: 1e-3,
        steps: 100,
        batch_size: 4,
        seed: 3,
        setting: Setting::AudioOnly,
        ..TrainConfig::default()
    };
    let run = || train(&examples, ModelParams::init(&cfg).unwrap(), &tc, &Prompts::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.params.digest(), b.params.digest());
    assert_eq!(a.curve, b.curve);
    let uniform = (cfg.vocab_size as f64).ln();
    let last = a.curve.last().unwrap().loss;
    assert!(last < uniform, "loss {last} not below ln V = {uniform}");

    let other = train(
        &examples,
        ModelParams::init(&cfg).unwrap(),
        &TrainConfig { seed: 4, ..tc.clone() },
        &Prompts::default(),
    )
    .unwrap();
    assert_ne!(other.params.digest(), a.params.digest());
}

#[test]
fn checkpoint_file_round_trip() {
    let cfg = small_config(16, 2);
    let mut params = ModelParams::init(&cfg).unwrap();
    randomize_lora_b(&mut params, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    params.save(&path).unwrap();
    let back = ModelParams::load(&path).unwrap();
    assert_eq!(back.digest(), params.digest());
    assert_eq!(back.config, params.config);
    let seq = random_fused_sequence(&cfg, 2);
    // Checkpoints hold f32, so outputs agree to single precision.
    let a = forward(&seq, &params).unwrap().logits;
    let b = forward(&seq, &back).unwrap().logits;
    let err = a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err < 1e-4, "{err}");
}
