//! Supervised fine-tuning on the label token and evaluation.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc, classification_metrics, Confusion};
use super::optimizer::{adamw_step, lr_at, AdamState, AdamW};
use crate::error::{Error, Result};
use crate::model::{
    assemble_from_features, audio_features, decide, image_patches, loss_and_grad, predict_score, ModelConfig,
    ModelParams, Prompts, Setting, TokenSequence,
};
use crate::render::{decode_image_file, Label, Sample};
use crate::signal::wav::load_wav;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_ratio: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub setting: Setting,
    /// Training accuracy is measured every `eval_every` steps (0 = never).
    pub eval_every: usize,
    /// Stop once a measured training accuracy (percent) reaches this value.
    pub target_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            weight_decay: 0.1,
            warmup_ratio: 0.01,
            steps: 500,
            batch_size: 16,
            seed: 0,
            setting: Setting::Fused,
            eval_every: 0,
            target_train_acc: None,
        }
    }
}

impl TrainConfig {
    /// Settings for training [`ModelConfig::desk_scale`] from scratch. The
    /// higher learning rate stands in for the pretrained backbone the
    /// default is tuned for.
    pub fn desk_scale() -> Self {
        Self {
            lr: 1e-3,
            steps: 200,
            batch_size: 8,
            eval_every: 25,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.steps == 0 || self.batch_size == 0 || self.weight_decay < 0.0 {
            return Err(Error::Config("lr, steps and batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::Config(format!("warmup_ratio {} is outside [0, 1)", self.warmup_ratio)));
        }
        Ok(())
    }
}

/// Frontend features of one sample, loaded once.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub label: Label,
    pub audio: Option<Array2<f64>>,
    pub patches: Option<Array2<f64>>,
}

impl Example {
    pub fn sequence(&self, setting: Setting, prompts: &Prompts) -> Result<TokenSequence> {
        let audio = if setting.uses_audio() { self.audio.clone() } else { None };
        let patches = if setting.uses_image() { self.patches.clone() } else { None };
        assemble_from_features(setting, audio, patches, prompts)
            .map_err(|e| Error::invalid(format!("sample `{}`: {e}", self.id)))
    }
}

/// Loads audio features and/or image patches for each sample, in order.
pub fn load_examples(samples: &[Sample], cfg: &ModelConfig, audio: bool, image: bool) -> Result<Vec<Example>> {
    samples
        .par_iter()
        .map(|s| {
            let audio = if audio {
                Some(audio_features(&load_wav(&s.audio_path)?, cfg)?)
            } else {
                None
            };
            let patches = if image {
                Some(image_patches(&decode_image_file(&s.image_path)?, cfg)?)
            } else {
                None
            };
            Ok(Example {
                id: s
                    .audio_path
                    .file_stem()
                    .map(|x| x.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                label: s.label,
                audio,
                patches,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub lr: f64,
    /// Mean batch loss before the update.
    pub loss: f64,
    /// Training-set accuracy after the update, when measured.
    pub train_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub curve: Vec<LossPoint>,
    pub steps_run: usize,
    /// First step at which a measured training accuracy reached the target.
    pub reached_target_at: Option<usize>,
}

impl TrainOutcome {
    /// Loss curve as CSV preceded by `#` comment lines with the config echo.
    pub fn write_curve_csv<W: Write>(&self, mut w: W, config_echo: &str, seed: u64) -> std::io::Result<()> {
        for line in config_echo.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# seed = {seed}")?;
        writeln!(w, "step,lr,loss,train_acc")?;
        for p in &self.curve {
            let acc = p.train_acc.map(|a| format!("{a:.4}")).unwrap_or_default();
            writeln!(w, "{},{:.6e},{:.8},{}", p.step, p.lr, p.loss, acc)?;
        }
        Ok(())
    }
}

/// AdamW on the mean answer-token NLL. Each epoch visits the examples in a
/// fresh permutation drawn from `cfg.seed`; batches are consecutive slices
/// of it. Single-threaded, so the result depends only on the inputs.
pub fn train(examples: &[Example], params: ModelParams, cfg: &TrainConfig, prompts: &Prompts) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("empty training split"));
    }
    let seqs = examples
        .iter()
        .map(|e| e.sequence(cfg.setting, prompts))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let mut params = params;
    let layout = params.layout()?;
    let opt = AdamW {
        weight_decay: cfg.weight_decay,
        ..AdamW::default()
    };
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut reached = None;
    let mut steps_run = 0;
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order = (0..seqs.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let mut grads = params.zero_grads();
        let weight = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in &batch {
            loss += weight * loss_and_grad(&seqs[i], labels[i], &params, &layout, &mut grads, weight)?.0;
        }
        let lr = lr_at(step, cfg.steps, cfg.lr, cfg.warmup_ratio);
        adamw_step(&mut params, &grads, &mut state, step as u64, lr, &opt)?;
        steps_run = step;
        let train_acc = if cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps) {
            let preds = score_sequences(&seqs, &params)?;
            let decided: Vec<Label> = preds.iter().map(|&p| decide(p)).collect();
            Some(classification_metrics(&labels, &decided)?.acc)
        } else {
            None
        };
        curve.push(LossPoint { step, lr, loss, train_acc });
        if let (Some(acc), Some(target)) = (train_acc, cfg.target_train_acc) {
            if acc >= target {
                reached = Some(step);
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params,
        curve,
        steps_run,
        reached_target_at: reached,
    })
}

/// `p_fake` for every sequence; parallel over sequences, results in input order.
pub fn score_sequences(seqs: &[TokenSequence], params: &ModelParams) -> Result<Vec<f64>> {
    seqs.par_iter().map(|s| predict_score(s, params)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub setting: Setting,
    pub acc: f64,
    pub f1: f64,
    /// Absent when the set has a single class.
    pub auc: Option<f64>,
    pub n_samples: usize,
    pub counts: Confusion,
}

pub fn evaluate(
    examples: &[Example],
    params: &ModelParams,
    setting: Setting,
    prompts: &Prompts,
    dataset: &str,
) -> Result<(EvalReport, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::invalid(format!("dataset `{dataset}` is empty")));
    }
    let seqs = examples
        .iter()
        .map(|e| e.sequence(setting, prompts))
        .collect::<Result<Vec<_>>>()?;
    let scores = score_sequences(&seqs, params)?;
    let labels: Vec<Label> = examples.iter().map(|e| e.label).collect();
    let preds: Vec<Label> = scores.iter().map(|&p| decide(p)).collect();
    let m = classification_metrics(&labels, &preds)?;
    let auc = auc(&scores, &labels).ok().map(|a| 100.0 * a);
    Ok((
        EvalReport {
            dataset: dataset.to_string(),
            setting,
            acc: m.acc,
            f1: m.f1,
            auc,
            n_samples: examples.len(),
            counts: m.counts,
        },
        scores,
    ))
}

/// `ACC(fused) - ACC(acoustic_only)` on the same dataset.
pub fn compute_gain(fused: &EvalReport, acoustic: &EvalReport) -> Result<f64> {
    if fused.dataset != acoustic.dataset {
        return Err(Error::invalid(format!(
            "gain compares `{}` with `{}`; datasets must match",
            fused.dataset, acoustic.dataset
        )));
    }
    Ok(fused.acc - acoustic.acc)
}
