//! Modality ablation: the three input settings trained under one budget and
//! evaluated in-domain and under domain shift.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trainer::{compute_gain, evaluate, train, EvalReport, Example, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams, Prompts, Setting};

pub struct AblationData<'a> {
    pub train: &'a [Example],
    pub in_domain: (&'a str, &'a [Example]),
    pub shifted: (&'a str, &'a [Example]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGain {
    pub dataset: String,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// Settings in `Setting::ALL` order, in-domain dataset first.
    pub rows: Vec<EvalReport>,
    pub gains: Vec<DomainGain>,
    /// Optimizer steps each setting ran.
    pub steps: Vec<(Setting, usize)>,
}

pub struct AblationOutcome {
    pub report: AblationReport,
    pub checkpoints: Vec<(Setting, ModelParams)>,
}

/// Trains every setting from the same initialization seed and data order,
/// then evaluates each on both datasets.
pub fn run_ablation(
    data: &AblationData<'_>,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    prompts: &Prompts,
) -> Result<AblationOutcome> {
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut checkpoints = Vec::new();
    let model = ModelConfig {
        seed: train_cfg.seed,
        ..model.clone()
    };
    for setting in Setting::ALL {
        let cfg = TrainConfig {
            setting,
            ..train_cfg.clone()
        };
        let out = train(data.train, ModelParams::init(&model)?, &cfg, prompts)?;
        for (name, examples) in [data.in_domain, data.shifted] {
            rows.push(evaluate(examples, &out.params, setting, prompts, name)?.0);
        }
        steps.push((setting, out.steps_run));
        checkpoints.push((setting, out.params));
    }
    let mut report = AblationReport {
        rows,
        gains: Vec::new(),
        steps,
    };
    for name in [data.in_domain.0, data.shifted.0] {
        let gain = compute_gain(report.row(name, Setting::Fused)?, report.row(name, Setting::AcousticOnly)?)?;
        report.gains.push(DomainGain {
            dataset: name.to_string(),
            gain,
        });
    }
    Ok(AblationOutcome { report, checkpoints })
}

impl AblationReport {
    pub fn row(&self, dataset: &str, setting: Setting) -> Result<&EvalReport> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.setting == setting)
            .ok_or_else(|| Error::invalid(format!("no {setting} result for `{dataset}`")))
    }

    pub fn gain(&self, dataset: &str) -> Option<f64> {
        self.gains.iter().find(|g| g.dataset == dataset).map(|g| g.gain)
    }

    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.dataset) {
                out.push(r.dataset.clone());
            }
        }
        out
    }

    /// Accuracy lost by `setting` going from `from` to `to`.
    pub fn accuracy_drop(&self, setting: Setting, from: &str, to: &str) -> Result<f64> {
        Ok(self.row(from, setting)?.acc - self.row(to, setting)?.acc)
    }

    /// Long-format CSV (`dataset,setting,acc,f1,auc,n_samples,tp,fp,tn,fn`),
    /// one `gain` row per dataset with the value in the `acc` column.
    pub fn write_csv<W: Write>(&self, mut w: W, config_echo: &str, seed: u64) -> std::io::Result<()> {
        for line in config_echo.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# seed = {seed}")?;
        writeln!(w, "dataset,setting,acc,f1,auc,n_samples,tp,fp,tn,fn")?;
        for r in &self.rows {
            let auc = r.auc.map(|a| format!("{a:.4}")).unwrap_or_default();
            let c = r.counts;
            writeln!(
                w,
                "{},{},{:.4},{:.4},{},{},{},{},{},{}",
                r.dataset, r.setting, r.acc, r.f1, auc, r.n_samples, c.tp, c.fp, c.tn, c.fn_
            )?;
        }
        for g in &self.gains {
            writeln!(w, "{},gain,{:.4},,,,,,,", g.dataset, g.gain)?;
        }
        Ok(())
    }

    /// Aligned text table: one row per input setting, ACC/F1/AUC per
    /// dataset, and a final Gain row.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let datasets = self.datasets();
        write!(w, "{:<16}", "Input setting")?;
        for d in &datasets {
            write!(w, " | {:^26}", d)?;
        }
        writeln!(w)?;
        write!(w, "{:<16}", "")?;
        for _ in &datasets {
            write!(w, " | {:>8} {:>8} {:>8}", "ACC", "F1", "AUC")?;
        }
        writeln!(w)?;
        for s in Setting::ALL {
            write!(w, "{:<16}", s.as_str())?;
            for d in &datasets {
                match self.row(d, s) {
                    Ok(r) => {
                        let auc = r.auc.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into());
                        write!(w, " | {:>8.2} {:>8.2} {:>8}", r.acc, r.f1, auc)?
                    }
                    Err(_) => write!(w, " | {:>8} {:>8} {:>8}", "-", "-", "-")?,
                }
            }
            writeln!(w)?;
        }
        write!(w, "{:<16}", "Gain")?;
        for d in &datasets {
            let g = self.gain(d).map(|g| format!("{g:+.2}")).unwrap_or_else(|| "-".into());
            write!(w, " | {:>8} {:>8} {:>8}", g, "", "")?;
        }
        writeln!(w)
    }
}
