//! ACC, F1 and AUC on a hand-made score list, and the accuracy gain of one
//! setting over another.
//!
//! cargo run --example detection_metrics

use evidence_sdd::render::Label::{Fake as F, Real as R};
use evidence_sdd::train::{auc, classification_metrics};

fn main() -> evidence_sdd::Result<()> {
    let labels = [F, F, F, F, R, R, R, R];
    let scores = [0.91, 0.74, 0.52, 0.31, 0.52, 0.40, 0.22, 0.05];
    // A score of exactly one half counts as fake.
    let predicted: Vec<_> = scores.iter().map(|&s| if s >= 0.5 { F } else { R }).collect();
    let m = classification_metrics(&labels, &predicted)?;
    println!("acc {:.2}  precision {:.2}  recall {:.2}  f1 {:.2}", m.acc, m.precision, m.recall, m.f1);
    println!("confusion {:?}", m.counts);
    println!("auc {:.4} (the tie at 0.52 counts one half)", auc(&scores, &labels)?);

    let acoustic = classification_metrics(&labels, &[F, F, R, R, F, R, R, R])?;
    println!("gain over the second predictor: {:+.2} points", m.acc - acoustic.acc);
    Ok(())
}
