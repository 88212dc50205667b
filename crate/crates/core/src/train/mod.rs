//! Optimization, metrics and the modality-ablation harness.

mod ablation;
mod metrics;
mod optimizer;
mod trainer;

pub use ablation::{run_ablation, AblationData, AblationOutcome, AblationReport, DomainGain};
pub use metrics::{auc, classification_metrics, ClassMetrics, Confusion};
pub use optimizer::{adamw_step, lr_at, AdamState, AdamW};
pub use trainer::{
    compute_gain, evaluate, load_examples, score_sequences, train, EvalReport, Example, LossPoint, TrainConfig,
    TrainOutcome,
};
