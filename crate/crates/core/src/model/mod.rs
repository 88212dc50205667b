//! Toy audio-language model: byte-level text, pooled log-mel audio tokens
//! and patch-embedded evidence images interleaved into one causal sequence.
//! The vision encoder and aligner are frozen; LoRA adapters wrap every
//! linear layer of the transformer blocks.

mod attention;
mod config;
mod frontend;
mod lora;
mod params;
mod sequence;
pub mod tokenizer;
mod transformer;

pub use attention::{export_attention, region_matrices, AttentionExport, AttentionRecord, HeadSelect, RegionMatrix};
pub use config::ModelConfig;
pub use frontend::{audio_features, encode_audio_tokens, encode_visual_tokens, image_patches, AUDIO_FLOOR_DB};
pub use lora::{effective_weight, lora_apply, lora_merge, LoraAdapter};
pub use params::{Grads, LayerIds, Layout, LinearIds, ModelParams, Param, ParamKind, FROZEN_PREFIXES};
pub use sequence::{
    assemble_from_features, assemble_sequence, label_token, Prompts, Role, SegmentContent, Setting, Span,
    TokenSequence,
};
pub use transformer::{
    decide, forward, loss_and_grad, predict_score, score_from_logits, sft_loss, two_way_softmax, ForwardOutput,
};
