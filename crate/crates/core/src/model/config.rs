use serde::{Deserialize, Serialize};

use super::tokenizer::VOCAB_SIZE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ff_mult: usize,
    pub vocab_size: usize,
    /// Mel bands of the audio frontend.
    pub n_mels: usize,
    pub audio_window: usize,
    pub audio_hop: usize,
    pub audio_n_fft: usize,
    /// Mel frames pooled into one audio token.
    pub token_stride: usize,
    pub patch_size: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub max_seq_len: usize,
    pub lora_rank: usize,
    pub lora_alpha: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            ff_mult: 4,
            vocab_size: VOCAB_SIZE,
            n_mels: 40,
            audio_window: 400,
            audio_hop: 160,
            audio_n_fft: 512,
            token_stride: 4,
            patch_size: 16,
            image_width: 224,
            image_height: 224,
            max_seq_len: 768,
            lora_rank: 4,
            lora_alpha: 8.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// The small model the synthetic-corpus experiments run on one CPU:
    /// d = 32, 64x64 evidence images cut into 16 patches.
    pub fn desk_scale() -> Self {
        Self {
            d_model: 32,
            image_width: 64,
            image_height: 64,
            max_seq_len: 256,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!("d_model {} must be a positive multiple of n_heads {}", self.d_model, self.n_heads));
        }
        if self.n_layers == 0 || self.ff_mult == 0 {
            return fail("n_layers and ff_mult must be positive".into());
        }
        if self.vocab_size != VOCAB_SIZE {
            return fail(format!("vocab_size must be {VOCAB_SIZE} for the byte-level tokenizer"));
        }
        if self.patch_size == 0 || !self.image_width.is_multiple_of(self.patch_size) || !self.image_height.is_multiple_of(self.patch_size) {
            return fail(format!(
                "patch size {} must divide the image size {}x{}",
                self.patch_size, self.image_width, self.image_height
            ));
        }
        if self.token_stride == 0 || self.n_mels < 2 || self.max_seq_len == 0 {
            return fail("token_stride, max_seq_len must be positive and n_mels at least 2".into());
        }
        if self.lora_rank == 0 {
            return fail("lora_rank must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ff_dim(&self) -> usize {
        self.d_model * self.ff_mult
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.image_height / self.patch_size, self.image_width / self.patch_size)
    }

    pub fn n_visual_tokens(&self) -> usize {
        let (r, c) = self.grid();
        r * c
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn lora_scale(&self) -> f64 {
        self.lora_alpha / self.lora_rank as f64
    }
}
