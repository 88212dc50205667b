//! Named parameter tensors, initialization, freezing and checkpoints.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::error::{Error, Result};

/// Role of a tensor; decides weight decay and LoRA handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Embedding,
    Bias,
    Norm,
    LoraA,
    LoraB,
}

impl ParamKind {
    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(c: u8) -> Option<Self> {
        use ParamKind::*;
        [Weight, Embedding, Bias, Norm, LoraA, LoraB].into_iter().find(|k| k.code() == c)
    }

    /// Decoupled weight decay applies to weight matrices and embeddings only.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Embedding)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub frozen: bool,
    pub value: Array2<f64>,
}

/// One gradient slot per parameter; `None` for frozen tensors.
pub type Grads = Vec<Option<Array2<f64>>>;

/// Handles of a linear layer `y = x W + b (+ s x A^T B^T)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearIds {
    pub w: usize,
    pub b: usize,
    pub lora: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy)]
pub struct LayerIds {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub q: LinearIds,
    pub k: LinearIds,
    pub v: LinearIds,
    pub o: LinearIds,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub ff1: LinearIds,
    pub ff2: LinearIds,
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub aud_w: usize,
    pub aud_b: usize,
    pub patch_w: usize,
    pub patch_b: usize,
    pub vis_row: usize,
    pub vis_col: usize,
    pub align_w: usize,
    pub align_b: usize,
    pub layers: Vec<LayerIds>,
    pub lnf_g: usize,
    pub lnf_b: usize,
    pub head: LinearIds,
}

/// Tensors of the vision encoder and modality aligner; frozen in training.
pub const FROZEN_PREFIXES: [&str; 2] = ["vision.", "aligner."];

/// Weights of the toy model plus LoRA adapters and the freeze mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<Param>,
}

pub(crate) const LINEAR_NAMES: [&str; 6] = ["q", "k", "v", "o", "ff1", "ff2"];

impl ModelParams {
    /// Seeded initialization. LoRA `A` is Gaussian and `B` is zero, so a
    /// fresh adapter leaves the base model unchanged.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.d_model;
        let ff = config.ff_dim();
        let r = config.lora_rank;
        let (grid_r, grid_c) = config.grid();
        let mut tensors = Vec::new();
        let mut add = |name: String, kind: ParamKind, rows: usize, cols: usize, std: f64| {
            let value = if std == 0.0 {
                Array2::zeros((rows, cols))
            } else if kind == ParamKind::Norm {
                Array2::from_elem((rows, cols), std)
            } else {
                let n = Normal::new(0.0, std).unwrap();
                Array2::from_shape_simple_fn((rows, cols), || n.sample(&mut rng))
            };
            let frozen = FROZEN_PREFIXES.iter().any(|p| name.starts_with(p));
            tensors.push(Param { name, kind, frozen, value });
        };
        let inv = |n: usize| 1.0 / (n as f64).sqrt();

        add("tok_emb".into(), ParamKind::Embedding, config.vocab_size, d, 0.02);
        add("pos_emb".into(), ParamKind::Embedding, config.max_seq_len, d, 0.02);
        add("audio.proj.w".into(), ParamKind::Weight, config.n_mels, d, inv(config.n_mels));
        add("audio.proj.b".into(), ParamKind::Bias, 1, d, 0.0);
        add("vision.patch.w".into(), ParamKind::Weight, config.patch_dim(), d, inv(config.patch_dim()));
        add("vision.patch.b".into(), ParamKind::Bias, 1, d, 0.0);
        add("vision.pos_row".into(), ParamKind::Embedding, grid_r, d, 0.02);
        add("vision.pos_col".into(), ParamKind::Embedding, grid_c, d, 0.02);
        add("aligner.w".into(), ParamKind::Weight, d, d, inv(d));
        add("aligner.b".into(), ParamKind::Bias, 1, d, 0.0);
        let out_std = |n: usize| inv(n) / (2.0 * config.n_layers as f64).sqrt();
        for l in 0..config.n_layers {
            let p = format!("layers.{l}.");
            add(format!("{p}ln1.g"), ParamKind::Norm, 1, d, 1.0);
            add(format!("{p}ln1.b"), ParamKind::Bias, 1, d, 0.0);
            for (name, din, dout) in [("q", d, d), ("k", d, d), ("v", d, d), ("o", d, d), ("ff1", d, ff), ("ff2", ff, d)] {
                if name == "ff1" {
                    add(format!("{p}ln2.g"), ParamKind::Norm, 1, d, 1.0);
                    add(format!("{p}ln2.b"), ParamKind::Bias, 1, d, 0.0);
                }
                let std = if name == "o" || name == "ff2" { out_std(din) } else { inv(din) };
                add(format!("{p}{name}.w"), ParamKind::Weight, din, dout, std);
                add(format!("{p}{name}.b"), ParamKind::Bias, 1, dout, 0.0);
                add(format!("{p}{name}.lora_a"), ParamKind::LoraA, r, din, inv(din));
                add(format!("{p}{name}.lora_b"), ParamKind::LoraB, dout, r, 0.0);
            }
        }
        add("ln_f.g".into(), ParamKind::Norm, 1, d, 1.0);
        add("ln_f.b".into(), ParamKind::Bias, 1, d, 0.0);
        add("head.w".into(), ParamKind::Weight, d, config.vocab_size, 0.02);
        add("head.b".into(), ParamKind::Bias, 1, config.vocab_size, 0.0);
        Ok(Self {
            config: config.clone(),
            tensors,
        })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.tensors.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.tensors.iter_mut().find(|p| p.name == name)
    }

    pub fn tensor(&self, name: &str) -> Result<&Param> {
        self.get(name).ok_or_else(|| Error::Format(format!("no tensor named `{name}`")))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.get_mut(name).ok_or_else(|| Error::Format(format!("no tensor named `{name}`")))
    }

    pub fn has_lora(&self) -> bool {
        self.tensors.iter().any(|p| p.kind == ParamKind::LoraA)
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors.iter().filter(|p| !p.frozen).map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        self.tensors
            .iter()
            .map(|p| (!p.frozen).then(|| Array2::zeros(p.value.raw_dim())))
            .collect()
    }

    pub fn layout(&self) -> Result<Layout> {
        let id = |name: &str| {
            self.index_of(name)
                .ok_or_else(|| Error::Format(format!("checkpoint is missing tensor `{name}`")))
        };
        let linear = |prefix: &str| -> Result<LinearIds> {
            let lora = match (self.index_of(&format!("{prefix}.lora_a")), self.index_of(&format!("{prefix}.lora_b"))) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(Error::Format(format!("`{prefix}` has half a LoRA adapter"))),
            };
            Ok(LinearIds {
                w: id(&format!("{prefix}.w"))?,
                b: id(&format!("{prefix}.b"))?,
                lora,
            })
        };
        let layers = (0..self.config.n_layers)
            .map(|l| {
                let p = format!("layers.{l}.");
                Ok(LayerIds {
                    ln1_g: id(&format!("{p}ln1.g"))?,
                    ln1_b: id(&format!("{p}ln1.b"))?,
                    q: linear(&format!("{p}q"))?,
                    k: linear(&format!("{p}k"))?,
                    v: linear(&format!("{p}v"))?,
                    o: linear(&format!("{p}o"))?,
                    ln2_g: id(&format!("{p}ln2.g"))?,
                    ln2_b: id(&format!("{p}ln2.b"))?,
                    ff1: linear(&format!("{p}ff1"))?,
                    ff2: linear(&format!("{p}ff2"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Layout {
            tok_emb: id("tok_emb")?,
            pos_emb: id("pos_emb")?,
            aud_w: id("audio.proj.w")?,
            aud_b: id("audio.proj.b")?,
            patch_w: id("vision.patch.w")?,
            patch_b: id("vision.patch.b")?,
            vis_row: id("vision.pos_row")?,
            vis_col: id("vision.pos_col")?,
            align_w: id("aligner.w")?,
            align_b: id("aligner.b")?,
            layers,
            lnf_g: id("ln_f.g")?,
            lnf_b: id("ln_f.b")?,
            head: LinearIds {
                w: id("head.w")?,
                b: id("head.b")?,
                lora: None,
            },
        })
    }

    /// Checkpoint layout: `SDDCKPT1`, u32 length + JSON config echo, u32
    /// tensor count, then per tensor: u16 name length, name, kind byte,
    /// frozen byte, u32 rows, u32 cols, row-major f32 values. Little-endian.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CKPT_MAGIC);
        let cfg = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for p in &self.tensors {
            out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.push(p.kind.code());
            out.push(p.frozen as u8);
            out.extend_from_slice(&(p.value.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(p.value.ncols() as u32).to_le_bytes());
            for v in p.value.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(b: &[u8]) -> Result<Self> {
        let mut r = Reader { b, pos: 0 };
        if r.take(8)? != CKPT_MAGIC {
            return Err(Error::Format("checkpoint: bad magic".into()));
        }
        let n = r.u32()? as usize;
        let config: ModelConfig = serde_json::from_slice(r.take(n)?)
            .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("checkpoint: tensor name is not UTF-8".into()))?;
            let kind = ParamKind::from_code(r.take(1)?[0])
                .ok_or_else(|| Error::Format(format!("checkpoint: bad kind for `{name}`")))?;
            let frozen = r.take(1)?[0] != 0;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(4 * rows * cols)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let value = Array2::from_shape_vec((rows, cols), data).expect("sizes agree");
            tensors.push(Param { name, kind, frozen, value });
        }
        if r.pos != b.len() {
            return Err(Error::Format("checkpoint: trailing bytes".into()));
        }
        let params = Self { config, tensors };
        params.layout()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_checkpoint_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(&self.to_checkpoint_bytes())
    }
}

const CKPT_MAGIC: &[u8; 8] = b"SDDCKPT1";

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.b.len())
            .ok_or_else(|| Error::Format("checkpoint: truncated".into()))?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
