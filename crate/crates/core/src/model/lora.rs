//! Low-rank adapters on linear layers.
//!
//! Linear weights are stored input-major (`d_in x d_out`, applied as `x W`),
//! so the adapted weight is `W + s (B A)^T` with `A: r x d_in`,
//! `B: d_out x r` and `s = alpha / r`.

use ndarray::{Array1, Array2};

use super::params::{ModelParams, ParamKind, LINEAR_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub scale: f64,
}

impl LoraAdapter {
    pub fn new(a: Array2<f64>, b: Array2<f64>, scale: f64) -> Result<Self> {
        if a.nrows() != b.ncols() || a.nrows() == 0 {
            return Err(Error::Shape(format!(
                "LoRA rank mismatch: A is {}x{}, B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, scale })
    }

    /// Adapter with `B = 0`.
    pub fn zeros(rank: usize, d_in: usize, d_out: usize, scale: f64) -> Self {
        Self {
            a: Array2::zeros((rank, d_in)),
            b: Array2::zeros((d_out, rank)),
            scale,
        }
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.a.len() + self.b.len()
    }

    /// The `d_in x d_out` update `s (B A)^T`.
    pub fn delta(&self) -> Array2<f64> {
        self.a.t().dot(&self.b.t()) * self.scale
    }

    fn check(&self, w: &Array2<f64>) -> Result<()> {
        if self.a.ncols() != w.nrows() || self.b.nrows() != w.ncols() {
            return Err(Error::Shape(format!(
                "adapter {}→{} does not fit a {}x{} linear layer",
                self.a.ncols(),
                self.b.nrows(),
                w.nrows(),
                w.ncols()
            )));
        }
        Ok(())
    }
}

/// `x W + b + s (x A^T) B^T`, without materializing the merged weight.
pub fn lora_apply(
    x: &Array2<f64>,
    w: &Array2<f64>,
    bias: &Array1<f64>,
    adapter: Option<&LoraAdapter>,
) -> Result<Array2<f64>> {
    if x.ncols() != w.nrows() || bias.len() != w.ncols() {
        return Err(Error::Shape(format!(
            "input width {} / bias {} do not fit a {}x{} weight",
            x.ncols(),
            bias.len(),
            w.nrows(),
            w.ncols()
        )));
    }
    let mut y = x.dot(w) + bias;
    if let Some(ad) = adapter {
        ad.check(w)?;
        y.scaled_add(ad.scale, &x.dot(&ad.a.t()).dot(&ad.b.t()));
    }
    Ok(y)
}

pub fn effective_weight(w: &Array2<f64>, adapter: &LoraAdapter) -> Result<Array2<f64>> {
    adapter.check(w)?;
    Ok(w + &adapter.delta())
}

/// Folds every adapter into its base weight and drops the adapter tensors.
pub fn lora_merge(params: &ModelParams) -> Result<ModelParams> {
    let mut out = params.clone();
    let scale = params.config.lora_scale();
    for l in 0..params.config.n_layers {
        for name in LINEAR_NAMES {
            let prefix = format!("layers.{l}.{name}");
            let (Some(a), Some(b)) = (
                params.get(&format!("{prefix}.lora_a")),
                params.get(&format!("{prefix}.lora_b")),
            ) else {
                continue;
            };
            let adapter = LoraAdapter::new(a.value.clone(), b.value.clone(), scale)?;
            let w = out
                .get_mut(&format!("{prefix}.w"))
                .ok_or_else(|| Error::Format(format!("missing base weight for `{prefix}`")))?;
            w.value = effective_weight(&w.value, &adapter)?;
        }
    }
    out.tensors.retain(|p| !matches!(p.kind, ParamKind::LoraA | ParamKind::LoraB));
    Ok(out)
}
