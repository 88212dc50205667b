//! AdamW with decoupled weight decay and a linear-warmup schedule.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grads, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

/// First and second moments, one slot per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Option<Array2<f64>>>,
    v: Vec<Option<Array2<f64>>>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = params.zero_grads();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One AdamW update at step `t >= 1`:
/// `theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)`, the decay
/// term only for tensors whose kind decays. Frozen tensors are untouched.
/// Gradients are checked for finiteness before anything is modified.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &Grads,
    state: &mut AdamState,
    t: u64,
    lr: f64,
    opt: &AdamW,
) -> Result<()> {
    if t == 0 {
        return Err(Error::invalid("AdamW step index starts at 1"));
    }
    if grads.len() != params.tensors.len() || state.m.len() != params.tensors.len() {
        return Err(Error::Shape("gradient list does not match the parameters".into()));
    }
    for (p, g) in params.tensors.iter().zip(grads) {
        if let Some(g) = g {
            if g.dim() != p.value.dim() {
                return Err(Error::Shape(format!("gradient shape mismatch for `{}`", p.name)));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
    }
    let bc1 = 1.0 - opt.beta1.powi(t as i32);
    let bc2 = 1.0 - opt.beta2.powi(t as i32);
    for (i, p) in params.tensors.iter_mut().enumerate() {
        if p.frozen {
            continue;
        }
        let (Some(g), Some(m), Some(v)) = (&grads[i], state.m[i].as_mut(), state.v[i].as_mut()) else {
            continue;
        };
        m.zip_mut_with(g, |m, &g| *m = opt.beta1 * *m + (1.0 - opt.beta1) * g);
        v.zip_mut_with(g, |v, &g| *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g);
        if p.kind.decays() {
            p.value *= 1.0 - lr * opt.weight_decay;
        }
        ndarray::Zip::from(&mut p.value).and(&*m).and(&*v).for_each(|w, &m, &v| {
            *w -= lr * (m / bc1) / ((v / bc2).sqrt() + opt.eps);
        });
    }
    Ok(())
}

/// Linear ramp from 0 over `floor(warmup_ratio * total)` steps, then
/// constant at `lr`.
pub fn lr_at(step: usize, total: usize, lr: f64, warmup_ratio: f64) -> f64 {
    let warmup = (warmup_ratio * total as f64).floor() as usize;
    if warmup == 0 || step >= warmup {
        lr
    } else {
        lr * step as f64 / warmup as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ParamKind};

    fn params() -> ModelParams {
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            max_seq_len: 8,
            image_width: 16,
            image_height: 16,
            patch_size: 8,
            n_mels: 4,
            ..ModelConfig::default()
        };
        ModelParams::init(&cfg).unwrap()
    }

    #[test]
    fn zero_gradients_only_decay() {
        let mut p = params();
        let before = p.clone();
        let grads = p.zero_grads();
        let mut st = AdamState::new(&p);
        let lr = 1e-2;
        adamw_step(&mut p, &grads, &mut st, 1, lr, &AdamW::default()).unwrap();
        for (a, b) in before.tensors.iter().zip(&p.tensors) {
            if a.frozen || !a.kind.decays() {
                assert_eq!(a.value, b.value, "{}", a.name);
            } else {
                assert_eq!(b.value, &a.value * (1.0 - lr * 0.1), "{}", a.name);
            }
        }
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let mut p = params();
        let idx = p.tensors.iter().position(|t| t.kind == ParamKind::Bias && !t.frozen).unwrap();
        let mut grads = p.zero_grads();
        grads[idx].as_mut().unwrap()[[0, 0]] = 1.0;
        let before = p.tensors[idx].value[[0, 0]];
        let mut st = AdamState::new(&p);
        let opt = AdamW::default();
        let lr = 5e-5;
        adamw_step(&mut p, &grads, &mut st, 1, lr, &opt).unwrap();
        // m_hat = 1, v_hat = 1.
        let expected = before - lr * (1.0 / (1.0 + opt.eps));
        assert!((p.tensors[idx].value[[0, 0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_names_the_tensor() {
        let mut p = params();
        let mut grads = p.zero_grads();
        let idx = grads.iter().position(Option::is_some).unwrap();
        grads[idx].as_mut().unwrap()[[0, 0]] = f64::NAN;
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let e = adamw_step(&mut p, &grads, &mut st, 1, 1e-3, &AdamW::default()).unwrap_err();
        assert!(e.to_string().contains(&before.tensors[idx].name));
        assert_eq!(p, before);
    }

    #[test]
    fn warmup_schedule() {
        assert_eq!(lr_at(0, 500, 5e-5, 0.01), 0.0);
        assert_eq!(lr_at(5, 500, 5e-5, 0.01), 5e-5);
        assert!((lr_at(2, 500, 5e-5, 0.01) - 2e-5).abs() < 1e-20);
        assert_eq!(lr_at(400, 500, 5e-5, 0.01), 5e-5);
        assert_eq!(lr_at(0, 50, 5e-5, 0.01), 5e-5);
    }
}
