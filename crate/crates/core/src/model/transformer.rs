//! Pre-norm causal transformer with hand-written backward pass.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::attention::AttentionRecord;
use super::params::{Grads, LayerIds, Layout, LinearIds};
use super::sequence::{label_token, SegmentContent, TokenSequence};
use super::tokenizer::{FAKE, REAL};
use super::ModelParams;
use crate::error::{Error, Result};
use crate::render::Label;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + (GELU_C * (u + 0.044_715 * u * u * u)).tanh())
}

fn gelu_grad(u: f64) -> f64 {
    let t = (GELU_C * (u + 0.044_715 * u * u * u)).tanh();
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044_715 * u * u)
}

fn accumulate(grads: &mut Grads, id: usize, g: impl FnOnce() -> Array2<f64>) {
    if let Some(slot) = grads[id].as_mut() {
        *slot += &g();
    }
}

struct Linear<'a> {
    ids: LinearIds,
    w: &'a Array2<f64>,
    b: &'a Array2<f64>,
    lora: Option<(&'a Array2<f64>, &'a Array2<f64>)>,
    scale: f64,
}

impl<'a> Linear<'a> {
    fn new(params: &'a ModelParams, ids: LinearIds) -> Self {
        Self {
            ids,
            w: &params.tensors[ids.w].value,
            b: &params.tensors[ids.b].value,
            lora: ids.lora.map(|(a, b)| (&params.tensors[a].value, &params.tensors[b].value)),
            scale: params.config.lora_scale(),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(self.w) + self.b.row(0);
        if let Some((a, b)) = self.lora {
            y.scaled_add(self.scale, &x.dot(&a.t()).dot(&b.t()));
        }
        y
    }

    fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grads: &mut Grads) -> Array2<f64> {
        accumulate(grads, self.ids.w, || x.t().dot(dy));
        accumulate(grads, self.ids.b, || dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut dx = dy.dot(&self.w.t());
        if let (Some((a, b)), Some((ia, ib))) = (self.lora, self.ids.lora) {
            let dz = dy.dot(b) * self.scale;
            accumulate(grads, ib, || dy.t().dot(&x.dot(&a.t())) * self.scale);
            accumulate(grads, ia, || dz.t().dot(x));
            dx += &dz.dot(a);
        }
        dx
    }
}

struct LnCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn ln_forward(x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>) -> (Array2<f64>, LnCache) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.dot(&row) / d;
        *r = 1.0 / (var + LN_EPS).sqrt();
        row *= *r;
    }
    let y = &xhat * &g.row(0) + b.row(0);
    (y, LnCache { xhat, rstd })
}

fn ln_backward(dy: &Array2<f64>, c: &LnCache, g: &Array2<f64>, ids: (usize, usize), grads: &mut Grads) -> Array2<f64> {
    accumulate(grads, ids.0, || (dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
    accumulate(grads, ids.1, || dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
    let d = dy.ncols() as f64;
    let mut dx = dy * &g.row(0);
    for ((mut row, xh), &r) in dx.rows_mut().into_iter().zip(c.xhat.rows()).zip(&c.rstd) {
        let m1 = row.sum() / d;
        let m2 = row.dot(&xh) / d;
        row.zip_mut_with(&xh, |v, &x| *v = r * (*v - m1 - x * m2));
    }
    dx
}

struct BlockCache {
    ln1: LnCache,
    h1: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    o_cat: Array2<f64>,
    ln2: LnCache,
    h2: Array2<f64>,
    u: Array2<f64>,
    act: Array2<f64>,
}

/// Row-wise causal softmax of `q k^T / sqrt(d_h)`; future entries are exactly 0.
fn causal_softmax(q: ArrayView2, k: ArrayView2) -> Array2<f64> {
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut p = q.dot(&k.t()) * scale;
    for (i, mut row) in p.rows_mut().into_iter().enumerate() {
        let max = row.slice(s![..=i]).fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.slice_mut(s![..=i]).iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.slice_mut(s![..=i]).mapv_inplace(|v| v / sum);
        row.slice_mut(s![i + 1..]).fill(0.0);
    }
    p
}

type ArrayView2<'a> = ndarray::ArrayView2<'a, f64>;

fn block_forward(x: &Array2<f64>, ids: &LayerIds, params: &ModelParams) -> (Array2<f64>, BlockCache) {
    let t = &params.tensors;
    let n_heads = params.config.n_heads;
    let dh = params.config.head_dim();
    let (h1, ln1) = ln_forward(x, &t[ids.ln1_g].value, &t[ids.ln1_b].value);
    let q = Linear::new(params, ids.q).forward(&h1);
    let k = Linear::new(params, ids.k).forward(&h1);
    let v = Linear::new(params, ids.v).forward(&h1);
    let mut o_cat = Array2::zeros(x.raw_dim());
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let p = causal_softmax(q.slice(cols), k.slice(cols));
        o_cat.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        probs.push(p);
    }
    let mid = x + &Linear::new(params, ids.o).forward(&o_cat);
    let (h2, ln2) = ln_forward(&mid, &t[ids.ln2_g].value, &t[ids.ln2_b].value);
    let u = Linear::new(params, ids.ff1).forward(&h2);
    let act = u.mapv(gelu);
    let out = &mid + &Linear::new(params, ids.ff2).forward(&act);
    let cache = BlockCache {
        ln1,
        h1,
        q,
        k,
        v,
        probs,
        o_cat,
        ln2,
        h2,
        u,
        act,
    };
    (out, cache)
}

fn block_backward(dout: &Array2<f64>, c: &BlockCache, ids: &LayerIds, params: &ModelParams, grads: &mut Grads) -> Array2<f64> {
    let t = &params.tensors;
    let dh = params.config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let dact = Linear::new(params, ids.ff2).backward(&c.act, dout, grads);
    let mut du = dact;
    du.zip_mut_with(&c.u, |g, &u| *g *= gelu_grad(u));
    let dh2 = Linear::new(params, ids.ff1).backward(&c.h2, &du, grads);
    let dmid = dout + &ln_backward(&dh2, &c.ln2, &t[ids.ln2_g].value, (ids.ln2_g, ids.ln2_b), grads);

    let do_cat = Linear::new(params, ids.o).backward(&c.o_cat, &dmid, grads);
    let mut dq = Array2::zeros(c.q.raw_dim());
    let mut dk = Array2::zeros(c.k.raw_dim());
    let mut dv = Array2::zeros(c.v.raw_dim());
    for (h, p) in c.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dout_h = do_cat.slice(cols);
        let dp = dout_h.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dout_h));
        let mut ds = dp;
        for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
            let inner = row.dot(&prow);
            row.zip_mut_with(&prow, |g, &pv| *g = pv * (*g - inner));
        }
        dq.slice_mut(cols).assign(&(ds.dot(&c.k.slice(cols)) * scale));
        dk.slice_mut(cols).assign(&(ds.t().dot(&c.q.slice(cols)) * scale));
    }
    let mut dh1 = Linear::new(params, ids.q).backward(&c.h1, &dq, grads);
    dh1 += &Linear::new(params, ids.k).backward(&c.h1, &dk, grads);
    dh1 += &Linear::new(params, ids.v).backward(&c.h1, &dv, grads);
    dmid + ln_backward(&dh1, &c.ln1, &t[ids.ln1_g].value, (ids.ln1_g, ids.ln1_b), grads)
}

struct Trace {
    blocks: Vec<BlockCache>,
    ln_f: LnCache,
    hidden: Array2<f64>,
}

fn run(seq: &TokenSequence, params: &ModelParams, layout: &Layout) -> Result<Trace> {
    let n = seq.len();
    if n > params.config.max_seq_len {
        return Err(Error::invalid(format!(
            "sequence length {n} exceeds max_seq_len {}",
            params.config.max_seq_len
        )));
    }
    let mut x = seq.embeddings(params)?;
    x += &params.tensors[layout.pos_emb].value.slice(s![..n, ..]);
    let mut blocks = Vec::with_capacity(layout.layers.len());
    for ids in &layout.layers {
        let (y, cache) = block_forward(&x, ids, params);
        blocks.push(cache);
        x = y;
    }
    let t = &params.tensors;
    let (hidden, ln_f) = ln_forward(&x, &t[layout.lnf_g].value, &t[layout.lnf_b].value);
    Ok(Trace { blocks, ln_f, hidden })
}

fn head_logits(hidden: ArrayView1<f64>, params: &ModelParams, layout: &Layout) -> Array1<f64> {
    hidden.dot(&params.tensors[layout.head.w].value) + params.tensors[layout.head.b].value.row(0)
}

pub struct ForwardOutput {
    /// `L x V` next-token logits.
    pub logits: Array2<f64>,
    pub attention: AttentionRecord,
}

pub fn forward(seq: &TokenSequence, params: &ModelParams) -> Result<ForwardOutput> {
    let layout = params.layout()?;
    let trace = run(seq, params, &layout)?;
    let t = &params.tensors;
    let logits = trace.hidden.dot(&t[layout.head.w].value) + t[layout.head.b].value.row(0);
    let layers = trace.blocks.into_iter().map(|b| b.probs).collect();
    Ok(ForwardOutput {
        logits,
        attention: AttentionRecord::new(seq.spans().to_vec(), layers),
    })
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of `targets[i]` under the distribution in
/// row `positions[i]` of `logits`.
pub fn sft_loss(logits: &Array2<f64>, targets: &[u32], positions: &[usize]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::invalid("empty answer span"));
    }
    if targets.len() != positions.len() {
        return Err(Error::invalid("answer targets and positions differ in length"));
    }
    let mut total = 0.0;
    for (&t, &p) in targets.iter().zip(positions) {
        if p >= logits.nrows() || t as usize >= logits.ncols() {
            return Err(Error::invalid(format!("answer at row {p}, token {t} is out of range")));
        }
        let row = logits.row(p);
        total += log_sum_exp(row) - row[t as usize];
    }
    Ok(total / targets.len() as f64)
}

/// Two-way softmax over the REAL and FAKE logits: `(p_real, p_fake)`.
/// The smaller probability is computed directly and the larger as its
/// complement, so the pair sums to exactly 1.
pub fn two_way_softmax(z_real: f64, z_fake: f64) -> (f64, f64) {
    if z_fake >= z_real {
        let p_real = 1.0 / (1.0 + (z_fake - z_real).exp());
        (p_real, 1.0 - p_real)
    } else {
        let p_fake = 1.0 / (1.0 + (z_real - z_fake).exp());
        (1.0 - p_fake, p_fake)
    }
}

/// `p_fake` from one row of logits; other vocabulary entries are ignored.
pub fn score_from_logits(row: ArrayView1<f64>) -> f64 {
    two_way_softmax(row[REAL as usize], row[FAKE as usize]).1
}

/// Decision rule: fake iff `p_fake >= 0.5`.
pub fn decide(p_fake: f64) -> Label {
    if p_fake >= 0.5 {
        Label::Fake
    } else {
        Label::Real
    }
}

/// `p_fake` at the query position (the row predicting the first answer token).
pub fn predict_score(seq: &TokenSequence, params: &ModelParams) -> Result<f64> {
    let layout = params.layout()?;
    let trace = run(seq, params, &layout)?;
    let row = head_logits(trace.hidden.row(seq.query_position()), params, &layout);
    Ok(score_from_logits(row.view()))
}

/// Loss on the label token and gradients scaled by `weight`, added into
/// `grads`. Returns `(loss, p_fake)`.
pub fn loss_and_grad(
    seq: &TokenSequence,
    label: Label,
    params: &ModelParams,
    layout: &Layout,
    grads: &mut Grads,
    weight: f64,
) -> Result<(f64, f64)> {
    let trace = run(seq, params, layout)?;
    let qpos = seq.query_position();
    let hq = trace.hidden.row(qpos);
    let logits = head_logits(hq, params, layout);
    let target = label_token(label) as usize;
    let lse = log_sum_exp(logits.view());
    let loss = lse - logits[target];
    let p_fake = score_from_logits(logits.view());

    let mut dlogits = logits.mapv(|z| (z - lse).exp());
    dlogits[target] -= 1.0;
    dlogits *= weight;
    let t = &params.tensors;
    accumulate(grads, layout.head.w, || {
        hq.to_owned().insert_axis(Axis(1)).dot(&dlogits.view().insert_axis(Axis(0)))
    });
    accumulate(grads, layout.head.b, || dlogits.clone().insert_axis(Axis(0)));
    let mut dhidden = Array2::zeros(trace.hidden.raw_dim());
    dhidden.row_mut(qpos).assign(&t[layout.head.w].value.dot(&dlogits));

    let mut dx = ln_backward(&dhidden, &trace.ln_f, &t[layout.lnf_g].value, (layout.lnf_g, layout.lnf_b), grads);
    for (cache, ids) in trace.blocks.iter().zip(&layout.layers).rev() {
        dx = block_backward(&dx, cache, ids, params, grads);
    }
    embedding_backward(seq, &dx, layout, grads);
    Ok((loss, p_fake))
}

fn embedding_backward(seq: &TokenSequence, dx: &Array2<f64>, layout: &Layout, grads: &mut Grads) {
    let n = seq.len();
    if let Some(g) = grads[layout.pos_emb].as_mut() {
        let mut rows = g.slice_mut(s![..n, ..]);
        rows += dx;
    }
    for ((_, content), span) in seq.segments().iter().zip(seq.spans()) {
        let block = dx.slice(s![span.start..span.end(), ..]);
        match content {
            SegmentContent::Text(ids) => {
                if let Some(g) = grads[layout.tok_emb].as_mut() {
                    for (r, &id) in ids.iter().enumerate() {
                        let mut row = g.row_mut(id as usize);
                        row += &block.row(r);
                    }
                }
            }
            SegmentContent::Audio(f) => {
                accumulate(grads, layout.aud_w, || f.t().dot(&block));
                accumulate(grads, layout.aud_b, || block.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            // The visual path is frozen end to end.
            SegmentContent::Visual(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sequence::{Role, SegmentContent};
    use crate::model::ModelConfig;
    use proptest::prelude::*;

    fn tiny() -> ModelParams {
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            max_seq_len: 16,
            image_width: 16,
            image_height: 16,
            patch_size: 8,
            n_mels: 4,
            ..ModelConfig::default()
        };
        ModelParams::init(&cfg).unwrap()
    }

    fn seq(ids: Vec<u32>) -> TokenSequence {
        TokenSequence::from_segments(vec![(Role::Sys, SegmentContent::Text(ids))]).unwrap()
    }

    #[test]
    fn logits_shape_and_overlength() {
        let p = tiny();
        let out = forward(&seq(vec![7]), &p).unwrap();
        assert_eq!(out.logits.dim(), (1, 261));
        assert!(forward(&seq(vec![1; 17]), &p).is_err());
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let logits = Array2::zeros((3, 261));
        let l = sft_loss(&logits, &[REAL, FAKE], &[1, 2]).unwrap();
        assert!((l - (261f64).ln()).abs() < 1e-12);
        assert!(sft_loss(&logits, &[], &[]).is_err());
        assert!(sft_loss(&logits, &[REAL], &[3]).is_err());
    }

    #[test]
    fn dominant_correct_logit_drives_loss_to_zero() {
        let mut logits = Array2::zeros((1, 261));
        logits[[0, FAKE as usize]] = 1e6;
        assert!(sft_loss(&logits, &[FAKE], &[0]).unwrap() < 1e-12);
    }

    #[test]
    fn tie_is_fake() {
        assert_eq!(two_way_softmax(0.3, 0.3), (0.5, 0.5));
        assert_eq!(decide(0.5), Label::Fake);
        assert_eq!(decide(0.499_999), Label::Real);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for u in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (gelu(u + h) - gelu(u - h)) / (2.0 * h);
            assert!((fd - gelu_grad(u)).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn two_way_probabilities_sum_to_one(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let (r, f) = two_way_softmax(a, b);
            prop_assert_eq!(r + f, 1.0);
            prop_assert!((0.0..=1.0).contains(&f));
        }

        #[test]
        fn score_ignores_other_logits(noise in proptest::collection::vec(-10.0f64..10.0, 261)) {
            let mut row = Array1::from(noise);
            let base = score_from_logits(row.view());
            row[0] += 5.0;
            row[260] -= 3.0;
            prop_assert_eq!(score_from_logits(row.view()), base);
        }
    }
}
