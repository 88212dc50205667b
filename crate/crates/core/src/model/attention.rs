//! Attention maps and their aggregation over segment roles.

use std::io::Write;

use ndarray::Array2;

use super::sequence::{Role, Span, TokenSequence};
use super::transformer::forward;
use super::ModelParams;
use crate::error::{Error, Result};

/// Softmax attention of every layer and head (`L x L`, row = query).
#[derive(Debug, Clone)]
pub struct AttentionRecord {
    spans: Vec<Span>,
    layers: Vec<Vec<Array2<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSelect {
    Head(usize),
    Mean,
}

impl std::fmt::Display for HeadSelect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HeadSelect::Head(h) => write!(f, "{h}"),
            HeadSelect::Mean => f.write_str("mean"),
        }
    }
}

impl std::str::FromStr for HeadSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mean" {
            return Ok(HeadSelect::Mean);
        }
        s.parse()
            .map(HeadSelect::Head)
            .map_err(|_| Error::invalid(format!("head must be an index or `mean`, got `{s}`")))
    }
}

impl AttentionRecord {
    pub(crate) fn new(spans: Vec<Span>, layers: Vec<Vec<Array2<f64>>>) -> Self {
        Self { spans, layers }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_heads(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn map(&self, layer: usize, head: HeadSelect) -> Result<Array2<f64>> {
        let heads = self.layers.get(layer).ok_or_else(|| {
            Error::invalid(format!("layer {layer} out of range (model has {})", self.n_layers()))
        })?;
        match head {
            HeadSelect::Head(h) => heads
                .get(h)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("head {h} out of range (model has {})", heads.len()))),
            HeadSelect::Mean => {
                let mut acc = Array2::zeros(heads[0].raw_dim());
                for m in heads {
                    acc += m;
                }
                Ok(acc / heads.len() as f64)
            }
        }
    }
}

/// Role-by-role summaries of one attention map.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMatrix {
    pub roles: Vec<Role>,
    /// Mean of the full-map block `(a, b)`, masked entries included as 0.
    pub block_mean: Array2<f64>,
    /// Mean over queries in `a` of the attention mass they place on `b`;
    /// each row sums to 1.
    pub mass: Array2<f64>,
}

pub fn region_matrices(map: &Array2<f64>, spans: &[Span]) -> RegionMatrix {
    let n = spans.len();
    let mut block_mean = Array2::zeros((n, n));
    let mut mass = Array2::zeros((n, n));
    for (a, sa) in spans.iter().enumerate() {
        for (b, sb) in spans.iter().enumerate() {
            let block = map.slice(ndarray::s![sa.start..sa.end(), sb.start..sb.end()]);
            let total = block.sum();
            block_mean[[a, b]] = total / (sa.len * sb.len) as f64;
            mass[[a, b]] = total / sa.len as f64;
        }
    }
    RegionMatrix {
        roles: spans.iter().map(|s| s.role).collect(),
        block_mean,
        mass,
    }
}

#[derive(Debug, Clone)]
pub struct AttentionExport {
    pub layer: usize,
    pub head: HeadSelect,
    pub spans: Vec<Span>,
    pub full: Array2<f64>,
    pub regions: RegionMatrix,
}

pub fn export_attention(
    seq: &TokenSequence,
    params: &ModelParams,
    layer: usize,
    head: HeadSelect,
) -> Result<AttentionExport> {
    let record = forward(seq, params)?.attention;
    let full = record.map(layer, head)?;
    let regions = region_matrices(&full, record.spans());
    Ok(AttentionExport {
        layer,
        head,
        spans: record.spans,
        full,
        regions,
    })
}

impl AttentionExport {
    /// Full map: header `query,role,k1..kL`, one row per query position
    /// (positions are one-based).
    pub fn write_full_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let roles: Vec<Role> = self.spans.iter().flat_map(|s| std::iter::repeat_n(s.role, s.len)).collect();
        write!(w, "query,role")?;
        for j in 0..self.full.ncols() {
            write!(w, ",k{}", j + 1)?;
        }
        writeln!(w)?;
        for (i, row) in self.full.rows().into_iter().enumerate() {
            write!(w, "{},{}", i + 1, roles[i])?;
            for v in row {
                write!(w, ",{v:.8e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Region matrices with a `measure` column (`block_mean` or `mass`)
    /// and one column per role.
    pub fn write_region_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let roles = &self.regions.roles;
        write!(w, "measure,from")?;
        for r in roles {
            write!(w, ",{r}")?;
        }
        writeln!(w)?;
        for (name, m) in [("block_mean", &self.regions.block_mean), ("mass", &self.regions.mass)] {
            for (a, row) in m.rows().into_iter().enumerate() {
                write!(w, "{name},{}", roles[a])?;
                for v in row {
                    write!(w, ",{v:.8e}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
