//! Per-token importance from multi-head self-attention.
//!
//! Each head's attention `softmax(Q K^T / sqrt(d_h))` is averaged over heads,
//! then averaged over query rows so that token `j` scores the attention it
//! receives. Those raw scores go through a temperature softmax to become an
//! [`ImportanceVector`].

use crate::config::PruneConfig;
use crate::error::{Error, Result};
use crate::types::ImportanceVector;

/// Query and key matrices of every attention head for one slice.
///
/// Each matrix is `tokens x head_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadStack {
    tokens: usize,
    head_dim: usize,
    queries: Vec<Vec<f32>>,
    keys: Vec<Vec<f32>>,
}

impl HeadStack {
    pub fn new(
        tokens: usize,
        head_dim: usize,
        queries: Vec<Vec<f32>>,
        keys: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if tokens == 0 || head_dim == 0 {
            return Err(Error::Invalid(format!(
                "head stack needs positive tokens and head dim, got {tokens}x{head_dim}"
            )));
        }
        if queries.is_empty() || queries.len() != keys.len() {
            return Err(Error::Invalid(format!(
                "head stack needs matching non-empty Q/K heads, got {} and {}",
                queries.len(),
                keys.len()
            )));
        }
        let len = tokens * head_dim;
        for (h, (q, k)) in queries.iter().zip(&keys).enumerate() {
            if q.len() != len || k.len() != len {
                return Err(Error::Invalid(format!(
                    "head {h}: expected {len} values per matrix, got Q={} K={}",
                    q.len(),
                    k.len()
                )));
            }
            if q.iter().chain(k).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("head {h}: non-finite Q/K entry")));
            }
        }
        Ok(Self {
            tokens,
            head_dim,
            queries,
            keys,
        })
    }

    pub fn num_heads(&self) -> usize {
        self.queries.len()
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    pub fn query(&self, head: usize) -> &[f32] {
        &self.queries[head]
    }

    pub fn key(&self, head: usize) -> &[f32] {
        &self.keys[head]
    }
}

/// Embedded patch tokens, `tokens x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatures {
    tokens: usize,
    dim: usize,
    data: Vec<f64>,
}

impl TokenFeatures {
    pub fn new(tokens: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if tokens == 0 || dim == 0 || data.len() != tokens * dim {
            return Err(Error::Invalid(format!(
                "token features {tokens}x{dim} need {} values, got {}",
                tokens * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite token feature".into()));
        }
        Ok(Self { tokens, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("token feature rows differ in length".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// Fills `row` with softmax over `q_row . k_j * scale` for every key row `j`.
fn attention_row(q_row: &[f32], keys: &[f32], head_dim: usize, scale: f64, row: &mut [f64]) {
    for (j, k_row) in keys.chunks_exact(head_dim).enumerate() {
        let dot: f64 = q_row
            .iter()
            .zip(k_row)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        row[j] = dot * scale;
    }
    softmax_in_place(row);
}

/// Row-stochastic attention matrix `softmax(Q K^T / sqrt(head_dim))`, `M x M`
/// row-major.
pub fn head_attention(q: &[f32], k: &[f32], tokens: usize, head_dim: usize) -> Result<Vec<f64>> {
    if tokens == 0 || head_dim == 0 {
        return Err(Error::Invalid("attention needs positive shapes".into()));
    }
    let len = tokens * head_dim;
    if q.len() != len || k.len() != len {
        return Err(Error::Invalid(format!(
            "attention shape mismatch: expected {len} values, got Q={} K={}",
            q.len(),
            k.len()
        )));
    }
    if q.iter().chain(k).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("attention input is not finite".into()));
    }
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut out = vec![0.0; tokens * tokens];
    for (q_row, row) in q.chunks_exact(head_dim).zip(out.chunks_exact_mut(tokens)) {
        attention_row(q_row, k, head_dim, scale, row);
    }
    Ok(out)
}

/// Raw importance: column means of the head-averaged attention matrix, i.e.
/// the average attention each token receives.
pub fn aggregate_importance(stack: &HeadStack) -> Vec<f64> {
    let m = stack.tokens();
    let d = stack.head_dim();
    let scale = 1.0 / (d as f64).sqrt();
    let mut received = vec![0.0; m];
    let mut row = vec![0.0; m];
    for h in 0..stack.num_heads() {
        let keys = stack.key(h);
        for q_row in stack.query(h).chunks_exact(d) {
            attention_row(q_row, keys, d, scale, &mut row);
            for (acc, v) in received.iter_mut().zip(&row) {
                *acc += v;
            }
        }
    }
    let norm = (stack.num_heads() * m) as f64;
    received.iter_mut().for_each(|v| *v /= norm);
    received
}

/// `softmax(scores / temperature)` as an [`ImportanceVector`].
///
/// Weights that underflow to zero are lifted to the smallest positive normal
/// so the vector stays strictly positive.
pub fn temperature_softmax(scores: &[f64], temperature: f64) -> Result<ImportanceVector> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Invalid(format!(
            "temperature must be finite and > 0, got {temperature}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::Invalid("no scores to normalize".into()));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("scores must be finite".into()));
    }
    let mut weights: Vec<f64> = scores.iter().map(|v| v / temperature).collect();
    softmax_in_place(&mut weights);
    for w in &mut weights {
        if *w < f64::MIN_POSITIVE {
            *w = f64::MIN_POSITIVE;
        }
    }
    ImportanceVector::new(weights)
}

/// Importance vector for one slice's head stack.
pub fn slice_importance(stack: &HeadStack, temperature: f64) -> Result<ImportanceVector> {
    temperature_softmax(&aggregate_importance(stack), temperature)
}

/// Deterministic closed-form patch encoder used when no external attention is
/// supplied.
///
/// Patches are flattened row-major and embedded with
/// `W_e[a][b] = sin(a*E + b + 1) / p`. Head `h` projects with
/// `Wq[a][b] = sin(h*E*Dh + a*Dh + b + 1) / sqrt(E)` and the matching `cos`
/// for keys.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    patch_size: usize,
    embed_dim: usize,
    head_dim: usize,
    embed: Vec<f64>,
    query_proj: Vec<Vec<f64>>,
    key_proj: Vec<Vec<f64>>,
}

impl ToyEncoder {
    pub fn new(cfg: &PruneConfig) -> Self {
        let p2 = cfg.patch_size * cfg.patch_size;
        let e = cfg.embed_dim;
        let dh = cfg.head_dim;
        let patch_norm = (p2 as f64).sqrt();
        let mut embed = Vec::with_capacity(p2 * e);
        for a in 0..p2 {
            for b in 0..e {
                embed.push(((a * e + b + 1) as f64).sin() / patch_norm);
            }
        }
        let embed_norm = (e as f64).sqrt();
        let projection = |h: usize, f: fn(f64) -> f64| -> Vec<f64> {
            let mut w = Vec::with_capacity(e * dh);
            for a in 0..e {
                for b in 0..dh {
                    w.push(f((h * e * dh + a * dh + b + 1) as f64) / embed_norm);
                }
            }
            w
        };
        Self {
            patch_size: cfg.patch_size,
            embed_dim: e,
            head_dim: dh,
            embed,
            query_proj: (0..cfg.num_heads)
                .map(|h| projection(h, f64::sin))
                .collect(),
            key_proj: (0..cfg.num_heads)
                .map(|h| projection(h, f64::cos))
                .collect(),
        }
    }

    fn check_shape(&self, pixels: &[f32], height: usize, width: usize) -> Result<()> {
        let p = self.patch_size;
        if height == 0 || width == 0 || !height.is_multiple_of(p) || !width.is_multiple_of(p) {
            return Err(Error::Config(format!(
                "patch size {p} must divide slice dimensions {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::Invalid(format!(
                "slice {height}x{width} needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(())
    }

    /// Embedded patch tokens for one slice.
    pub fn features(&self, pixels: &[f32], height: usize, width: usize) -> Result<TokenFeatures> {
        self.check_shape(pixels, height, width)?;
        let p = self.patch_size;
        let e = self.embed_dim;
        let (grid_rows, grid_cols) = (height / p, width / p);
        let m = grid_rows * grid_cols;
        let mut data = vec![0.0; m * e];
        for gr in 0..grid_rows {
            for gc in 0..grid_cols {
                let token = &mut data[(gr * grid_cols + gc) * e..][..e];
                for pr in 0..p {
                    let row_start = (gr * p + pr) * width + gc * p;
                    for (pc, &x) in pixels[row_start..row_start + p].iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        let x = f64::from(x);
                        let w_row = &self.embed[(pr * p + pc) * e..][..e];
                        for (t, w) in token.iter_mut().zip(w_row) {
                            *t += x * w;
                        }
                    }
                }
            }
        }
        TokenFeatures::new(m, e, data)
    }

    /// Per-head Q/K for already-embedded tokens.
    pub fn project(&self, feats: &TokenFeatures) -> HeadStack {
        let dh = self.head_dim;
        let project = |w: &[f64]| -> Vec<f32> {
            let mut out = Vec::with_capacity(feats.tokens() * dh);
            let mut acc = vec![0.0f64; dh];
            for m in 0..feats.tokens() {
                acc.iter_mut().for_each(|v| *v = 0.0);
                for (a, &t) in feats.row(m).iter().enumerate() {
                    for (v, wv) in acc.iter_mut().zip(&w[a * dh..(a + 1) * dh]) {
                        *v += t * wv;
                    }
                }
                out.extend(acc.iter().map(|&v| v as f32));
            }
            out
        };
        let queries = self.query_proj.iter().map(|w| project(w)).collect();
        let keys = self.key_proj.iter().map(|w| project(w)).collect();
        HeadStack::new(feats.tokens(), dh, queries, keys).expect("projection shapes are consistent")
    }

    pub fn encode(
        &self,
        pixels: &[f32],
        height: usize,
        width: usize,
    ) -> Result<(TokenFeatures, HeadStack)> {
        let feats = self.features(pixels, height, width)?;
        let stack = self.project(&feats);
        Ok((feats, stack))
    }
}

/// One-shot form of [`ToyEncoder::encode`].
pub fn toy_encode(
    pixels: &[f32],
    height: usize,
    width: usize,
    cfg: &PruneConfig,
) -> Result<(TokenFeatures, HeadStack)> {
    ToyEncoder::new(cfg).encode(pixels, height, width)
}
