//! One-layer softmax attention followed by a linear MLP head.
//!
//! For a sample `X = [x_1 .. x_L]` the output is
//!
//! ```text
//! F(X) = Σ_l Σ_j a_j w_jᵀ V p_l,   p_l = softmax(Xᵀ W_Kᵀ W_Q x_l / √m)
//! ```
//!
//! The `j`-sum collapses through the head vector `u = Wᵀa`, so the head value
//! of a token is `G(μ) = uᵀ W_V μ` and `F = Σ_l Σ_h G(x_h) P[h, l]`.

use crate::data::{Dataset, Sample, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Embedding width of keys, queries and values.
    pub m: usize,
    /// Number of MLP neurons.
    pub m1: usize,
    /// Vocabulary size.
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `m1 × m`, row `j` is `w_jᵀ`.
    pub w: Mat,
    pub wv: Mat,
    pub wk: Mat,
    pub wq: Mat,
    /// Frozen ±1 output signs.
    pub a: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: Dims, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), dims.m1);
        ModelParams {
            w: Mat::zeros(dims.m1, dims.m),
            wv: Mat::zeros(dims.m, dims.d),
            wk: Mat::zeros(dims.m, dims.d),
            wq: Mat::zeros(dims.m, dims.d),
            a,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            m: self.wv.rows(),
            m1: self.w.rows(),
            d: self.wv.cols(),
        }
    }

    /// `u = Wᵀa = Σ_j a_j w_j`.
    pub fn head_vector(&self) -> Vec<f64> {
        self.w.matvec_t(&self.a)
    }

    pub fn validate(&self) -> Result<()> {
        let Dims { m, m1, d } = self.dims();
        let shapes = [
            ("W", self.w.shape(), (m1, m)),
            ("W_V", self.wv.shape(), (m, d)),
            ("W_K", self.wk.shape(), (m, d)),
            ("W_Q", self.wq.shape(), (m, d)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::input(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        if self.a.len() != m1 || self.a.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::input("a must hold m1 entries equal to ±1"));
        }
        for (name, mat) in self.matrices() {
            if let Some((r, c)) = mat.first_non_finite() {
                return Err(Error::numeric(name, format!("entry ({r}, {c}) is not finite")));
            }
        }
        Ok(())
    }

    pub fn matrices(&self) -> [(&'static str, &Mat); 4] {
        [("W", &self.w), ("W_V", &self.wv), ("W_K", &self.wk), ("W_Q", &self.wq)]
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `S[l', l] = k_{l'} · q_l / √m`; column `l` is the score vector of query `l`.
    pub scores: Mat,
    /// Column-stochastic softmax of `scores`.
    pub probs: Mat,
    /// Row `l` is `k_l = W_K x_l`.
    pub keys: Mat,
    /// Row `l` is `q_l = W_Q x_l`.
    pub queries: Mat,
    /// Row `l` is `v_l = W_V x_l`.
    pub values: Mat,
    /// `G(x_h) = uᵀ v_h` for each position.
    pub head: Vec<f64>,
    pub output: f64,
    /// `1 / (1 + exp(y F))`.
    pub g: f64,
}

impl ForwardCache {
    pub fn seq_len(&self) -> usize {
        self.probs.rows()
    }

    /// `Σ_l p_l`, the total attention each key position receives.
    pub fn attention_mass(&self) -> Vec<f64> {
        (0..self.seq_len())
            .map(|h| self.probs.row(h).iter().sum())
            .collect()
    }

    /// `w_jᵀ V p_l` summed with the `a_j` weights: `uᵀ V p_l`.
    pub fn head_at_query(&self, l: usize) -> f64 {
        (0..self.seq_len())
            .map(|h| self.head[h] * self.probs[(h, l)])
            .sum()
    }
}

/// Row `l` of the result is `mat · x_l`.
pub(crate) fn project_tokens(mat: &Mat, tokens: &[TokenId], vocab: &Vocabulary) -> Mat {
    let m = mat.rows();
    let mut out = Mat::zeros(tokens.len(), m);
    for (l, &id) in tokens.iter().enumerate() {
        if vocab.is_canonical() {
            let c = id - 1;
            let row = out.row_mut(l);
            for (r, v) in row.iter_mut().enumerate() {
                *v = mat[(r, c)];
            }
        } else {
            out.row_mut(l).copy_from_slice(&vocab.project(mat, id));
        }
    }
    out
}

/// Column-wise softmax with per-column max subtraction.
pub fn softmax_columns(scores: &Mat) -> Mat {
    let (rows, cols) = scores.shape();
    let mut p = Mat::zeros(rows, cols);
    for c in 0..cols {
        let max = (0..rows).fold(f64::NEG_INFINITY, |m, r| m.max(scores[(r, c)]));
        let mut z = 0.0;
        for r in 0..rows {
            let e = (scores[(r, c)] - max).exp();
            p[(r, c)] = e;
            z += e;
        }
        for r in 0..rows {
            p[(r, c)] /= z;
        }
    }
    p
}

fn scores_from(keys: &Mat, queries: &Mat) -> Result<Mat> {
    let seq_len = keys.rows();
    let scale = 1.0 / (keys.cols() as f64).sqrt();
    let mut s = Mat::zeros(seq_len, seq_len);
    for kp in 0..seq_len {
        for ql in 0..seq_len {
            s[(kp, ql)] = dot(keys.row(kp), queries.row(ql)) * scale;
        }
    }
    if let Some((kp, ql)) = s.first_non_finite() {
        return Err(Error::numeric(
            "attention scores",
            format!("score at key {kp}, query {ql} is {}", s[(kp, ql)]),
        ));
    }
    Ok(s)
}

pub fn attention(params: &ModelParams, sample: &Sample, vocab: &Vocabulary) -> Result<(Mat, Mat)> {
    let keys = project_tokens(&params.wk, &sample.tokens, vocab);
    let queries = project_tokens(&params.wq, &sample.tokens, vocab);
    let s = scores_from(&keys, &queries)?;
    let p = softmax_columns(&s);
    Ok((s, p))
}

/// `G(μ) = Σ_j a_j w_jᵀ W_V μ`.
pub fn mlp_head(params: &ModelParams, token: TokenId, vocab: &Vocabulary) -> f64 {
    dot(&params.head_vector(), &vocab.project(&params.wv, token))
}

/// Head values for many tokens sharing one `u = Wᵀa`.
pub fn mlp_heads(params: &ModelParams, tokens: &[TokenId], vocab: &Vocabulary) -> Vec<f64> {
    let u = params.head_vector();
    tokens
        .iter()
        .map(|&t| dot(&u, &vocab.project(&params.wv, t)))
        .collect()
}

pub fn forward(params: &ModelParams, sample: &Sample, vocab: &Vocabulary) -> Result<ForwardCache> {
    forward_with_head(params, &params.head_vector(), sample, vocab)
}

/// Forward pass with a precomputed head vector `u = Wᵀa`.
pub fn forward_with_head(
    params: &ModelParams,
    u: &[f64],
    sample: &Sample,
    vocab: &Vocabulary,
) -> Result<ForwardCache> {
    let keys = project_tokens(&params.wk, &sample.tokens, vocab);
    let queries = project_tokens(&params.wq, &sample.tokens, vocab);
    let values = project_tokens(&params.wv, &sample.tokens, vocab);
    let scores = scores_from(&keys, &queries)?;
    let probs = softmax_columns(&scores);
    let seq_len = sample.len();
    let head: Vec<f64> = (0..seq_len).map(|h| dot(u, values.row(h))).collect();
    let output: f64 = (0..seq_len)
        .map(|h| head[h] * probs.row(h).iter().sum::<f64>())
        .sum();
    if !output.is_finite() {
        return Err(Error::numeric("forward", format!("output is {output}")));
    }
    let (_, g) = loss(output, sample.y());
    Ok(ForwardCache {
        scores,
        probs,
        keys,
        queries,
        values,
        head,
        output,
        g,
    })
}

/// Logistic loss `log(1 + exp(-yF))` and its weight `g = 1 / (1 + exp(yF))`.
pub fn loss(f: f64, y: f64) -> (f64, f64) {
    let margin = y * f;
    let l = if margin >= 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    };
    let g = if margin >= 0.0 {
        let e = (-margin).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + margin.exp())
    };
    (l, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLoss {
    pub mean: f64,
    /// Mean loss per group (NaN for an empty group).
    pub group_mean: [f64; 4],
    /// `Σ_{i ∈ I_k} g_i`.
    pub group_gsum: [f64; 4],
    pub min_margin: f64,
    pub margins: Vec<f64>,
}

pub fn dataset_loss(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary) -> Result<DatasetLoss> {
    if dataset.is_empty() {
        return Err(Error::input("dataset is empty"));
    }
    let u = params.head_vector();
    let mut total = 0.0;
    let mut group_sum = [0.0; 4];
    let mut group_gsum = [0.0; 4];
    let mut counts = [0usize; 4];
    let mut margins = Vec::with_capacity(dataset.n());
    for s in &dataset.samples {
        let cache = forward_with_head(params, &u, s, vocab)?;
        let (l, g) = loss(cache.output, s.y());
        let k = s.group.index();
        total += l;
        group_sum[k] += l;
        group_gsum[k] += g;
        counts[k] += 1;
        margins.push(s.y() * cache.output);
    }
    let group_mean = std::array::from_fn(|k| {
        if counts[k] == 0 {
            f64::NAN
        } else {
            group_sum[k] / counts[k] as f64
        }
    });
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DatasetLoss {
        mean: total / dataset.n() as f64,
        group_mean,
        group_gsum,
        min_margin,
        margins,
    })
}
