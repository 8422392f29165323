//! Tracked dynamical quantities at a single time point.
//!
//! Token-pair correlations follow one convention throughout: `S_ab` and
//! `C[a, b]` put token `a` on the key side and token `b` on the query side,
//! i.e. `S_ab = μ_aᵀ W_Kᵀ W_Q μ_b`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Group, TokenId, Vocabulary, COMMON, FIRST_POOL, SIGNAL_1, SIGNAL_2};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::model::{dataset_loss, mlp_heads, ModelParams};

pub const SPECIAL: [TokenId; 3] = [SIGNAL_1, SIGNAL_2, COMMON];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSnapshot {
    pub t: u64,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    /// Mean loss of I1..I4.
    pub group_losses: [f64; 4],
    /// `Σ_{i ∈ I_k} g_i` for I1..I4.
    pub group_gsum: [f64; 4],
    pub min_margin: f64,
    /// `G(μ1), G(μ2), G(μ3)`.
    pub g_special: [f64; 3],
    /// `max |G(μ)|` over the probe tokens.
    pub g_max_rand: f64,
    /// Row-major 3×3, entry `[a][b] = μ_aᵀ W_Kᵀ W_Q μ_b` for a, b ∈ {1, 2, 3}.
    pub score: [f64; 9],
    /// Max `|score|` over tracked pairs touching a probe token.
    pub score_max_rand: f64,
    /// Row-major 3×3 of `μ_aᵀ W_Vᵀ W_V μ_b`.
    pub value_corr: [f64; 9],
    pub kself: [f64; 9],
    pub qself: [f64; 9],
    /// `‖Σ_j a_j w_j‖²`.
    pub neuron_sum: f64,
    /// Means over I1 samples with μ1 as query: attention to μ2, to μ3, and
    /// the average attention to a random-pool key.
    pub softmax_probe: [f64; 3],
    pub radius_k: f64,
    pub radius_q: f64,
    pub radius_s: f64,
    pub radius_p: f64,
}

impl DynamicsSnapshot {
    /// `S_ab` for special tokens `a, b ∈ {1, 2, 3}`.
    pub fn s(&self, a: TokenId, b: TokenId) -> f64 {
        self.score[(a - 1) * 3 + (b - 1)]
    }

    pub fn v(&self, a: TokenId, b: TokenId) -> f64 {
        self.value_corr[(a - 1) * 3 + (b - 1)]
    }

    pub fn g(&self, a: TokenId) -> f64 {
        self.g_special[a - 1]
    }
}

/// Tokens over which correlations and radii are measured: the three special
/// tokens followed by the probe set.
pub fn tracked_set(probe: &[TokenId]) -> Vec<TokenId> {
    let mut t = SPECIAL.to_vec();
    t.extend(probe.iter().copied().filter(|p| !SPECIAL.contains(p)));
    t
}

/// `Aᵀ B` restricted to token pairs, as `[a][b] = (A μ_a) · (B μ_b)`.
fn pair_matrix(left: &Mat, right: &Mat, tokens: &[TokenId], vocab: &Vocabulary) -> Mat {
    let l: Vec<Vec<f64>> = tokens.iter().map(|&t| vocab.project(left, t)).collect();
    let r: Vec<Vec<f64>> = tokens.iter().map(|&t| vocab.project(right, t)).collect();
    Mat::from_fn(tokens.len(), tokens.len(), |a, b| dot(&l[a], &r[b]))
}

fn special_block(m: &Mat) -> [f64; 9] {
    std::array::from_fn(|k| m[(k / 3, k % 3)])
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Largest attention-probability drift over all query/key positions of the
/// I1 samples.
fn softmax_radius(params: &ModelParams, params0: &ModelParams, dataset: &Dataset, vocab: &Vocabulary) -> Result<f64> {
    let mut r: f64 = 0.0;
    for s in dataset.samples.iter().filter(|s| s.group == Group::I1) {
        let (_, p) = crate::model::attention(params, s, vocab)?;
        let (_, p0) = crate::model::attention(params0, s, vocab)?;
        r = r.max(max_abs_diff(&p, &p0));
    }
    Ok(r)
}

fn softmax_probe(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary) -> Result<[f64; 3]> {
    let mut sums = [0.0; 3];
    let mut count = 0usize;
    for s in dataset.samples.iter().filter(|s| s.group == Group::I1) {
        let (Some(q), Some(k2), Some(k3)) = (s.position_of(SIGNAL_1), s.position_of(SIGNAL_2), s.position_of(COMMON))
        else {
            continue;
        };
        let (_, p) = crate::model::attention(params, s, vocab)?;
        sums[0] += p[(k2, q)];
        sums[1] += p[(k3, q)];
        let rand: Vec<f64> = (0..s.len())
            .filter(|&h| s.tokens[h] >= FIRST_POOL)
            .map(|h| p[(h, q)])
            .collect();
        if !rand.is_empty() {
            sums[2] += rand.iter().sum::<f64>() / rand.len() as f64;
        }
        count += 1;
    }
    if count == 0 {
        return Ok([f64::NAN; 3]);
    }
    Ok(sums.map(|v| v / count as f64))
}

/// Computes every tracked quantity from scratch.
pub fn snapshot(
    params: &ModelParams,
    params0: &ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
    t: u64,
    probe: &[TokenId],
    eval: Option<&Dataset>,
) -> Result<DynamicsSnapshot> {
    let train = dataset_loss(params, dataset, vocab)?;
    let test_loss = eval.map(|e| dataset_loss(params, e, vocab).map(|l| l.mean)).transpose()?;

    let tracked = tracked_set(probe);
    let heads = mlp_heads(params, &tracked, vocab);
    let g_max_rand = heads[3..].iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let score = pair_matrix(&params.wk, &params.wq, &tracked, vocab);
    let score0 = pair_matrix(&params0.wk, &params0.wq, &tracked, vocab);
    let kself = pair_matrix(&params.wk, &params.wk, &tracked, vocab);
    let kself0 = pair_matrix(&params0.wk, &params0.wk, &tracked, vocab);
    let qself = pair_matrix(&params.wq, &params.wq, &tracked, vocab);
    let qself0 = pair_matrix(&params0.wq, &params0.wq, &tracked, vocab);
    let value = pair_matrix(&params.wv, &params.wv, &SPECIAL, vocab);

    let mut score_max_rand: f64 = 0.0;
    for a in 0..tracked.len() {
        for b in 0..tracked.len() {
            if a >= 3 || b >= 3 {
                score_max_rand = score_max_rand.max(score[(a, b)].abs());
            }
        }
    }

    let u = params.head_vector();
    Ok(DynamicsSnapshot {
        t,
        train_loss: train.mean,
        test_loss,
        group_losses: train.group_mean,
        group_gsum: train.group_gsum,
        min_margin: train.min_margin,
        g_special: [heads[0], heads[1], heads[2]],
        g_max_rand,
        score: special_block(&score),
        score_max_rand,
        value_corr: special_block(&value),
        kself: special_block(&kself),
        qself: special_block(&qself),
        neuron_sum: dot(&u, &u),
        softmax_probe: softmax_probe(params, dataset, vocab)?,
        radius_k: max_abs_diff(&kself, &kself0),
        radius_q: max_abs_diff(&qself, &qself0),
        radius_s: max_abs_diff(&score, &score0),
        radius_p: softmax_radius(params, params0, dataset, vocab)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionCoeffs {
    pub tracked: Vec<TokenId>,
    /// `C[a, b] = μ_aᵀ (W_Kᵀ W_Q − W_K⁽⁰⁾ᵀ W_Q⁽⁰⁾) μ_b` indexed by position in `tracked`.
    pub c: Mat,
}

impl AttentionCoeffs {
    pub fn get(&self, a: TokenId, b: TokenId) -> Option<f64> {
        let ia = self.tracked.iter().position(|&t| t == a)?;
        let ib = self.tracked.iter().position(|&t| t == b)?;
        Some(self.c[(ia, ib)])
    }

    /// Largest `|C[a, b]|` over pairs where at least one token is outside
    /// the special set.
    pub fn max_abs_random(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (ia, a) in self.tracked.iter().enumerate() {
            for (ib, b) in self.tracked.iter().enumerate() {
                if !SPECIAL.contains(a) || !SPECIAL.contains(b) {
                    m = m.max(self.c[(ia, ib)].abs());
                }
            }
        }
        m
    }
}

pub fn attention_decomposition(
    params: &ModelParams,
    params0: &ModelParams,
    vocab: &Vocabulary,
    tracked: &[TokenId],
) -> Result<AttentionCoeffs> {
    for s in SPECIAL {
        if !tracked.contains(&s) {
            return Err(Error::input(format!("tracked set must contain token {s}")));
        }
    }
    if let Some(&bad) = tracked.iter().find(|&&t| t == 0 || t > vocab.d()) {
        return Err(Error::input(format!("token {bad} outside the vocabulary")));
    }
    let now = pair_matrix(&params.wk, &params.wq, tracked, vocab);
    let then = pair_matrix(&params0.wk, &params0.wq, tracked, vocab);
    let mut c = now;
    c.add_scaled(-1.0, &then);
    if let Some((r, col)) = c.first_non_finite() {
        return Err(Error::numeric("attention coefficients", format!("entry ({r}, {col})")));
    }
    Ok(AttentionCoeffs {
        tracked: tracked.to_vec(),
        c,
    })
}
