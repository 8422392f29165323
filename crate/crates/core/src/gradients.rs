//! Closed-form gradient flow of the empirical loss, a central-difference
//! oracle, and the right-hand sides of the tracked dynamical system.
//!
//! Everything here is in flow convention: a [`Gradients`] value holds
//! `∂θ/∂t = -∇_θ L̂`, so a gradient-descent step is `θ ← θ + η · dθ`.

use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Mat};
use crate::model::{dataset_loss, forward_with_head, ForwardCache, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Mat,
    pub wv: Mat,
    pub wk: Mat,
    pub wq: Mat,
}

impl Gradients {
    pub fn matrices(&self) -> [(&'static str, &Mat); 4] {
        [("W", &self.w), ("W_V", &self.wv), ("W_K", &self.wk), ("W_Q", &self.wq)]
    }

    pub fn norms(&self) -> [f64; 4] {
        [self.w.frobenius(), self.wv.frobenius(), self.wk.frobenius(), self.wq.frobenius()]
    }

    fn check_finite(&self) -> Result<()> {
        for (name, m) in self.matrices() {
            if let Some((r, c)) = m.first_non_finite() {
                return Err(Error::numeric(
                    format!("gradient of {name}"),
                    format!("entry ({r}, {c}) is {}", m[(r, c)]),
                ));
            }
        }
        Ok(())
    }
}

/// Forward caches for every sample, in dataset order.
pub fn forward_all(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary) -> Result<Vec<ForwardCache>> {
    let u = params.head_vector();
    dataset
        .samples
        .iter()
        .map(|s| forward_with_head(params, &u, s, vocab))
        .collect()
}

/// Analytic gradient flow of all four trainable matrices.
///
/// Per sample, with `c = g y / n`, `p̄ = Σ_l p_l` and
/// `B[h, l] = P[h, l] (G(x_h) - Σ_h' G(x_h') P[h', l])`:
///
/// * `dW   += c · a ⊗ (Σ_h p̄_h v_h)`
/// * `dW_V += c · u ⊗ (Σ_h p̄_h x_h)`
/// * `dW_K += c/√m · Σ_{h,l} B[h, l] q_l x_hᵀ`
/// * `dW_Q += c/√m · Σ_{h,l} B[h, l] k_h x_lᵀ`
///
/// Samples are accumulated in ascending index order.
pub fn compute_gradients(
    params: &ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
) -> Result<(Gradients, Vec<ForwardCache>)> {
    if dataset.is_empty() {
        return Err(Error::input("dataset is empty"));
    }
    let dims = params.dims();
    let n = dataset.n() as f64;
    let inv_sqrt_m = 1.0 / (dims.m as f64).sqrt();
    let u = params.head_vector();

    let mut mixed_values = vec![0.0; dims.m];
    let mut token_mass = vec![0.0; dims.d + 1];
    let mut dwk = Mat::zeros(dims.m, dims.d);
    let mut dwq = Mat::zeros(dims.m, dims.d);
    let mut caches = Vec::with_capacity(dataset.n());

    for s in &dataset.samples {
        let cache = forward_with_head(params, &u, s, vocab)?;
        let c = cache.g * s.y() / n;
        let seq_len = s.len();
        let mass = cache.attention_mass();
        for h in 0..seq_len {
            axpy(&mut mixed_values, c * mass[h], cache.values.row(h));
            token_mass[s.tokens[h]] += c * mass[h];
        }

        let mut b = Mat::zeros(seq_len, seq_len);
        for l in 0..seq_len {
            let mean_head = cache.head_at_query(l);
            for h in 0..seq_len {
                b[(h, l)] = cache.probs[(h, l)] * (cache.head[h] - mean_head);
            }
        }
        let scale = c * inv_sqrt_m;
        let mut acc = vec![0.0; dims.m];
        for h in 0..seq_len {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..seq_len {
                axpy(&mut acc, b[(h, l)], cache.queries.row(l));
            }
            vocab.add_outer(&mut dwk, scale, &acc, s.tokens[h]);
        }
        for l in 0..seq_len {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for h in 0..seq_len {
                axpy(&mut acc, b[(h, l)], cache.keys.row(h));
            }
            vocab.add_outer(&mut dwq, scale, &acc, s.tokens[l]);
        }
        caches.push(cache);
    }

    let mut dw = Mat::zeros(dims.m1, dims.m);
    dw.add_outer(1.0, &params.a, &mixed_values);
    let mut dwv = Mat::zeros(dims.m, dims.d);
    for (t, &mass) in token_mass.iter().enumerate().skip(1) {
        if mass != 0.0 {
            vocab.add_outer(&mut dwv, mass, &u, t);
        }
    }
    let grads = Gradients {
        w: dw,
        wv: dwv,
        wk: dwk,
        wq: dwq,
    };
    grads.check_finite()?;
    Ok((grads, caches))
}

/// Central differences of `f` at `theta`, step `eps_scale · (1 + |θ_k|)`.
pub fn central_difference(theta: &[f64], eps_scale: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            let h = eps_scale * (1.0 + theta[k].abs());
            x[k] = theta[k] + h;
            let up = f(&x);
            x[k] = theta[k] - h;
            let down = f(&x);
            x[k] = theta[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub const DEFAULT_FD_EPS: f64 = 1e-4;

/// Finite-difference gradient flow (negated raw gradient) of the mean loss.
pub fn finite_diff_gradients(
    params: &ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
    eps_scale: f64,
) -> Result<Gradients> {
    let mut out = Vec::with_capacity(4);
    for which in 0..4 {
        let base = params.matrices()[which].1.clone();
        let mut err = None;
        let grad = central_difference(base.as_slice(), eps_scale, |theta| {
            let mut p = params.clone();
            let target = match which {
                0 => &mut p.w,
                1 => &mut p.wv,
                2 => &mut p.wk,
                _ => &mut p.wq,
            };
            target.as_mut_slice().copy_from_slice(theta);
            match dataset_loss(&p, dataset, vocab) {
                Ok(l) => l.mean,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let mut m = Mat::from_vec(base.rows(), base.cols(), grad);
        m.scale(-1.0);
        out.push(m);
    }
    let wq = out.pop().unwrap();
    let wk = out.pop().unwrap();
    let wv = out.pop().unwrap();
    let w = out.pop().unwrap();
    Ok(Gradients { w, wv, wk, wq })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixError {
    pub name: &'static str,
    pub max_rel: f64,
    pub max_abs: f64,
}

/// Entrywise relative error `|a - b| / max(|a|, |b|, floor)` per matrix.
pub fn compare_gradients(a: &Gradients, b: &Gradients, floor: f64) -> [MatrixError; 4] {
    let (ma, mb) = (a.matrices(), b.matrices());
    std::array::from_fn(|k| {
        let (name, x) = ma[k];
        let y = mb[k].1;
        assert_eq!(x.shape(), y.shape());
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (&p, &q) in x.as_slice().iter().zip(y.as_slice()) {
            let diff = (p - q).abs();
            max_abs = max_abs.max(diff);
            max_rel = max_rel.max(diff / p.abs().max(q.abs()).max(floor));
        }
        MatrixError { name, max_rel, max_abs }
    })
}

/// A scalar tracked by the gradient-flow dynamical system. Token arguments
/// are vocabulary ids, neuron arguments are 0-based rows of `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// `w_jᵀ W_V μ`.
    Mlp { j: usize, mu: TokenId },
    /// `νᵀ W_Kᵀ W_Q μ`.
    Score { nu: TokenId, mu: TokenId },
    /// `⟨w_j1, w_j2⟩`.
    Neuron { j1: usize, j2: usize },
    /// `νᵀ W_Vᵀ W_V μ`.
    Value { nu: TokenId, mu: TokenId },
    /// `νᵀ W_Qᵀ W_Q μ`.
    QSelf { nu: TokenId, mu: TokenId },
    /// `νᵀ W_Kᵀ W_K μ`.
    KSelf { nu: TokenId, mu: TokenId },
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Quantity::Mlp { j, mu } => write!(f, "mlp({j},{mu})"),
            Quantity::Score { nu, mu } => write!(f, "score({nu},{mu})"),
            Quantity::Neuron { j1, j2 } => write!(f, "neuron({j1},{j2})"),
            Quantity::Value { nu, mu } => write!(f, "value({nu},{mu})"),
            Quantity::QSelf { nu, mu } => write!(f, "qself({nu},{mu})"),
            Quantity::KSelf { nu, mu } => write!(f, "kself({nu},{mu})"),
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::input(format!("unknown quantity `{s}`"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<usize> = inner
            .split(',')
            .map(|a| a.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [x, y] = args[..] else { return Err(bad()) };
        Ok(match &s[..open] {
            "mlp" => Quantity::Mlp { j: x, mu: y },
            "score" => Quantity::Score { nu: x, mu: y },
            "neuron" => Quantity::Neuron { j1: x, j2: y },
            "value" => Quantity::Value { nu: x, mu: y },
            "qself" => Quantity::QSelf { nu: x, mu: y },
            "kself" => Quantity::KSelf { nu: x, mu: y },
            _ => return Err(bad()),
        })
    }
}

impl Quantity {
    fn check(&self, params: &ModelParams) -> Result<()> {
        let dims = params.dims();
        let tok = |t: TokenId| t >= 1 && t <= dims.d;
        let ok = match *self {
            Quantity::Mlp { j, mu } => j < dims.m1 && tok(mu),
            Quantity::Neuron { j1, j2 } => j1 < dims.m1 && j2 < dims.m1,
            Quantity::Score { nu, mu }
            | Quantity::Value { nu, mu }
            | Quantity::QSelf { nu, mu }
            | Quantity::KSelf { nu, mu } => tok(nu) && tok(mu),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("{self} is out of range for dims {dims:?}")))
        }
    }

    /// Current value of the tracked scalar.
    pub fn evaluate(&self, params: &ModelParams, vocab: &Vocabulary) -> Result<f64> {
        self.check(params)?;
        Ok(match *self {
            Quantity::Mlp { j, mu } => dot(params.w.row(j), &vocab.project(&params.wv, mu)),
            Quantity::Score { nu, mu } => dot(&vocab.project(&params.wk, nu), &vocab.project(&params.wq, mu)),
            Quantity::Neuron { j1, j2 } => dot(params.w.row(j1), params.w.row(j2)),
            Quantity::Value { nu, mu } => dot(&vocab.project(&params.wv, nu), &vocab.project(&params.wv, mu)),
            Quantity::QSelf { nu, mu } => dot(&vocab.project(&params.wq, nu), &vocab.project(&params.wq, mu)),
            Quantity::KSelf { nu, mu } => dot(&vocab.project(&params.wk, nu), &vocab.project(&params.wk, mu)),
        })
    }

    /// Time derivative by the chain rule through a given parameter flow.
    pub fn chain_rule(&self, params: &ModelParams, flow: &Gradients, vocab: &Vocabulary) -> Result<f64> {
        self.check(params)?;
        let pr = |m: &Mat, t| vocab.project(m, t);
        Ok(match *self {
            Quantity::Mlp { j, mu } => {
                dot(flow.w.row(j), &pr(&params.wv, mu)) + dot(params.w.row(j), &pr(&flow.wv, mu))
            }
            Quantity::Score { nu, mu } => {
                dot(&pr(&flow.wk, nu), &pr(&params.wq, mu)) + dot(&pr(&params.wk, nu), &pr(&flow.wq, mu))
            }
            Quantity::Neuron { j1, j2 } => {
                dot(flow.w.row(j1), params.w.row(j2)) + dot(params.w.row(j1), flow.w.row(j2))
            }
            Quantity::Value { nu, mu } => {
                dot(&pr(&flow.wv, nu), &pr(&params.wv, mu)) + dot(&pr(&params.wv, nu), &pr(&flow.wv, mu))
            }
            Quantity::QSelf { nu, mu } => {
                dot(&pr(&flow.wq, nu), &pr(&params.wq, mu)) + dot(&pr(&params.wq, nu), &pr(&flow.wq, mu))
            }
            Quantity::KSelf { nu, mu } => {
                dot(&pr(&flow.wk, nu), &pr(&params.wk, mu)) + dot(&pr(&params.wk, nu), &pr(&flow.wk, mu))
            }
        })
    }
}

/// Per-sample neuron readouts `w_jᵀ v_h` (`m1 × L`) and their attention
/// averages `w_jᵀ V p_l` (`m1 × L`).
fn neuron_readouts(params: &ModelParams, cache: &ForwardCache) -> (Mat, Mat) {
    let seq_len = cache.seq_len();
    let m1 = params.w.rows();
    let per_token = Mat::from_fn(m1, seq_len, |j, h| dot(params.w.row(j), cache.values.row(h)));
    let per_query = Mat::from_fn(m1, seq_len, |j, l| {
        (0..seq_len).map(|h| per_token[(j, h)] * cache.probs[(h, l)]).sum()
    });
    (per_token, per_query)
}

/// Right-hand side of the gradient-flow equation for one tracked scalar,
/// evaluated term by term with explicit sums over neurons. A token that
/// appears in no sample contributes empty sums, i.e. zero.
pub fn dynamics_rhs(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary, quantity: Quantity) -> Result<f64> {
    quantity.check(params)?;
    if dataset.is_empty() {
        return Err(Error::input("dataset is empty"));
    }
    let caches = forward_all(params, dataset, vocab)?;
    let n = dataset.n() as f64;
    let inv_sqrt_m = 1.0 / (params.dims().m as f64).sqrt();
    let a = &params.a;
    let m1 = a.len();

    // (X p_l)ᵀ μ for a sample.
    let mix = |tokens: &[TokenId], cache: &ForwardCache, l: usize, mu: TokenId| -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(h, &t)| cache.probs[(h, l)] * vocab.inner(t, mu))
            .sum()
    };

    let mut total = 0.0;
    match quantity {
        Quantity::Mlp { j, mu } => {
            let coupling: f64 = (0..m1).map(|j2| a[j2] * dot(params.w.row(j), params.w.row(j2))).sum();
            let v_mu = vocab.project(&params.wv, mu);
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                let seq_len = s.len();
                let v_dot: Vec<f64> = (0..seq_len).map(|h| dot(cache.values.row(h), &v_mu)).collect();
                for l in 0..seq_len {
                    let first = coupling * mix(&s.tokens, cache, l, mu);
                    let second: f64 = a[j] * (0..seq_len).map(|h| cache.probs[(h, l)] * v_dot[h]).sum::<f64>();
                    total += gy * (first + second);
                }
            }
            total /= n;
        }
        Quantity::Neuron { j1, j2 } => {
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                let (_, per_query) = neuron_readouts(params, cache);
                for l in 0..s.len() {
                    total += gy * (a[j2] * per_query[(j1, l)] + a[j1] * per_query[(j2, l)]);
                }
            }
            total /= n;
        }
        Quantity::Value { nu, mu } => {
            let v_nu = vocab.project(&params.wv, nu);
            let v_mu = vocab.project(&params.wv, mu);
            let readout = |v: &[f64]| -> f64 { (0..m1).map(|j| a[j] * dot(v, params.w.row(j))).sum() };
            let (r_nu, r_mu) = (readout(&v_nu), readout(&v_mu));
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                for l in 0..s.len() {
                    total += gy * (r_nu * mix(&s.tokens, cache, l, mu) + r_mu * mix(&s.tokens, cache, l, nu));
                }
            }
            total /= n;
        }
        Quantity::Score { nu, mu } => {
            let k_nu = vocab.project(&params.wk, nu);
            let q_mu = vocab.project(&params.wq, mu);
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                let seq_len = s.len();
                let (per_token, per_query) = neuron_readouts(params, cache);
                for l in 0..seq_len {
                    let x_l_mu = vocab.inner(s.tokens[l], mu);
                    let q_dot = dot(&q_mu, cache.queries.row(l));
                    for j in 0..m1 {
                        let mut key_side = 0.0;
                        let mut query_side = 0.0;
                        for h in 0..seq_len {
                            let centered = (per_token[(j, h)] - per_query[(j, l)]) * cache.probs[(h, l)];
                            key_side += dot(&k_nu, cache.keys.row(h)) * centered;
                            query_side += centered * vocab.inner(s.tokens[h], nu);
                        }
                        total += gy * a[j] * (key_side * x_l_mu + q_dot * query_side);
                    }
                }
            }
            total *= inv_sqrt_m / n;
        }
        Quantity::QSelf { nu, mu } => {
            let q_nu = vocab.project(&params.wq, nu);
            let q_mu = vocab.project(&params.wq, mu);
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                let seq_len = s.len();
                let (per_token, per_query) = neuron_readouts(params, cache);
                for l in 0..seq_len {
                    let at_mu = vocab.inner(s.tokens[l], mu);
                    let at_nu = vocab.inner(s.tokens[l], nu);
                    if at_mu == 0.0 && at_nu == 0.0 {
                        continue;
                    }
                    for j in 0..m1 {
                        let mut with_nu = 0.0;
                        let mut with_mu = 0.0;
                        for h in 0..seq_len {
                            let centered = (per_token[(j, h)] - per_query[(j, l)]) * cache.probs[(h, l)];
                            with_nu += dot(&q_nu, cache.keys.row(h)) * centered;
                            with_mu += dot(&q_mu, cache.keys.row(h)) * centered;
                        }
                        total += gy * a[j] * (at_mu * with_nu + at_nu * with_mu);
                    }
                }
            }
            total *= inv_sqrt_m / n;
        }
        Quantity::KSelf { nu, mu } => {
            let k_nu = vocab.project(&params.wk, nu);
            let k_mu = vocab.project(&params.wk, mu);
            for (s, cache) in dataset.samples.iter().zip(&caches) {
                let gy = cache.g * s.y();
                let seq_len = s.len();
                let (per_token, per_query) = neuron_readouts(params, cache);
                for l in 0..seq_len {
                    let kq_nu = dot(&k_nu, cache.queries.row(l));
                    let kq_mu = dot(&k_mu, cache.queries.row(l));
                    for j in 0..m1 {
                        let mut at_mu = 0.0;
                        let mut at_nu = 0.0;
                        for h in 0..seq_len {
                            let centered = (per_token[(j, h)] - per_query[(j, l)]) * cache.probs[(h, l)];
                            at_mu += centered * vocab.inner(s.tokens[h], mu);
                            at_nu += centered * vocab.inner(s.tokens[h], nu);
                        }
                        total += gy * a[j] * (kq_nu * at_mu + kq_mu * at_nu);
                    }
                }
            }
            total *= inv_sqrt_m / n;
        }
    }
    if !total.is_finite() {
        return Err(Error::numeric(quantity.to_string(), format!("right-hand side is {total}")));
    }
    Ok(total)
}
