//! Shared helpers: random instances and literal-loop reference
//! implementations of the forward pass and the flow gradients.
#![allow(dead_code)]

use attnflow::data::{build_vocabulary, generate_proportional_set, Dataset, EmbeddingMode, Sample, Vocabulary};
use attnflow::gradients::Gradients;
use attnflow::linalg::Mat;
use attnflow::model::{Dims, ModelParams};
use attnflow::rng::{stream, Stream};
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn random_params(dims: Dims, seed: u64, scale: f64) -> ModelParams {
    let mut rng = stream(seed, Stream::Init);
    let mut g = |r, c| Mat::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let w = g(dims.m1, dims.m);
    let wv = g(dims.m, dims.d);
    let wk = g(dims.m, dims.d);
    let wq = g(dims.m, dims.d);
    let a = (0..dims.m1)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    ModelParams { w, wv, wk, wq, a }
}

pub fn instance(
    n: usize,
    seq_len: usize,
    dims: Dims,
    seed: u64,
    scale: f64,
    mode: EmbeddingMode,
) -> (Vocabulary, Dataset, ModelParams) {
    let mut emb = stream(seed, Stream::Embedding);
    let vocab = build_vocabulary(dims.d, mode, &mut emb).unwrap();
    let mut data = stream(seed, Stream::Data);
    let ds = generate_proportional_set(&mut data, &vocab, seq_len, n).unwrap();
    (vocab, ds, random_params(dims, seed, scale))
}

/// Column vectors `M x_h` for each column of `x`.
fn project(mat: &Mat, x: &Mat) -> Vec<Vec<f64>> {
    (0..x.cols())
        .map(|h| {
            (0..mat.rows())
                .map(|r| (0..mat.cols()).map(|c| mat[(r, c)] * x[(c, h)]).sum())
                .collect()
        })
        .collect()
}

pub struct NaiveForward {
    pub f: f64,
    /// `p[l][h]`: attention of query `l` on key `h`.
    pub p: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

pub fn naive_forward(params: &ModelParams, x: &Mat) -> NaiveForward {
    let seq_len = x.cols();
    let m = params.wk.rows();
    let k = project(&params.wk, x);
    let q = project(&params.wq, x);
    let v = project(&params.wv, x);
    let mut p = Vec::new();
    for l in 0..seq_len {
        let s: Vec<f64> = (0..seq_len)
            .map(|h| (0..m).map(|c| k[h][c] * q[l][c]).sum::<f64>() / (m as f64).sqrt())
            .collect();
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = e.iter().sum();
        p.push(e.iter().map(|v| v / z).collect::<Vec<f64>>());
    }
    let mut f = 0.0;
    for l in 0..seq_len {
        for j in 0..params.a.len() {
            for c in 0..m {
                for h in 0..seq_len {
                    f += params.a[j] * params.w[(j, c)] * v[h][c] * p[l][h];
                }
            }
        }
    }
    NaiveForward { f, p, k, q, v }
}

pub fn naive_output(params: &ModelParams, sample: &Sample, vocab: &Vocabulary) -> f64 {
    naive_forward(params, &vocab.materialize(&sample.tokens)).f
}

/// Flow gradients written term by term from the weight-update formulas,
/// with explicit loops over samples, queries, neurons and keys.
pub fn naive_gradients(params: &ModelParams, dataset: &Dataset, vocab: &Vocabulary) -> Gradients {
    let Dims { m, m1, d } = params.dims();
    let n = dataset.n() as f64;
    let sm = (m as f64).sqrt();
    let mut dw = Mat::zeros(m1, m);
    let mut dwv = Mat::zeros(m, d);
    let mut dwk = Mat::zeros(m, d);
    let mut dwq = Mat::zeros(m, d);
    for sample in &dataset.samples {
        let x = vocab.materialize(&sample.tokens);
        let fw = naive_forward(params, &x);
        let y = sample.y();
        let g = 1.0 / (1.0 + (y * fw.f).exp());
        let coef = g * y / n;
        let seq_len = x.cols();
        let xp: Vec<Vec<f64>> = (0..seq_len)
            .map(|l| (0..d).map(|s| (0..seq_len).map(|h| x[(s, h)] * fw.p[l][h]).sum()).collect())
            .collect();
        for l in 0..seq_len {
            for j in 0..m1 {
                let aj = params.a[j];
                for c in 0..m {
                    let mut acc = 0.0;
                    for h in 0..seq_len {
                        acc += fw.v[h][c] * fw.p[l][h];
                    }
                    dw.row_mut(j)[c] += coef * aj * acc;
                }
                for r in 0..m {
                    for s in 0..d {
                        dwv.row_mut(r)[s] += coef * aj * params.w[(j, r)] * xp[l][s];
                    }
                }
                let wv: Vec<f64> = (0..seq_len)
                    .map(|h| (0..m).map(|c| params.w[(j, c)] * fw.v[h][c]).sum())
                    .collect();
                for h in 0..seq_len {
                    for h2 in 0..seq_len {
                        let delta = if h == h2 { 1.0 } else { 0.0 };
                        let jac = fw.p[l][h] * (delta - fw.p[l][h2]);
                        let t = coef / sm * aj * wv[h] * jac;
                        for r in 0..m {
                            for s in 0..d {
                                dwk.row_mut(r)[s] += t * fw.q[l][r] * x[(s, h2)];
                                dwq.row_mut(r)[s] += t * fw.k[h2][r] * x[(s, l)];
                            }
                        }
                    }
                }
            }
        }
    }
    Gradients {
        w: dw,
        wv: dwv,
        wk: dwk,
        wq: dwq,
    }
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_rel_mat(a: &Mat, b: &Mat, floor: f64) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| rel_err(*x, *y, floor))
        .fold(0.0, f64::max)
}

pub fn max_rel_grad(a: &Gradients, b: &Gradients, floor: f64) -> f64 {
    a.matrices()
        .iter()
        .zip(b.matrices().iter())
        .map(|((_, x), (_, y))| max_rel_mat(x, y, floor))
        .fold(0.0, f64::max)
}
