//! Initialization and full-batch gradient descent (explicit Euler on the
//! gradient flow).

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    build_vocabulary, generate_eval_set, generate_proportional_set, generate_training_set, Dataset, EmbeddingMode,
    TokenId, Vocabulary, FIRST_POOL,
};
use crate::dynamics::{snapshot, DynamicsSnapshot};
use crate::error::{Error, Result};
use crate::gradients::compute_gradients;
use crate::linalg::Mat;
use crate::model::{loss, Dims, ModelParams};
use crate::rng::{stream, Rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Theory,
    Kaiming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    /// Exact proportions and globally unique pool tokens; `d` is derived.
    Strict,
    /// Exact proportions, pool tokens drawn with replacement from a fixed `d`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n: usize,
    pub seq_len: usize,
    /// Vocabulary size; required in sampled mode, derived in strict mode.
    pub d: Option<usize>,
    pub m: usize,
    pub m1: usize,
    /// Explicit initialization std of `W_V, W_K, W_Q` (theory mode).
    pub sigma0: Option<f64>,
    /// Explicit initialization std of `W` (theory mode).
    pub sigma1: Option<f64>,
    /// Multiplier on the default `1/√(L m)`.
    pub sigma0_scale: f64,
    /// Multiplier on the default `1/√m1`.
    pub sigma1_scale: f64,
    pub init_mode: InitMode,
    pub eta: f64,
    pub epochs: u64,
    pub seed: u64,
    pub log_every: u64,
    pub balance_a: bool,
    pub data_mode: DataMode,
    pub embedding: EmbeddingMode,
    /// Size of the i.i.d. evaluation set (0 disables test loss).
    pub n_eval: usize,
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n: 60,
            seq_len: 5,
            d: None,
            m: 128,
            m1: 256,
            sigma0: None,
            sigma1: None,
            sigma0_scale: 1.0,
            sigma1_scale: 1.0,
            init_mode: InitMode::Theory,
            eta: 0.01,
            epochs: 1000,
            seed: 0,
            log_every: 10,
            balance_a: false,
            data_mode: DataMode::Strict,
            embedding: EmbeddingMode::Canonical,
            n_eval: 600,
            probe_size: 8,
        }
    }
}

impl TrainConfig {
    /// The synthetic experiment: 60 samples split 30/10/10/10, five tokens
    /// per sample, `d = 64`, `m = 128`, 256 neurons, Kaiming initialization,
    /// learning rate 0.01 for 30000 steps.
    pub fn experiment_preset() -> Self {
        TrainConfig {
            n: 60,
            seq_len: 5,
            d: Some(64),
            m: 128,
            m1: 256,
            init_mode: InitMode::Kaiming,
            eta: 0.01,
            epochs: 30_000,
            log_every: 10,
            data_mode: DataMode::Sampled,
            ..TrainConfig::default()
        }
    }

    pub fn default_sigma0(&self) -> f64 {
        self.sigma0
            .unwrap_or(self.sigma0_scale / ((self.seq_len * self.m) as f64).sqrt())
    }

    pub fn default_sigma1(&self) -> f64 {
        self.sigma1.unwrap_or(self.sigma1_scale / (self.m1 as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("n", self.n), ("L", self.seq_len), ("m", self.m), ("m1", self.m1)];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{k} must be positive")));
            }
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every must be at least 1"));
        }
        if self.init_mode == InitMode::Theory {
            let (s0, s1) = (self.default_sigma0(), self.default_sigma1());
            if !(s0 > 0.0 && s1 > 0.0) {
                return Err(Error::config("sigma0 and sigma1 must be positive"));
            }
        }
        if self.data_mode == DataMode::Sampled && self.d.is_none() {
            return Err(Error::config("sampled data mode needs an explicit d"));
        }
        if self.balance_a && self.m1 % 2 != 0 {
            return Err(Error::config("balance_a needs an even m1"));
        }
        Ok(())
    }

    fn render(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mode = |e: EmbeddingMode| match e {
            EmbeddingMode::Canonical => "canonical".to_string(),
            EmbeddingMode::RandomOrthonormal => "random_orthonormal".to_string(),
        };
        BTreeMap::from([
            ("n", self.n.to_string()),
            ("L", self.seq_len.to_string()),
            ("d", opt(self.d.map(|d| d.to_string()))),
            ("m", self.m.to_string()),
            ("m1", self.m1.to_string()),
            ("sigma0", opt(self.sigma0.map(|v| format!("{v:e}")))),
            ("sigma1", opt(self.sigma1.map(|v| format!("{v:e}")))),
            ("sigma0_scale", format!("{:e}", self.sigma0_scale)),
            ("sigma1_scale", format!("{:e}", self.sigma1_scale)),
            (
                "init_mode",
                match self.init_mode {
                    InitMode::Theory => "theory".into(),
                    InitMode::Kaiming => "kaiming".into(),
                },
            ),
            ("eta", format!("{:e}", self.eta)),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("log_every", self.log_every.to_string()),
            ("balance_a", self.balance_a.to_string()),
            (
                "data_mode",
                match self.data_mode {
                    DataMode::Strict => "strict".into(),
                    DataMode::Sampled => "sampled".into(),
                },
            ),
            ("embedding", mode(self.embedding)),
            ("n_eval", self.n_eval.to_string()),
            ("probe_size", self.probe_size.to_string()),
        ])
    }

    /// Applies one `key=value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse::<T>()
                .map_err(|_| Error::config(format!("bad value `{v}` for `{key}`")))
        }
        fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "auto" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let v = value.trim();
        match key.trim() {
            "n" => self.n = num(key, v)?,
            "L" => self.seq_len = num(key, v)?,
            "d" => self.d = opt(key, v)?,
            "m" => self.m = num(key, v)?,
            "m1" => self.m1 = num(key, v)?,
            "sigma0" => self.sigma0 = opt(key, v)?,
            "sigma1" => self.sigma1 = opt(key, v)?,
            "sigma0_scale" => self.sigma0_scale = num(key, v)?,
            "sigma1_scale" => self.sigma1_scale = num(key, v)?,
            "init_mode" => {
                self.init_mode = match v {
                    "theory" => InitMode::Theory,
                    "kaiming" => InitMode::Kaiming,
                    _ => return Err(Error::config(format!("unknown init_mode `{v}`"))),
                }
            }
            "eta" => self.eta = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "log_every" => self.log_every = num(key, v)?,
            "balance_a" => self.balance_a = num(key, v)?,
            "data_mode" => {
                self.data_mode = match v {
                    "strict" => DataMode::Strict,
                    "sampled" => DataMode::Sampled,
                    _ => return Err(Error::config(format!("unknown data_mode `{v}`"))),
                }
            }
            "embedding" => {
                self.embedding = match v {
                    "canonical" => EmbeddingMode::Canonical,
                    "random_orthonormal" => EmbeddingMode::RandomOrthonormal,
                    _ => return Err(Error::config(format!("unknown embedding `{v}`"))),
                }
            }
            "n_eval" => self.n_eval = num(key, v)?,
            "probe_size" => self.probe_size = num(key, v)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key=value` file on top of `base`. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse_onto(mut base: TrainConfig, text: &str) -> Result<TrainConfig> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", lineno + 1)))?;
            base.set(k, v)?;
        }
        Ok(base)
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.render() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Common multiplier `c` for `sigma0_scale` and `sigma1_scale` that keeps
/// every initial output below `target` with probability about `1 - delta`.
///
/// Under theory init `F` at initialization is roughly Gaussian with standard
/// deviation `c²`; the Gaussian tail plus a union bound over the `n` samples
/// and `L` positions gives `2c²·√(2 log(2Ln/δ)) ≤ target`.
pub fn init_scale_for_output_bound(n: usize, seq_len: usize, delta: f64, target: f64) -> f64 {
    let tail = (2.0 * (2.0 * (seq_len * n) as f64 / delta).ln()).sqrt();
    (target / (2.0 * tail)).sqrt()
}

fn gaussian_matrix(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Mat {
    let normal = Normal::new(0.0, std).expect("finite positive std");
    Mat::from_fn(rows, cols, |_, _| normal.sample(rng))
}

pub fn init_params(config: &TrainConfig, d: usize, rng: &mut Rng) -> Result<ModelParams> {
    let Dims { m, m1, .. } = Dims { m: config.m, m1: config.m1, d };
    let (std_w, std_mat) = match config.init_mode {
        InitMode::Theory => (config.default_sigma1(), config.default_sigma0()),
        // fan-in Gaussian: W takes m inputs, the attention matrices take d.
        InitMode::Kaiming => ((2.0 / m as f64).sqrt(), (2.0 / d as f64).sqrt()),
    };
    if !(std_w > 0.0 && std_mat > 0.0 && std_w.is_finite() && std_mat.is_finite()) {
        return Err(Error::config("initialization standard deviations must be positive"));
    }
    let wv = gaussian_matrix(m, d, std_mat, rng);
    let wk = gaussian_matrix(m, d, std_mat, rng);
    let wq = gaussian_matrix(m, d, std_mat, rng);
    let w = gaussian_matrix(m1, m, std_w, rng);
    let a = if config.balance_a {
        let mut a: Vec<f64> = (0..m1).map(|j| if j < m1 / 2 { 1.0 } else { -1.0 }).collect();
        a.shuffle(rng);
        a
    } else {
        (0..m1).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
    };
    Ok(ModelParams { w, wv, wk, wq, a })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub loss_before: f64,
    /// Frobenius norms of the flow for W, W_V, W_K, W_Q.
    pub grad_norms: [f64; 4],
}

/// One Euler step `θ ← θ + η · ∂θ/∂t` applied in place.
pub fn train_step_in_place(
    params: &mut ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
    eta: f64,
) -> Result<StepMetrics> {
    let (grads, caches) = compute_gradients(params, dataset, vocab)?;
    let loss_before = dataset
        .samples
        .iter()
        .zip(&caches)
        .map(|(s, c)| loss(c.output, s.y()).0)
        .sum::<f64>()
        / dataset.n() as f64;
    if eta != 0.0 {
        params.w.add_scaled(eta, &grads.w);
        params.wv.add_scaled(eta, &grads.wv);
        params.wk.add_scaled(eta, &grads.wk);
        params.wq.add_scaled(eta, &grads.wq);
    }
    Ok(StepMetrics {
        loss_before,
        grad_norms: grads.norms(),
    })
}

pub fn train_step(
    params: &ModelParams,
    dataset: &Dataset,
    vocab: &Vocabulary,
    eta: f64,
) -> Result<(ModelParams, StepMetrics)> {
    let mut next = params.clone();
    let metrics = train_step_in_place(&mut next, dataset, vocab, eta)?;
    Ok((next, metrics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: TrainConfig,
    pub snapshots: Vec<DynamicsSnapshot>,
    pub params_digest: String,
}

impl Trajectory {
    pub fn final_step(&self) -> u64 {
        self.snapshots.last().map_or(0, |s| s.t)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub vocab: Vocabulary,
    pub train: Dataset,
    pub eval: Option<Dataset>,
    pub probe: Vec<TokenId>,
    pub params0: ModelParams,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub step: u64,
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// FNV-1a over the little-endian bytes of every parameter.
pub fn params_digest(params: &ModelParams) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mats = params.matrices();
    let all = mats
        .iter()
        .flat_map(|(_, m)| m.as_slice().iter())
        .chain(params.a.iter());
    for v in all {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Training data, evaluation data and probe tokens for a config.
pub fn build_data(config: &TrainConfig) -> Result<(Vocabulary, Dataset, Option<Dataset>, Vec<TokenId>)> {
    let mut data_rng = stream(config.seed, Stream::Data);
    let (vocab, train) = match config.data_mode {
        DataMode::Strict => {
            let (vocab, ds) = generate_training_set(&mut data_rng, config.seq_len, config.n, config.embedding)?;
            if let Some(d) = config.d {
                if d != vocab.d() {
                    return Err(Error::config(format!(
                        "strict mode derives d = {}, config asks for {d}",
                        vocab.d()
                    )));
                }
            }
            (vocab, ds)
        }
        DataMode::Sampled => {
            let d = config.d.ok_or_else(|| Error::config("sampled mode needs d"))?;
            let mut emb_rng = stream(config.seed, Stream::Embedding);
            let vocab = build_vocabulary(d, config.embedding, &mut emb_rng)?;
            let ds = generate_proportional_set(&mut data_rng, &vocab, config.seq_len, config.n)?;
            (vocab, ds)
        }
    };
    let eval = if config.n_eval > 0 {
        let mut eval_rng = stream(config.seed, Stream::Eval);
        Some(generate_eval_set(&mut eval_rng, &vocab, config.seq_len, config.n_eval)?)
    } else {
        None
    };
    // Probe tokens come from pool tokens that occur in training data, since
    // attention parameters of unseen tokens never move.
    let mut candidates: Vec<TokenId> = train.used_tokens().into_iter().filter(|&t| t >= FIRST_POOL).collect();
    let mut probe_rng = stream(config.seed, Stream::Probe);
    candidates.shuffle(&mut probe_rng);
    candidates.truncate(config.probe_size);
    candidates.sort_unstable();
    Ok((vocab, train, eval, candidates))
}

pub fn run(config: &TrainConfig) -> std::result::Result<RunOutput, Box<RunFailure>> {
    run_with(config, |_| {})
}

/// Like [`run`], calling `observe` on every snapshot as it is recorded.
pub fn run_with(
    config: &TrainConfig,
    mut observe: impl FnMut(&DynamicsSnapshot),
) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let empty = |config: &TrainConfig| Trajectory {
        config: config.clone(),
        snapshots: Vec::new(),
        params_digest: String::new(),
    };
    let fail = |step, error, partial| Box::new(RunFailure { step, error, partial });

    if let Err(e) = config.validate() {
        return Err(fail(0, e, empty(config)));
    }
    let (vocab, train, eval, probe) = build_data(config).map_err(|e| fail(0, e, empty(config)))?;
    let mut init_rng = stream(config.seed, Stream::Init);
    let params0 = init_params(config, vocab.d(), &mut init_rng).map_err(|e| fail(0, e, empty(config)))?;
    let mut params = params0.clone();
    let mut trajectory = empty(config);

    let record = |t: u64, params: &ModelParams, trajectory: &mut Trajectory| -> Result<()> {
        let snap = snapshot(params, &params0, &train, &vocab, t, &probe, eval.as_ref())?;
        observe(&snap);
        trajectory.snapshots.push(snap);
        Ok(())
    };
    let mut observe_record = record;

    if let Err(e) = observe_record(0, &params, &mut trajectory) {
        return Err(fail(0, e, trajectory));
    }
    for step in 1..=config.epochs {
        if let Err(e) = train_step_in_place(&mut params, &train, &vocab, config.eta) {
            trajectory.params_digest = params_digest(&params);
            return Err(fail(step, e, trajectory));
        }
        if step % config.log_every == 0 || step == config.epochs {
            if let Err(e) = observe_record(step, &params, &mut trajectory) {
                trajectory.params_digest = params_digest(&params);
                return Err(fail(step, e, trajectory));
            }
        }
    }
    trajectory.params_digest = params_digest(&params);
    Ok(RunOutput {
        trajectory,
        vocab,
        train,
        eval,
        probe,
        params0,
        params,
    })
}
