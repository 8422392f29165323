//! Command-line interface.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::checks::{head_ratio_record, verify, CheckConfig, PhaseReport};
use crate::data::{build_vocabulary, generate_proportional_set, generate_training_set, EmbeddingMode, TokenId};
use crate::dynamics::{attention_decomposition, tracked_set, AttentionCoeffs};
use crate::error::{Error, Result};
use crate::gradients::{compare_gradients, compute_gradients, finite_diff_gradients, MatrixError, DEFAULT_FD_EPS};
use crate::io::{self as runio, SnapshotWriter};
use crate::rng::{stream, Stream};
use crate::trainer::{build_data, init_params, run_with, InitMode, RunOutput, TrainConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "attnflow", version, about = "Training dynamics of a one-layer transformer on word co-occurrence")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a training set and write it as text.
    GenData(GenDataArgs),
    /// Train and write a run directory.
    Train(TrainArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Re-run every check on a recorded run directory.
    Verify(VerifyArgs),
    /// Print the attention coefficient matrix between two parameter files.
    Decompose(DecomposeArgs),
    /// Train and verify one run per seed, then aggregate pass rates.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long = "L")]
    pub seq_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Globally unique pool tokens; `d` is derived.
    #[arg(long)]
    pub strict: bool,
    /// Vocabulary size for non-strict generation.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// n=60, L=5, d=64, m=128, m1=256, Kaiming, 30000 steps at 0.01.
    Experiment,
    /// Theory-mode initialization with the small defaults.
    Theory,
}

impl Preset {
    pub fn config(self) -> TrainConfig {
        match self {
            Preset::Experiment => TrainConfig::experiment_preset(),
            Preset::Theory => TrainConfig::default(),
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point before the config file and flags are applied.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub log_every: Option<u64>,
}

impl ConfigArgs {
    /// Flags override the file, which overrides the preset.
    pub fn resolve(&self) -> Result<TrainConfig> {
        let base = self.preset.map_or_else(TrainConfig::default, Preset::config);
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
                TrainConfig::parse_onto(base, &text)?
            }
            None => base,
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.log_every {
            cfg.log_every = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long = "L", default_value_t = 4)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub m1: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_FD_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Absolute floor in the relative-error denominator.
    #[arg(long, default_value_t = 1e-9)]
    pub floor: f64,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CheckArgs {
    #[arg(long)]
    pub margin_threshold: Option<f64>,
    #[arg(long)]
    pub t1_max_frac: Option<f64>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub phase1_loss_min: Option<f64>,
    #[arg(long)]
    pub quiescence_frac: Option<f64>,
    #[arg(long)]
    pub trend_floor: Option<f64>,
    #[arg(long)]
    pub combo_c: Option<f64>,
    #[arg(long)]
    pub balance_fraction: Option<f64>,
    #[arg(long)]
    pub r2_min: Option<f64>,
    #[arg(long)]
    pub intercept_tol: Option<f64>,
    #[arg(long)]
    pub sep_factor: Option<f64>,
    #[arg(long)]
    pub head_ratio_c: Option<f64>,
    #[arg(long)]
    pub loss_target: Option<f64>,
}

impl CheckArgs {
    pub fn resolve(&self) -> CheckConfig {
        let mut c = CheckConfig::default();
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.margin_threshold, self.margin_threshold);
        set(&mut c.t1_max_frac, self.t1_max_frac);
        set(&mut c.g_min, self.g_min);
        set(&mut c.phase1_loss_min, self.phase1_loss_min);
        set(&mut c.quiescence_frac, self.quiescence_frac);
        set(&mut c.trend_floor, self.trend_floor);
        set(&mut c.combo_c, self.combo_c);
        set(&mut c.balance_fraction, self.balance_fraction);
        set(&mut c.r2_min, self.r2_min);
        set(&mut c.intercept_tol, self.intercept_tol);
        set(&mut c.sep_factor, self.sep_factor);
        set(&mut c.head_ratio_c, self.head_ratio_c);
        if self.loss_target.is_some() {
            c.loss_target = self.loss_target;
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub trajectory: PathBuf,
    #[command(flatten)]
    pub checks: CheckArgs,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub params0: PathBuf,
    /// Extra tokens to include after 1, 2, 3 (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub checks: CheckArgs,
}

fn exit_for(e: &Error) -> u8 {
    if e.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(main_with_args(std::env::args_os()))
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Gradcheck(a) => gradcheck(&a),
        Command::Verify(a) => {
            let report = verify_dir(&a.trajectory, &a.checks.resolve())?;
            print!("{}", report.table());
            Ok(if report.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Decompose(a) => decompose(&a),
        Command::Sweep(a) => sweep(&a),
    }
}

fn gen_data(a: &GenDataArgs) -> Result<u8> {
    let mut rng = stream(a.seed, Stream::Data);
    let (d, ds) = if a.strict {
        let (vocab, ds) = generate_training_set(&mut rng, a.seq_len, a.n, EmbeddingMode::Canonical)?;
        (vocab.d(), ds)
    } else {
        let d = a
            .d
            .ok_or_else(|| Error::config("non-strict generation needs --d"))?;
        let mut emb = stream(a.seed, Stream::Embedding);
        let vocab = build_vocabulary(d, EmbeddingMode::Canonical, &mut emb)?;
        (d, generate_proportional_set(&mut rng, &vocab, a.seq_len, a.n)?)
    };
    let file = File::create(&a.out).map_err(|e| Error::Io(format!("{}: {e}", a.out.display())))?;
    let mut out = BufWriter::new(file);
    ds.write_to(&mut out, d, a.seed)?;
    out.flush()?;
    Ok(EXIT_OK)
}

/// Trains `config`, streaming metrics into `dir` and writing all artifacts.
pub fn run_to_dir(config: &TrainConfig, dir: &Path) -> Result<RunOutput> {
    let started = runio::unix_now();
    let mut writer = SnapshotWriter::create(dir)?;
    let mut write_err: Option<Error> = None;
    let result = run_with(config, |s| {
        if write_err.is_none() {
            if let Err(e) = writer.push(s) {
                write_err = Some(e);
            }
        }
    });
    writer.finish()?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let out = result.map_err(|f| {
        let cfg_path = dir.join(runio::CONFIG_FILE);
        let _ = fs::write(cfg_path, config.to_string());
        match f.error {
            Error::Numeric { what, detail } => Error::Numeric {
                what,
                detail: format!("{detail} (step {})", f.step),
            },
            other => other,
        }
    })?;
    runio::write_run_artifacts(dir, &out, started)?;
    Ok(out)
}

fn train(a: &TrainArgs) -> Result<u8> {
    let cfg = a.config.resolve()?;
    let out = run_to_dir(&cfg, &a.out_dir)?;
    let last = out.trajectory.snapshots.last().expect("at least one snapshot");
    println!(
        "steps={} train_loss={:.6e} test_loss={:.6e} min_margin={:.6e} digest={}",
        last.t,
        last.train_loss,
        last.test_loss.unwrap_or(f64::NAN),
        last.min_margin,
        out.trajectory.params_digest
    );
    Ok(EXIT_OK)
}

/// Builds one gradient-check instance and returns per-matrix errors.
pub fn gradcheck_instance(a: &GradcheckArgs) -> Result<[MatrixError; 4]> {
    let cfg = TrainConfig {
        n: a.n,
        seq_len: a.seq_len,
        d: Some(a.d),
        m: a.m,
        m1: a.m1,
        init_mode: InitMode::Kaiming,
        seed: a.seed,
        data_mode: crate::trainer::DataMode::Sampled,
        n_eval: 0,
        ..TrainConfig::default()
    };
    let (vocab, train, _, _) = build_data(&cfg)?;
    let mut rng = stream(a.seed, Stream::Init);
    let params = init_params(&cfg, vocab.d(), &mut rng)?;
    let (analytic, _) = compute_gradients(&params, &train, &vocab)?;
    let numeric = finite_diff_gradients(&params, &train, &vocab, a.eps)?;
    Ok(compare_gradients(&analytic, &numeric, a.floor))
}

fn gradcheck(a: &GradcheckArgs) -> Result<u8> {
    let errors = gradcheck_instance(a)?;
    println!("matrix,max_rel,max_abs,pass");
    let mut ok = true;
    for e in &errors {
        let pass = e.max_rel <= a.tol;
        ok &= pass;
        println!("{},{:.6e},{:.6e},{}", e.name, e.max_rel, e.max_abs, if pass { "pass" } else { "fail" });
    }
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Attention coefficients for a finished run, over the special tokens and
/// the run's probe set.
pub fn run_coefficients(out: &RunOutput) -> Result<AttentionCoeffs> {
    attention_decomposition(&out.params, &out.params0, &out.vocab, &tracked_set(&out.probe))
}

/// Verifies a run directory from its files alone.
///
/// When the parameter files and manifest are present, the attention checks
/// run and the head-derivative bracket is reported at both ends of the run.
pub fn verify_dir(dir: &Path, checks: &CheckConfig) -> Result<PhaseReport> {
    let traj = runio::load_trajectory(dir)?;
    let saved = match (
        runio::read_manifest(&dir.join(runio::MANIFEST_FILE)),
        runio::read_params(&dir.join(runio::PARAMS_FILE)),
        runio::read_params(&dir.join(runio::PARAMS0_FILE)),
    ) {
        (Ok(manifest), Ok(params), Ok(params0)) => Some((manifest, params, params0)),
        _ => None,
    };
    let Some((manifest, params, params0)) = saved else {
        return verify(&traj.snapshots, None, checks);
    };
    let (vocab, train, _, _) = build_data(&manifest.config)?;
    let coeffs = attention_decomposition(&params, &params0, &vocab, &tracked_set(&manifest.probe_tokens))?;
    let mut report = verify(&traj.snapshots, Some(&coeffs), checks)?;
    report.info = vec![
        head_ratio_record("info_head_ratio_init", &params0, &train, &vocab, checks.head_ratio_c)?,
        head_ratio_record("info_head_ratio_final", &params, &train, &vocab, checks.head_ratio_c)?,
    ];
    Ok(report)
}

fn decompose(a: &DecomposeArgs) -> Result<u8> {
    let params = runio::read_params(&a.params)?;
    let params0 = runio::read_params(&a.params0)?;
    if params.dims() != params0.dims() {
        return Err(Error::input("parameter files have different shapes"));
    }
    let d = params.dims().d;
    let mut emb = stream(0, Stream::Embedding);
    let vocab = build_vocabulary(d, EmbeddingMode::Canonical, &mut emb)?;
    let tracked = tracked_set(&a.tokens);
    let coeffs = attention_decomposition(&params, &params0, &vocab, &tracked)?;
    let header: Vec<String> = tracked.iter().map(|t| format!("mu{t}")).collect();
    println!("token,{}", header.join(","));
    for (ia, t) in tracked.iter().enumerate() {
        let row: Vec<String> = (0..tracked.len())
            .map(|ib| format!("{:.6e}", coeffs.c[(ia, ib)]))
            .collect();
        println!("mu{t},{}", row.join(","));
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub seed: u64,
    pub report: PhaseReport,
    pub final_train_loss: f64,
    pub final_test_loss: f64,
}

/// Trains and verifies each seed in its own subdirectory.
pub fn run_sweep(base: &TrainConfig, seeds: &[u64], dir: &Path, checks: &CheckConfig) -> Result<Vec<SweepRun>> {
    if seeds.is_empty() {
        return Err(Error::config("sweep needs at least one seed"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = TrainConfig { seed, ..base.clone() };
            let run_dir = dir.join(format!("seed_{seed}"));
            let out = run_to_dir(&cfg, &run_dir)?;
            let coeffs = run_coefficients(&out)?;
            let report = verify(&out.trajectory.snapshots, Some(&coeffs), checks)?;
            let last = out.trajectory.snapshots.last().expect("at least one snapshot");
            Ok(SweepRun {
                seed,
                report,
                final_train_loss: last.train_loss,
                final_test_loss: last.test_loss.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

/// `check,passes,runs,pass_rate` in the fixed record order of the first run.
pub fn sweep_table(runs: &[SweepRun]) -> String {
    let mut out = String::from("check,passes,runs,pass_rate\n");
    let Some(first) = runs.first() else {
        return out;
    };
    for rec in &first.report.records {
        let passes = runs
            .iter()
            .filter(|r| r.report.get(&rec.name).is_some_and(|x| x.pass))
            .count();
        out.push_str(&format!(
            "{},{},{},{:.4}\n",
            rec.name,
            passes,
            runs.len(),
            passes as f64 / runs.len() as f64
        ));
    }
    out
}

fn sweep(a: &SweepArgs) -> Result<u8> {
    let cfg = a.config.resolve()?;
    let runs = run_sweep(&cfg, &a.seeds, &a.out_dir, &a.checks.resolve())?;
    let table = sweep_table(&runs);
    let path = a.out_dir.join("sweep.csv");
    fs::write(&path, &table).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    print!("{table}");
    let n = runs.len() as f64;
    println!(
        "mean_final_train_loss={:.6e} mean_final_test_loss={:.6e}",
        runs.iter().map(|r| r.final_train_loss).sum::<f64>() / n,
        runs.iter().map(|r| r.final_test_loss).sum::<f64>() / n
    );
    Ok(if runs.iter().all(|r| r.report.all_pass()) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
