//! Run directory layout: metrics table, snapshot log, parameter dumps and
//! the manifest.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::TokenId;
use crate::dynamics::DynamicsSnapshot;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::ModelParams;
use crate::trainer::{RunOutput, TrainConfig, Trajectory};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";
pub const CONFIG_FILE: &str = "config.cfg";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "train.txt";
pub const PARAMS_FILE: &str = "final_params.bin";
pub const PARAMS0_FILE: &str = "initial_params.bin";

pub const METRICS_HEADER: &str = "t,train_loss,test_loss,loss_I1,loss_I2,loss_I3,loss_I4,gsum_I1,gsum_I2,gsum_I3,gsum_I4,min_margin,G1,G2,G3,Gmax_rand,S12,S21,S13,S31,S23,S32,Smax_rand,V12,V13,V23,neuron_sum,RK,RQ,RS,RP";

const PARAMS_MAGIC: &[u8; 8] = b"ATFLOW01";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn metrics_row(s: &DynamicsSnapshot) -> String {
    let mut fields = vec![s.t.to_string()];
    let mut push = |v: f64| fields.push(format!("{v:.16e}"));
    push(s.train_loss);
    push(s.test_loss.unwrap_or(f64::NAN));
    s.group_losses.iter().for_each(|&v| push(v));
    s.group_gsum.iter().for_each(|&v| push(v));
    push(s.min_margin);
    s.g_special.iter().for_each(|&v| push(v));
    push(s.g_max_rand);
    for (a, b) in [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)] {
        push(s.s(a, b));
    }
    push(s.score_max_rand);
    for (a, b) in [(1, 2), (1, 3), (2, 3)] {
        push(s.v(a, b));
    }
    push(s.neuron_sum);
    push(s.radius_k);
    push(s.radius_q);
    push(s.radius_s);
    push(s.radius_p);
    fields.join(",")
}

/// Streams snapshots to `metrics.csv` and `snapshots.jsonl` as they arrive.
pub struct SnapshotWriter {
    metrics: BufWriter<File>,
    jsonl: BufWriter<File>,
}

impl SnapshotWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| io_err(&p, e))
        };
        let mut metrics = open(METRICS_FILE)?;
        writeln!(metrics, "{METRICS_HEADER}")?;
        Ok(SnapshotWriter {
            metrics,
            jsonl: open(SNAPSHOTS_FILE)?,
        })
    }

    pub fn push(&mut self, s: &DynamicsSnapshot) -> Result<()> {
        writeln!(self.metrics, "{}", metrics_row(s))?;
        let line = serde_json::to_string(s).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(self.jsonl, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.metrics.flush()?;
        self.jsonl.flush()?;
        Ok(())
    }
}

pub fn read_snapshots(path: &Path) -> Result<Vec<DynamicsSnapshot>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snap = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(snap);
    }
    Ok(out)
}

/// Binary layout: magic, then `m, m1, d` as u64, then `W, W_V, W_K, W_Q`
/// row-major and `a`, all f64 little-endian.
pub fn write_params(path: &Path, params: &ModelParams) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let dims = params.dims();
    out.write_all(PARAMS_MAGIC)?;
    for v in [dims.m, dims.m1, dims.d] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for (_, mat) in params.matrices() {
        for v in mat.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for v in &params.a {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    let bad = |msg: &str| Error::Parse(format!("{}: {msg}", path.display()));
    if bytes.len() < 32 || &bytes[..8] != PARAMS_MAGIC {
        return Err(bad("not a parameter file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap()) as usize;
    let (m, m1, d) = (word(0), word(1), word(2));
    let expected = m1 * m + 3 * m * d + m1;
    let body = &bytes[32..];
    if body.len() != expected * 8 {
        return Err(bad("size does not match the header"));
    }
    let mut floats = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |rows: usize, cols: usize| Mat::from_vec(rows, cols, floats.by_ref().take(rows * cols).collect());
    let w = take(m1, m);
    let wv = take(m, d);
    let wk = take(m, d);
    let wq = take(m, d);
    let a = take(1, m1).as_slice().to_vec();
    let params = ModelParams { w, wv, wk, wq, a };
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: TrainConfig,
    pub seed: u64,
    pub d: usize,
    pub probe_tokens: Vec<TokenId>,
    pub params_digest: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes everything except the streamed metrics: config echo, dataset,
/// parameters and the manifest with the final file inventory.
pub fn write_run_artifacts(dir: &Path, out: &RunOutput, started_unix: u64) -> Result<RunManifest> {
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, out.trajectory.config.to_string()).map_err(|e| io_err(&cfg_path, e))?;
    let ds_path = dir.join(DATASET_FILE);
    let mut ds_file = BufWriter::new(File::create(&ds_path).map_err(|e| io_err(&ds_path, e))?);
    out.train
        .write_to(&mut ds_file, out.vocab.d(), out.trajectory.config.seed)?;
    ds_file.flush()?;
    drop(ds_file);
    write_params(&dir.join(PARAMS0_FILE), &out.params0)?;
    write_params(&dir.join(PARAMS_FILE), &out.params)?;

    let mut files = Vec::new();
    for name in [
        METRICS_FILE,
        SNAPSHOTS_FILE,
        CONFIG_FILE,
        DATASET_FILE,
        PARAMS0_FILE,
        PARAMS_FILE,
    ] {
        let p = dir.join(name);
        if let Ok(meta) = fs::metadata(&p) {
            files.push(FileEntry {
                name: name.to_string(),
                bytes: meta.len(),
            });
        }
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: out.trajectory.config.clone(),
        seed: out.trajectory.config.seed,
        d: out.vocab.d(),
        probe_tokens: out.probe.clone(),
        params_digest: out.trajectory.params_digest.clone(),
        started_unix,
        finished_unix: unix_now(),
        files,
    };
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Loads a trajectory from a run directory, or from a bare
/// `snapshots.jsonl` path.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let (dir, snaps): (PathBuf, PathBuf) = if path.is_dir() {
        (path.to_path_buf(), path.join(SNAPSHOTS_FILE))
    } else {
        (
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
            path.to_path_buf(),
        )
    };
    let snapshots = read_snapshots(&snaps)?;
    let manifest = read_manifest(&dir.join(MANIFEST_FILE)).ok();
    let config = match &manifest {
        Some(m) => m.config.clone(),
        None => match fs::read_to_string(dir.join(CONFIG_FILE)) {
            Ok(text) => TrainConfig::parse_onto(TrainConfig::default(), &text)?,
            Err(_) => TrainConfig::default(),
        },
    };
    Ok(Trajectory {
        config,
        snapshots,
        params_digest: manifest.map(|m| m.params_digest).unwrap_or_default(),
    })
}
