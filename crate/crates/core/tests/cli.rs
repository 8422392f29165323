use std::path::Path;
use std::process::{Command, Output};

use attnflow::cli::{main_with_args, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};
use attnflow::data::Dataset;
use attnflow::io::{METRICS_FILE, PARAMS0_FILE, PARAMS_FILE};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_train(dir: &Path) -> Output {
    bin(&[
        "train",
        "--set",
        "n=12",
        "--set",
        "L=4",
        "--set",
        "m=16",
        "--set",
        "m1=8",
        "--set",
        "init_mode=kaiming",
        "--epochs",
        "300",
        "--seed",
        "2",
        "--out-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let code = main_with_args(["attnflow", "train", "--config", "missing.cfg", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(main_with_args(["attnflow", "train", "--frobnicate"]), EXIT_USAGE);
    assert_eq!(main_with_args(["attnflow", "gradcheck", "--set", "bogus=1"]), EXIT_USAGE);
}

#[test]
fn bad_config_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(main_with_args(["attnflow", "train", "--set", "n=7", "--out-dir", out]), EXIT_USAGE);
    assert_eq!(main_with_args(["attnflow", "train", "--set", "nonsense", "--out-dir", out]), EXIT_USAGE);
    assert_eq!(main_with_args(["attnflow", "train", "--eta", "-1", "--out-dir", out]), EXIT_USAGE);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(main_with_args(["attnflow", "--help"]), EXIT_OK);
}

#[test]
fn gradcheck_prints_one_row_per_matrix() {
    let o = bin(&["gradcheck", "--n", "6", "--L", "4", "--m", "8", "--m1", "4", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "matrix,max_rel,max_abs,pass");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.ends_with(",pass")));
}

#[test]
fn gen_data_writes_a_readable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.txt");
    let o = bin(&["gen-data", "--n", "12", "--L", "5", "--seed", "4", "--strict", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (ds, d, seed) = Dataset::read_from(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!((ds.n(), d, seed), (12, 3 + 6 * 2 + 4 * 3 + 2 * 4, 4));
    ds.check_invariants().unwrap();

    let o = bin(&["gen-data", "--n", "12", "--L", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_then_verify_then_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_train(dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("steps=300 "));
    for f in [METRICS_FILE, PARAMS_FILE, PARAMS0_FILE] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let o = bin(&["verify", "--trajectory", dir.path().to_str().unwrap()]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 1);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("check,pass,measured,threshold"));
    let fails = text.lines().skip(1).filter(|l| l.contains(",fail,")).count();
    assert_eq!(code == 1, fails > 0);

    // Impossible thresholds make verification fail.
    let o = bin(&["verify", "--trajectory", dir.path().to_str().unwrap(), "--r2-min", "2"]);
    assert_eq!(o.status.code(), Some(i32::from(EXIT_CHECK_FAILED)));

    let p = dir.path().join(PARAMS_FILE);
    let p0 = dir.path().join(PARAMS0_FILE);
    let o = bin(&["decompose", "--params", p.to_str().unwrap(), "--params0", p0.to_str().unwrap(), "--tokens", "4,5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("token,mu1,mu2,mu3,mu4,mu5"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn verify_of_a_missing_directory_is_a_usage_error() {
    let o = bin(&["verify", "--trajectory", "/nonexistent/run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(["attnflow", "sweep", "--seeds", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn divergent_training_exits_with_the_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "train",
        "--set",
        "n=12",
        "--set",
        "L=4",
        "--set",
        "m=16",
        "--set",
        "m1=8",
        "--set",
        "init_mode=kaiming",
        "--eta",
        "1e6",
        "--epochs",
        "50",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn small_sweep_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "sweep",
        "--set",
        "n=12",
        "--set",
        "L=4",
        "--set",
        "m=16",
        "--set",
        "m1=8",
        "--epochs",
        "100",
        "--seeds",
        "0,1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("seed_0").join(METRICS_FILE).exists());
    assert!(dir.path().join("seed_1").join(METRICS_FILE).exists());
    let summary = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(summary.starts_with("check,passes,runs,pass_rate"));
}
