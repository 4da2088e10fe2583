//! Exercises the binary surface: subcommands, flag/config layering and exit
//! codes (0 success, 2 invalid input, 4 insufficient data).

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxsplit"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("proxsplit-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL: &[&str] = &[
    "--family",
    "lasso_constrained",
    "--seed",
    "3",
];

fn small_config(dir: &std::path::Path) -> PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(
        &path,
        "# small instance\nfamily = lasso_constrained\nrows = 40\ndim = 60\nsparsity = 4\nsubspace_dim = 12\nmax_iter = 400\n",
    )
    .unwrap();
    path
}

#[test]
fn generate_prints_summary() {
    let out = bin().arg("generate").args(SMALL).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("moduli"));
    assert!(text.contains("beta"));
}

#[test]
fn run_writes_csv_and_reports() {
    let dir = scratch_dir("run");
    let cfg = small_config(&dir);
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&dir)
        .arg("--seed")
        .arg("4")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("identified"));
    assert!(text.contains("csv"));
    let csv = dir.join("lasso_constrained_fdr_stationary_seed4/trajectory.csv");
    assert!(csv.exists(), "expected CSV at {}", csv.display());
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn invalid_input_exits_with_code_2() {
    let out = bin()
        .arg("run")
        .args(["--family", "lasso_constrained", "--method", "tos"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin().arg("run").args(["--preset", "case7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_without_enough_data_exits_with_code_4() {
    let dir = scratch_dir("rate");
    let cfg = small_config(&dir);
    // 25 iterations converge but cannot hold a 30-record certification window
    let out = bin()
        .arg("rate")
        .arg("--config")
        .arg(&cfg)
        .args(["--max-iter", "25"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn compare_tabulates_presets() {
    let dir = scratch_dir("compare");
    let cfg = small_config(&dir);
    let out = bin()
        .arg("compare")
        .arg("--config")
        .arg(&cfg)
        .args(["--presets", "stationary,case4", "--max-iter", "300"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("terminal errors"));
    assert!(text.contains("fdr_stationary"));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn audit_reports_violation_bound() {
    let dir = scratch_dir("audit");
    let cfg = small_config(&dir);
    let out = bin().arg("audit").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("max violation"));
    let _ = std::fs::remove_dir_all(dir);
}
