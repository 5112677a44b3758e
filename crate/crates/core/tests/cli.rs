//! End-to-end tests of the command-line binary: exit codes, artifact
//! presence, provenance headers, and the byte-identical determinism
//! contract for identical config + seed.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mixnl")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn base_config() -> String {
    r#"
seed = 7

[domain]
kind = "interval"
a = 0.0
b = 1.0

[grid]
h = 0.05
r_trunc = 4.0

[frac]
s = 0.4

[coefficients]
a = "1"
q = "cos(1, 0.3)"
f = "gauss(0.5, 0.2, 1.0)"

[solver]
gamma = 0.5

[verify]
levels = 1
pairs = 1

[rates]
s_values = [0.3]
h = 0.02

[oracle]
n = 9
s_values = [0.5]

[campaign]
trials = 3
h = 0.05
"#
    .to_owned()
}

fn assert_header(path: &Path) {
    let content = std::fs::read_to_string(path).unwrap();
    let first = content.lines().next().unwrap_or("");
    for needle in ["# config_hash=0x", "seed=", "s=", "h=", "r_trunc=", "tolerances="] {
        assert!(first.contains(needle), "{}: header line {first:?} lacks {needle}", path.display());
    }
}

#[test]
fn solve_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config());
    let out = dir.path().join("out");

    let r1 = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r1.status.success(), "stderr: {}", String::from_utf8_lossy(&r1.stderr));
    for name in ["solution.csv", "trace.csv", "solve_summary.txt"] {
        let p = out.join(name);
        assert!(p.is_file(), "missing artifact {name}");
        assert_header(&p);
    }
    let first = std::fs::read(out.join("solution.csv")).unwrap();
    let first_trace = std::fs::read(out.join("trace.csv")).unwrap();

    let r2 = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r2.status.success());
    assert_eq!(first, std::fs::read(out.join("solution.csv")).unwrap(), "solution.csv changed");
    assert_eq!(first_trace, std::fs::read(out.join("trace.csv")).unwrap(), "trace.csv changed");

    let summary = std::fs::read_to_string(out.join("solve_summary.txt")).unwrap();
    assert!(summary.contains("mode=continuation"));
    assert!(summary.contains("violations=0"));
}

#[test]
fn verify_reports_both_identities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config());
    let out = dir.path().join("out");
    let r = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let ids = std::fs::read_to_string(out.join("identities.csv")).unwrap();
    assert!(ids.contains("regional_equivalence"));
    assert!(ids.contains("operator_pairing"));
    assert_header(&out.join("identities.csv"));
    assert_header(&out.join("seminorms.csv"));
}

#[test]
fn rates_writes_fitted_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config());
    let out = dir.path().join("out");
    let r = run(&["rates", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let rates = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    // header comment + column line + one row per s value
    assert_eq!(rates.lines().count(), 3, "{rates}");
    assert!(rates.lines().nth(1).unwrap().starts_with("s,h,power_slope"));
}

#[test]
fn oracle_rows_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config());
    let out = dir.path().join("out");
    let r = run(&["oracle", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let table = std::fs::read_to_string(out.join("oracle.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 2, "{table}");
    for row in rows {
        assert!(row.ends_with(",true"), "oracle row failed: {row}");
    }
}

#[test]
fn maxprinciple_campaign_is_clean_and_seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config());
    let out = dir.path().join("out");
    let r = run(&[
        "maxprinciple",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let summary = std::fs::read_to_string(out.join("maxprinciple_summary.txt")).unwrap();
    assert!(summary.contains("failures=0"), "{summary}");
    let campaign = std::fs::read_to_string(out.join("campaign.csv")).unwrap();
    assert!(campaign.lines().next().unwrap().contains("seed=99"));
    // 3 trials + header comment + column line
    assert_eq!(campaign.lines().count(), 5);
}

#[test]
fn disk_domain_solve_is_rejected_as_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[domain]
kind = "disk"
center = [0.0, 0.0]
radius = 1.0

[grid]
h = 0.1
r_trunc = 8.0

[frac]
s = 0.5
"#,
    );
    let out = dir.path().join("out");
    let r = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("interval"));
}

#[test]
fn out_of_range_s_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base_config().replace("s = 0.4", "s = 1.2"));
    let r = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("s"));
}

#[test]
fn missing_config_and_bad_usage_exit_2() {
    let r = run(&["solve", "--config", "/nonexistent/run.toml"]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&["frobnicate"]);
    assert_eq!(r.status.code(), Some(2));

    let r = run(&[]);
    assert_eq!(r.status.code(), Some(2));
}
