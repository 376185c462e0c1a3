//! End-to-end checks of the `gaugesim` binary: artifacts, exit codes and plotting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gaugesim() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaugesim"));
    cmd.env_remove("GAUGESIM_THREADS");
    cmd
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    gaugesim().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

const SMALL_SCAN: &str = r#"{
    "experiment": "ab_scan",
    "ring": {"preset": "plaquette"},
    "grids": {"phases_rad": {"start": -3.141592653589793, "stop": 3.141592653589793, "count": 41},
              "times_ns": {"start": 0, "stop": 250, "count": 26}}
}"#;

#[test]
fn ab_scan_writes_one_row_per_phase_and_time() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out.join("pattern.csv")), 41 * 26);
    let names: Vec<String> = manifest(&out)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(names, ["pattern.csv", "summary.json"]);
}

#[test]
fn hall_grid_writes_every_point_and_one_fit_per_flux() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "hall.json",
        r#"{"experiment": "hall",
            "grids": {"fluxes_rad": {"start": -1.5707963267948966, "stop": 1.5707963267948966, "count": 13},
                      "fields_over_j": {"start": -0.4, "stop": 0.4, "count": 9}}}"#,
    );
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    assert_eq!(data_rows(&out.join("hall.csv")), 13 * 9);
    let fits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("coefficients.json")).unwrap()).unwrap();
    assert_eq!(fits.as_array().unwrap().len(), 13);
}

#[test]
fn csv_output_uses_lf_and_a_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let text = std::fs::read_to_string(out.join("pattern.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().next().unwrap(), "phase,time_us,population");
    assert!(!text.lines().skip(1).any(|l| l.split(',').count() != 3));
}

#[test]
fn malformed_json_is_rejected_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"experiment": "hall", "#);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_fields_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "typo.json", r#"{"experiment": "hall", "gauge": {"flux": 1.0}}"#);
    let o = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gauge"));
}

#[test]
fn validate_reports_good_and_bad_configs() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.json", SMALL_SCAN);
    let o = gaugesim().arg("validate").arg(&good).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
    let bad = write_config(tmp.path(), "bad.json", r#"{"experiment": "hall", "model": {"hopping_mhz": -1}}"#);
    assert_eq!(gaugesim().arg("validate").arg(&bad).output().unwrap().status.code(), Some(2));
}

#[test]
fn exhausted_step_budget_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "tight.json", r#"{"experiment": "two_site", "max_steps": 10}"#);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn io_failures_exit_with_four() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert_eq!(run(&cfg, &blocker.join("out"), &[]).status.code(), Some(4));
    let missing = tmp.path().join("missing.json");
    assert_eq!(run(&missing, &tmp.path().join("out"), &[]).status.code(), Some(4));
}

#[test]
fn config_hash_ignores_output_and_threads_but_not_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let hash = |out: &str, extra: &[&str]| {
        let dir = tmp.path().join(out);
        assert!(run(&cfg, &dir, extra).status.success());
        manifest(&dir)["config_sha256"].as_str().unwrap().to_owned()
    };
    let base = hash("a", &[]);
    assert_eq!(base, hash("b", &["--threads", "1"]));
    assert_ne!(base, hash("c", &["--seed", "99"]));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let ok = gaugesim()
        .env("GAUGESIM_THREADS", "2")
        .args(["run", cfg.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("a"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = gaugesim()
        .env("GAUGESIM_THREADS", "many")
        .args(["run", cfg.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

/// Cell rectangles of the heatmap as (x, red channel), colour bar excluded.
fn cells(svg: &str) -> Vec<(f64, u8)> {
    svg.lines()
        .filter(|l| l.starts_with("<rect x=") && l.contains("fill=\"#") && !l.contains("width=\"16\""))
        .map(|l| {
            let x = l.split('"').nth(1).unwrap().parse().unwrap();
            let hex = l.split("fill=\"#").nth(1).unwrap();
            (x, u8::from_str_radix(&hex[..2], 16).unwrap())
        })
        .collect()
}

#[test]
fn caging_pattern_plots_dark_at_half_flux_quantum() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scan.json", SMALL_SCAN);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    let svg_path = tmp.path().join("plots/pattern.svg");
    let o = gaugesim().arg("plot").arg(out.join("pattern.csv")).arg("--out").arg(&svg_path).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let cells = cells(&svg);
    assert_eq!(cells.len(), 41 * 26);
    let left = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let right = cells.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    // phase -pi and +pi columns: the opposite corner is never reached
    for (x, red) in &cells {
        if *x == left || *x == right {
            assert_eq!(*red, 0, "column at x={x}");
        }
    }
    assert!(cells.iter().any(|c| c.1 == 255));
    let again = tmp.path().join("again.svg");
    assert!(gaugesim().arg("plot").arg(out.join("pattern.csv")).arg("--out").arg(&again).status().unwrap().success());
    assert_eq!(std::fs::read(&svg_path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn header_only_csv_cannot_be_plotted() {
    let tmp = TempDir::new().unwrap();
    let csv = write_config(tmp.path(), "empty.csv", "phase,time_us,population\n");
    let svg = tmp.path().join("empty.svg");
    let o = gaugesim().arg("plot").arg(&csv).arg("--out").arg(&svg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(!svg.exists());
}
