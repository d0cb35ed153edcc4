use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn ewlab(args: &[&str], config: &str, dir: &Path) -> std::process::Output {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ewlab"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL_PROBE: &str = "
[probe]
grid = { side = 16, spacing = 0.5, r0 = 1.0 }
bump_time = 0.125
lag = 0.25
replicas = 4
max_offset = 4
";

#[test]
fn coarse_lattice_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = ewlab(&["kernel-checks"], "[lattice]\nside = 8\n", dir.path());
    assert_ne!(code(&out), 0);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn too_few_stationarity_replicas_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = ewlab(&["stationarity"], "[stationarity]\nreplicas = 10\n", dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ewlab(&["probe"], "[probe]\nreplica = 4\n", dir.path())), 2);
    assert_eq!(code(&ewlab(&["probe"], "[nonsense]\n", dir.path())), 2);
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_ewlab"))
        .args(["probe", "--config", "/nonexistent/ewlab.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn budget_is_enforced_before_compute() {
    let dir = TempDir::new().unwrap();
    let out = ewlab(&["ew", "--budget", "1000"], "", dir.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn deterministic_kernel_checks_pass() {
    let dir = TempDir::new().unwrap();
    let out = ewlab(&["kernel-checks"], "", dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["criteria"][0]["id"], 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/kernel_checks/report.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"], manifest["config_hash"]);
}

#[test]
fn reports_are_reproducible_and_seed_dependent() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    ewlab(&["probe", "--seed", "5", "--workers", "1"], SMALL_PROBE, a.path());
    ewlab(&["probe", "--seed", "5", "--workers", "2"], SMALL_PROBE, b.path());
    ewlab(&["probe", "--seed", "6"], SMALL_PROBE, c.path());
    let read = |d: &TempDir, f: &str| fs::read(d.path().join("out/probe").join(f)).unwrap();
    for f in ["report.json", "report.csv", "probe.csv", "response_profile.svg"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_ne!(read(&a, "probe.csv"), read(&c, "probe.csv"));
}

#[test]
fn probe_csv_has_the_documented_columns() {
    let dir = TempDir::new().unwrap();
    ewlab(&["probe"], SMALL_PROBE, dir.path());
    let csv = fs::read_to_string(dir.path().join("out/probe/probe.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replica,t,site_index,value"));
    // four replicas, five offsets plus the near target each
    assert_eq!(lines.count(), 4 * 6);
    let report = fs::read_to_string(dir.path().join("out/probe/report.csv")).unwrap();
    assert!(report.starts_with("quantity,t,x1,x2,x3,value,reference,ratio\n"));
}
