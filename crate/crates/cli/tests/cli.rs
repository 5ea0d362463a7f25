use std::path::Path;
use std::process::{Command, Output};

fn crossmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossmag")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Small CMS cross with short pulses; every run takes well under a second.
const SMALL: &str = r#"
box_nm = [40, 60, 2]
material = "CMS"
sample_ps = 5
[cross]
w_nm = 10
l1_nm = 40
l2_nm = 60
[experiment]
pulse_ns = 0.3
settle_ns = 0.1
sweep_J_Apm2 = [-1e11, -2e12, -5e12]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("in.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn materials_lists_the_three_builtins() {
    let o = crossmag(&["materials"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, ["Co", "CMS", "CFAS"]);
}

#[test]
fn jc_table_has_one_row_per_material() {
    let dir = tempfile::tempdir().unwrap();
    let o = crossmag(&["jc", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
    let csv = std::fs::read_to_string(dir.path().join("jc.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("Co,"));
    let co: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((co - 1.871e11).abs() / 1.871e11 < 1e-3, "{co:e}");
}

#[test]
fn missing_config_fails_with_the_path() {
    let o = crossmag(&["run", "--config", "definitely-missing.toml"]);
    assert!(!o.status.success());
    assert_ne!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("definitely-missing.toml"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(crossmag(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(crossmag(&["sweep", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(crossmag(&["sweep", "--workers", "0"]).status.code(), Some(2));
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "material = \"CMS\"\ncell_nm = -1\n");
    let o = crossmag(&["relax", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cell_nm"));
}

#[test]
fn echoed_config_reproduces_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = crossmag(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echo = a.join("config.toml");
    let o = crossmag(&["sweep", "--config", echo.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success());
    let sa = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(sa, std::fs::read(b.join("sweep.csv")).unwrap());
    assert_eq!(std::fs::read(&echo).unwrap(), std::fs::read(b.join("config.toml")).unwrap());
    assert_eq!(String::from_utf8(sa).unwrap().lines().count(), 4);
}

#[test]
fn run_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}[[pulse]]\nJ_Apm2 = -5e12\nduration_ns = 0.2\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("run");
    let o = crossmag(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--snapshot-every-ns", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let rows = crossmag::io::parse_timeseries(&series).unwrap();
    // 0.3 ns of pulse and settle at 5 ps.
    assert_eq!(rows.len(), 61);
    for name in ["start.ovf", "final.ovf", "snapshots/m00000.ovf", "summary.csv", "config.toml"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let snap = crossmag::io::read_ovf(&std::fs::read_to_string(out.join("final.ovf")).unwrap()).unwrap();
    assert_eq!(snap.values.len(), 20 * 30);
}
