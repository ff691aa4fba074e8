use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

const CONSERVING: &str = r#"
[model]
family = "aggregation"
d = 1.0
gamma = 1.0
initial = ["1 + 0.2*cos(2*pi*x)"]

[grid]
length = 1.0
n = 64
bc = "periodic"

[kernel]
shape = "gaussian"
radius = 0.1

[stepping]
t_end = 0.2
snapshot_every = 0.1
"#;

fn cogmap(args: &[&str], config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_cogmap"))
        .args(&args[..1])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(&args[1..])
        .output()
        .unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate_reports_small_mass_drift() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(&["simulate"], CONSERVING, dir.path());
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path());
    assert_eq!(s["status"], "ok");
    assert!(s["trajectory"]["mass_drift"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(dir.path().join("out/fields.csv")).unwrap();
    assert!(csv.starts_with("t,x,u\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 64);
}

#[test]
fn validation_error_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(
        &["simulate"],
        &CONSERVING.replace("d = 1.0", "d = -1.0"),
        dir.path(),
    );
    assert_eq!(code, 2);
    assert!(err.contains("model.d"), "{err}");
    let (code, _) = cogmap(
        &["simulate", "--override", "grid.n=2"],
        CONSERVING,
        dir.path(),
    );
    assert_eq!(code, 2);
}

#[test]
fn divergence_exits_with_3_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = cogmap(
        &["simulate", "--override", "stepping.dt=0.1"],
        CONSERVING,
        dir.path(),
    );
    assert_eq!(code, 3);
    let s = summary(dir.path());
    assert_eq!(s["status"], "numerical_failure");
    assert!(s["error"].as_str().unwrap().contains("step rejected"));
}

#[test]
fn unwritable_output_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("out"), "a file, not a directory").unwrap();
    let (code, _) = cogmap(&["simulate"], CONSERVING, dir.path());
    assert_eq!(code, 4);
    let missing = Command::new(env!("CARGO_BIN_EXE_cogmap"))
        .args(["simulate", "--config", "/nonexistent/run.toml", "--out"])
        .arg(dir.path().join("o2"))
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(4));
}

#[test]
fn stability_has_conservation_row() {
    let text = r#"
[model]
family = "aggregation"
d = 1.0
gamma = 5.0
[grid]
length = 4.0
n = 64
[kernel]
shape = "top_hat"
radius = 0.3
[stability]
j_max = 8
"#;
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(&["stability"], text, dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("out/dispersion.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("j,k,re,im"));
    assert_eq!(lines.next(), Some("0,0.0,0.0,0.0"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let text = format!(
        "{CONSERVING}\n[measure]\nkind = \"net_growth\"\n\n[[sweep.axis]]\nkey = \"model.gamma\"\nvalues = [0.0, 0.5, 1.0]\n\n[[sweep.axis]]\nkey = \"kernel.shape\"\nvalues = [\"gaussian\", \"top_hat\"]\n"
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(&["sweep"], &text, a.path());
    assert_eq!(code, 0, "{err}");
    cogmap(&["sweep"], &text, b.path());
    let ca = fs::read(a.path().join("out/sweep.csv")).unwrap();
    let cb = fs::read(b.path().join("out/sweep.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.starts_with("index,model.gamma,kernel.shape,net_growth,"));
}

#[test]
fn measure_records_default_window() {
    let text = format!("{CONSERVING}\n[measure]\nkind = \"foraging_success\"\nresource = \"1\"\n");
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(
        &["measure", "--override", "stepping.t_end=0.3"],
        &text,
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path());
    let m = &s["measure"];
    let (t0, t1) = (
        m["report"]["window"][0].as_f64().unwrap(),
        m["report"]["window"][1].as_f64().unwrap(),
    );
    // unit mass against a unit resource: FS is the window length
    assert!((m["report"]["value"].as_f64().unwrap() - (t1 - t0)).abs() < 1e-9);
}

/// Every default that shaped a run is echoed, and nothing else is.
#[test]
fn echo_lists_every_documented_default() {
    let minimal = r#"
[model]
family = "perception_foraging"
d = 1.0
gamma = 1.0
landscape = "x"
[grid]
length = 1.0
n = 16
[stepping]
t_end = 0.01
"#;
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = cogmap(&["simulate"], minimal, dir.path());
    assert_eq!(code, 0, "{err}");
    let s = summary(dir.path());
    let defaulted = s["config"]["defaulted"].as_array().unwrap();
    // grid.bc, kernel.shape, delay.kind, delay.horizon_multiplier,
    // model.initial, output.fields, output.steps, and the seven stepping keys
    assert_eq!(defaulted.len(), 14, "{defaulted:?}");
    let values = s["config"]["values"].as_object().unwrap();
    assert_eq!(values.len(), 14 + 7);
}
