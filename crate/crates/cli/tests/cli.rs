use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stein(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stein")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BERNOULLI: &str = r#"{"experiment":"bernoulli-bound","params":{"vectors":[[0.1,0.1],[0.5]]},"seed":7}"#;

#[test]
fn bernoulli_bound_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.json", BERNOULLI);
    let out = dir.path().join("out");
    let o = stein(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("bernoulli-bound.csv")).unwrap();
    let head = rdr.headers().unwrap().clone();
    assert_eq!(&head[0], "config_hash");
    assert_eq!(&head[1], "seed");
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][1], "7");
    let crude: f64 = rows[0][col("crude")].parse().unwrap();
    assert!((crude - 1.2).abs() < 1e-12);
    assert_eq!(&rows[1][col("crude_valid")], "false");
    assert_eq!(&rows[0][col("dominated")], "true");

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bernoulli-bound.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config_hash"].as_str().unwrap(), &rows[0][0]);
    assert_eq!(meta["mode"], "exact");
}

#[test]
fn renewal_single_component_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"experiment":"renewal-bound","params":{"cases":[{"g":[0.3],"f":[0.2]},{"g":[0.1,0.1],"f":[0.1,0.1]}]},"seed":1}"#,
    );
    let o = stein(&["experiment", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("renewal-bound.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[1].contains(",false,") && lines[1].contains("denominator"));
    assert!(lines[2].contains(",true,5.0000000"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"experiment":"stein-factor","params":{"masses":[1.0,0.5],"cases":3},"seed":11,"reps":300}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = stein(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["stein-factor.csv", "stein-factor.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // a different seed changes the hash and the estimates
    let c = dir.path().join("c");
    stein(&["experiment", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(fs::read(a.join("stein-factor.csv")).unwrap(), fs::read(c.join("stein-factor.csv")).unwrap());
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"experiment":"matern-scaling","params":{"nu":"fifty"},"seed":1}"#,
    );
    let o = stein(&["experiment", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.nu"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "typo.json", r#"{"experiment":"bernoulli-bound","params":{"vector":[]},"seed":1}"#);
    let o = stein(&["experiment", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("vector"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "noseed.json", r#"{"experiment":"bernoulli-bound","params":{"vectors":[[0.1]]}}"#);
    let o = stein(&["experiment", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "mode.json", r#"{"experiment":"palm-exact","params":{"means":[1.0]},"seed":1}"#);
    let o = stein(&["experiment", "--config", &cfg, "--mode", "mc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mode"), "{}", stderr(&o));
}

#[test]
fn verify_all_passes() {
    let o = stein(&["verify", "all", "--reps", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 15);
    let o = stein(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_csv() {
    let o = stein(&["trace", "--mass", "3", "--dim", "2", "--horizon", "5", "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("time,event,location"));
    assert!(text.lines().count() > 3);
    let again = stein(&["trace", "--mass", "3", "--dim", "2", "--horizon", "5", "--seed", "4"]);
    assert_eq!(text.as_bytes(), &again.stdout[..]);
}
