use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SIP: &str = r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 9}, "seed": 3,
    "experiment": {"replicas": 100}}"#;

fn orthofield(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_orthofield"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Dotted key paths of a JSON document; arrays contribute their first element.
fn key_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                out.push(p.clone());
                key_paths(child, &p, out);
            }
        }
        Value::Array(items) => {
            if let Some(first) = items.first() {
                key_paths(first, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

fn golden(name: &str, json: &str) {
    let v: Value = serde_json::from_str(json).unwrap();
    let mut paths = Vec::new();
    key_paths(&v, "", &mut paths);
    paths.sort();
    paths.dedup();
    let actual = paths.join("\n") + "\n";
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let expected = fs::read_to_string(&file).unwrap();
    assert_eq!(
        actual, expected,
        "schema of {name} changed; bump SCHEMA_VERSION and update the golden file"
    );
}

#[test]
fn check_passes_and_writes_a_stable_schema() {
    let dir = TempDir::new().unwrap();
    let o = orthofield(dir.path(), SIP, &["check"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = dir.path().join("out");
    let top = fs::read_to_string(out.join("report.json")).unwrap();
    golden("check_report.keys", &top);
    let v: Value = serde_json::from_str(&top).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["verdict"], "PASS");
    assert_eq!(v["convention"]["sign_e"], 1);
    assert_eq!(v["convention"]["sign_h"], 1);
    for suite in [
        "duality",
        "orthogonality",
        "recursion",
        "gradient",
        "carre_du_champ",
        "taylor",
    ] {
        assert!(out.join(suite).join("report.json").is_file(), "{suite}");
        assert!(out.join(suite).join("data.csv").is_file(), "{suite}");
    }
    golden(
        "suite_report.keys",
        &fs::read_to_string(out.join("duality/report.json")).unwrap(),
    );
}

#[test]
fn asymmetric_kernel_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 9,
        "kernel_weights": [[1, "2/3"], [-1, "1/3"]]}}"#;
    let o = orthofield(dir.path(), cfg, &["check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SymmetryViolation"), "{}", stderr(&o));
}

#[test]
fn flipped_convention_fails_with_a_duality_report() {
    let dir = TempDir::new().unwrap();
    let cfg = SIP.replacen(
        "\"seed\": 3",
        "\"seed\": 3, \"convention_override\": {\"sign_e\": 1, \"sign_h\": -1}",
        1,
    );
    let o = orthofield(dir.path(), &cfg, &["check"]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("generator_duality_exact"), "{}", stdout(&o));
    let dual: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/duality/report.json")).unwrap()).unwrap();
    assert_eq!(dual["verdict"], "FAIL");
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_orthofield"))
        .arg("check")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_orthofield"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_dispatch_and_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 16}, "field": {"k": 1},
        "experiment": {"suite": "martingale", "replicas": 400}, "seed": 11}"#;
    let o = orthofield(dir.path(), cfg, &["experiment"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(dir.path().join("out/martingale/data.csv").is_file());

    let o = orthofield(dir.path(), SIP, &["experiment", "--suite", "no_such_suite"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown suite"));

    let o = orthofield(dir.path(), SIP, &["experiment"]);
    assert_eq!(o.status.code(), Some(2), "no suite configured");

    let one = r#"{"model": {"sigma": 1, "alpha": 1, "rho": "1/2", "L": 9},
        "experiment": {"suite": "martingale", "replicas": 1}}"#;
    let o = orthofield(dir.path(), one, &["experiment"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicas"));
}

#[test]
fn experiment_output_does_not_depend_on_workers() {
    let runs: Vec<(String, String)> = ["1", "3"]
        .iter()
        .map(|w| {
            let dir = TempDir::new().unwrap();
            let o = orthofield(
                dir.path(),
                SIP,
                &["experiment", "--suite", "covariance", "--workers", w],
            );
            assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
            let suite = dir.path().join("out/covariance");
            (
                fs::read_to_string(suite.join("data.csv")).unwrap(),
                fs::read_to_string(suite.join("report.json")).unwrap(),
            )
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn simulate_contracts() {
    let dir = TempDir::new().unwrap();
    let o = orthofield(dir.path(), SIP, &["simulate", "--eta", "0,0,0,0,0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap(),
        "time,from,to\n"
    );

    let run = |seed: &str| {
        let d = TempDir::new().unwrap();
        let o = orthofield(d.path(), SIP, &["simulate", "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains(&format!("seed {seed}")));
        fs::read_to_string(d.path().join("out/trajectory.csv")).unwrap()
    };
    let a = run("9");
    assert!(a.lines().count() > 1);
    assert_eq!(a, run("9"));
    assert_ne!(a, run("10"));

    let sep = r#"{"model": {"sigma": -1, "alpha": 1, "rho": "1/2", "L": 12}}"#;
    let o = orthofield(dir.path(), sep, &["simulate", "--horizon", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let mut eta: Vec<i64> = fs::read_to_string(dir.path().join("out/initial.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let traj = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(traj.lines().count() > 10);
    for line in traj.lines().skip(1) {
        let f: Vec<usize> = line.split(',').skip(1).map(|s| s.parse().unwrap()).collect();
        eta[f[0]] -= 1;
        eta[f[1]] += 1;
        assert!(eta.iter().all(|&c| (0..=1).contains(&c)), "{line}");
    }

    let o = orthofield(dir.path(), sep, &["simulate", "--eta", "2,0,0,0,0,0,0,0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = orthofield(dir.path(), SIP, &["simulate", "--dual", "1,1,4"]);
    assert_eq!(o.status.code(), Some(0));
    let init = fs::read_to_string(dir.path().join("out/initial.csv")).unwrap();
    assert!(init.contains("\n1,2\n") && init.contains("\n4,1\n"), "{init}");
}

#[test]
fn convention_and_table_commands() {
    let dir = TempDir::new().unwrap();
    let o = orthofield(dir.path(), SIP, &["resolve-convention"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stdout(&o).starts_with("SIP: sign_e = +1, sign_h = +1"),
        "{}",
        stdout(&o)
    );
    assert!(dir.path().join("out/convention.json").is_file());

    let irw = r#"{"model": {"sigma": 0, "alpha": 1, "rho": "1/2", "L": 9}}"#;
    let o = orthofield(dir.path(), irw, &["resolve-convention"]);
    assert!(
        stdout(&o).starts_with("IRW: sign_e = +1, sign_h = -1"),
        "{}",
        stdout(&o)
    );

    let o = orthofield(dir.path(), SIP, &["dump-table", "--m-max", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,1,1,1"));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/table.json")).unwrap()).unwrap();
    assert_eq!(meta["table"]["m_max"], 2);
}
