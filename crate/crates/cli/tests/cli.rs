use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nipw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nipw")).args(args).output().expect("spawn nipw")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    nipw(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SIMULATE: &str = r#"{"command":"simulate","seed":11,"model":{"n":8,"theta":0.5,"lambda":[3,1,1,0,0,0,0,0]},"T":1.5,
  "observe":{"times":[0.5,1.5],"points":[[0.5,0.5],[1.0,-0.3]]}}"#;

#[test]
fn same_seed_gives_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", SIMULATE);
    let a = run(&cfg, &dir.path().join("a"), &["--no-header"]);
    let b = run(&cfg, &dir.path().join("b"), &["--no-header", "--workers", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    for f in ["trajectory.csv", "observations.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
        assert!(!x.starts_with(b"#"));
    }
    let c = run(&cfg, &dir.path().join("c"), &["--seed", "12", "--no-header"]);
    assert_eq!(c.status.code(), Some(0));
    assert_ne!(
        std::fs::read(dir.path().join("a/trajectory.csv")).unwrap(),
        std::fs::read(dir.path().join("c/trajectory.csv")).unwrap()
    );
}

#[test]
fn header_line_is_the_only_difference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", SIMULATE);
    assert!(run(&cfg, &dir.path().join("h"), &[]).status.success());
    assert!(run(&cfg, &dir.path().join("p"), &["--no-header"]).status.success());
    let with = std::fs::read_to_string(dir.path().join("h/trajectory.csv")).unwrap();
    let without = std::fs::read_to_string(dir.path().join("p/trajectory.csv")).unwrap();
    let (first, rest) = with.split_once('\n').unwrap();
    assert!(first.starts_with("# nipw") && first.contains("seed=11"));
    assert_eq!(rest, without);
}

#[test]
fn summary_line_is_machine_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", SIMULATE);
    let o = run(&cfg, dir.path(), &["simulate"]);
    let line = stdout(&o);
    assert_eq!(line.lines().count(), 1);
    let fields: std::collections::HashMap<&str, &str> =
        line.trim().split(' ').map(|kv| kv.split_once('=').unwrap()).collect();
    assert_eq!(fields["status"], "PASS");
    assert_eq!(fields["command"], "simulate");
    assert_eq!(fields["seed"], "11");
    assert_eq!(fields["outputs"], "trajectory.csv,observations.csv");
}

#[test]
fn increasing_lambda_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"command":"simulate","seed":1,"model":{"n":3,"theta":1.0,"lambda":[0,1,2]},"T":1.0}"#,
    );
    let o = run(&cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.lambda"), "{}", stderr(&o));
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn schema_violations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"command":"scan","model":{"n":3,"theta":1.0,"lambda":"packed"},"T":1.0,"runs":4}"#, "seed"),
        (r#"{"command":"scan","seed":1,"model":{"n":3,"theta":1.0,"lambda":"packed"},"T":1.0,"runs":4,"extra":1}"#, "extra"),
        (r#"{"command":"limit","seed":1,"mu0":{"kind":"uniform","a":0,"b":1},"T":0.5,"points":[[1.0,0.0]]}"#, "points[0]"),
        (r#"{"command":"clt","seed":1,"model":{"n":3,"theta":1.0,"lambda":[1,0,0]},"probes":{"base":[[1,1]],"times":[0.1]},"runs":10}"#, "model.lambda"),
        (r#"{"command":"teleport","seed":1}"#, "command"),
        (r#"[1,2]"#, "$"),
    ];
    for (k, (body, path)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{k}.json"), body);
        let o = run(&cfg, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", stderr(&o));
        assert!(stderr(&o).contains(path), "case {k}: {}", stderr(&o));
    }
}

#[test]
fn command_argument_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.json", SIMULATE);
    let o = run(&cfg, dir.path(), &["scan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&dir.path().join("missing.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    let cfg = write_config(dir.path(), "sim.json", SIMULATE);
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = run(&cfg, &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn exact_check_passes_and_fails_on_its_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let body = |tol: f64| {
        format!(r#"{{"command":"exact-check","seed":5,"n":2,"theta":1.0,"T":0.2,"max_boxes":12,"runs":20000,"tv_tolerance":{tol}}}"#)
    };
    let ok = run(&write_config(dir.path(), "ok.json", &body(0.03)), &dir.path().join("ok"), &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("ok/exact_check.json")).unwrap()).unwrap();
    assert!(report["tv_distance"].as_f64().unwrap() < 0.03);
    let strict = run(&write_config(dir.path(), "strict.json", &body(1e-9)), &dir.path().join("strict"), &[]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).starts_with("status=FAIL"));
    assert!(dir.path().join("strict/exact_check.json").exists());
}

#[test]
fn truncation_too_coarse_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tail.json",
        r#"{"command":"exact-check","seed":5,"n":3,"theta":1.0,"T":2.0,"max_boxes":2,"runs":10}"#,
    );
    assert_eq!(run(&cfg, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn clt_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "clt.json",
        r#"{"command":"clt","seed":8,"model":{"n":30,"theta":1.0,"lambda":"packed"},
            "probes":{"base":[[1.0,1.0],[0.5,0.7]],"times":[0.25,0.5]},"runs":400}"#,
    );
    let o = run(&cfg, dir.path(), &["clt"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("clt_report.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("clt_report.json")).unwrap()).unwrap();
    assert_eq!(json["runs"], 400);
    assert_eq!(json["probes"].as_array().unwrap().len(), 4);
}

#[test]
fn limit_dbm_couple_and_scan_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_config(dir.path(), "mu0.csv", "location,weight\n0.0,0.5\n1.0,0.5\n");
    assert!(csv.exists());
    let cases = [
        (
            r#"{"command":"limit","mu0":{"kind":"csv","path":"mu0.csv"},"T":0.3,"points":[[0.5,1.0]],
                "density":{"lo":-1,"hi":2,"points":31}}"#,
            vec!["limit.csv", "density.csv"],
        ),
        (
            r#"{"command":"dbm-compare","mu0":{"kind":"uniform","a":0,"b":1},"T":0.5,"points":[[0.5,1.0],[2.0,0.4]]}"#,
            vec!["dbm_compare.json"],
        ),
        (
            r#"{"command":"couple","model":{"n":6,"theta":0.5,"lambda":"packed"},"upper":[3,2,2,1,0,0],"T":0.5,"runs":200}"#,
            vec!["couple.json"],
        ),
        (r#"{"command":"scan","model":{"n":10,"theta":2.0,"lambda":"packed"},"T":0.5,"runs":50}"#, vec!["scan.json"]),
    ];
    for (k, (body, files)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{k}.json"), body);
        let out = dir.path().join(format!("o{k}"));
        let o = run(&cfg, &out, &["--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "case {k}: {}{}", stdout(&o), stderr(&o));
        for f in files {
            assert!(out.join(f).exists(), "case {k}: missing {f}");
        }
    }
}

#[test]
fn shipped_configs_match_the_schema() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("schema/run_config.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(root.join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {errors:?}", path.display());
        seen += 1;
    }
    assert!(seen >= 7);
    for bad in [
        r#"{"command":"scan","seed":1,"model":{"n":3,"theta":1.0,"lambda":"packed"},"T":1.0,"runs":4,"extra":1}"#,
        r#"{"command":"scan","seed":1,"model":{"n":3,"theta":-1.0,"lambda":"packed"},"T":1.0,"runs":4}"#,
        r#"{"command":"limit","seed":1,"mu0":{"kind":"uniform","a":0,"b":1},"T":0.5,"points":[[1.0,0.0]]}"#,
        r#"{"command":"clt","seed":1,"model":{"n":3,"theta":1.0,"lambda":[1,0,0]},"probes":{"base":[[1,1]],"times":[0.1]},"runs":10}"#,
    ] {
        let value: serde_json::Value = serde_json::from_str(bad).unwrap();
        assert!(!validator.is_valid(&value), "{bad}");
    }
}
