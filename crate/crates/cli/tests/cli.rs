use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn torobs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torobs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TOROBS_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn reference_cluster_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = torobs(
        &["clusters", "--d", "1", "--r", "1", "--f", "60"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("clusters.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let sizes: Vec<usize> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(sizes.len(), 21);
    assert_eq!(sizes.iter().filter(|&&s| s == 1).count(), 20);
    assert!(sizes.contains(&101));
}

#[test]
fn report_embeds_resolved_config_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let o = torobs(&["orbits", "--d", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("orbits.json")).unwrap()).unwrap();
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["config"]["command"], "orbits");
    assert_eq!(doc["config"]["d"], 2);
    assert_eq!(doc["config"]["b"], 0.6);
    assert_eq!(doc["result"]["class_count"], 2);
    assert!(doc["config"].get("scan").is_some());
}

#[test]
fn verify_lattice_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = torobs(&["verify", "--suite", "lattice"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 4);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn negative_scale_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, "{\n  \"d\": 1,\n  \"r\": -2\n}\n").unwrap();
    let o = torobs(&["clusters", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("field `r`"), "{err}");
    assert!(err.contains("run.json:3"), "{err}");

    let o = torobs(&["clusters", "--r", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("field `r`"));
}

#[test]
fn unknown_keys_are_rejected_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        "{\n  \"d\": 1,\n  \"scan\": {\n    \"kind\": \"ui\",\n    \"sample\": 3\n  }\n}\n",
    )
    .unwrap();
    let o = torobs(&["scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("`sample`") && err.contains(":5"), "{err}");
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, "{\"d\": 1, \"r\": 1, \"f\": 60}").unwrap();
    let o = torobs(
        &["clusters", "--config", cfg.to_str().unwrap(), "--f", "30"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("clusters.json")).unwrap())
            .unwrap();
    assert_eq!(doc["config"]["f"], 30);
    assert_eq!(doc["result"]["point_count"], 61);
}

#[test]
fn identical_seeds_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["scan", "ui", "--f", "6", "--samples", "10", "--seed", "5"];
    for dir in [&a, &b] {
        let o = torobs(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(a.path().join("ui.csv")).unwrap(),
        fs::read(b.path().join("ui.csv")).unwrap()
    );
    let strip = |p: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("scan.json")).unwrap()).unwrap();
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn non_convergence_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"d": 1, "f": 8, "max_iterations": 1, "tol": 1e-14,
            "potential": {"representation": "fourier_modes", "dim": 1, "degree": 1,
                          "modes": [{"k": [1], "re": 0.2}, {"k": [-1], "re": 0.2}]}}"#,
    )
    .unwrap();
    let o = torobs(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("solve failed"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_torobs"))
        .args(["orbits", "--out"])
        .arg(dir.path())
        .env("TOROBS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("TOROBS_THREADS"));
}
