use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use qnet::cli::{execute, Command};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join("configs")
}

/// Command for each bundled config, keyed by file-name prefix.
fn command_for(name: &str) -> Command {
    match &name[..3] {
        "c01" | "c02" | "c03" | "c04" => Command::Directionality,
        "c05" | "c06" => Command::Dynamics,
        "c07" | "c08" | "c09" | "c11" | "c12" => Command::Scatter,
        "c10" | "c13" | "c14" => Command::Protocol,
        "c15" => Command::Circuit,
        other => panic!("no command for {other}"),
    }
}

fn qnet() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_qnet"))
}

#[test]
fn every_bundled_config_runs() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let name = path.file_stem().unwrap().to_str().unwrap().to_string();
        let text = std::fs::read_to_string(&path).unwrap();
        let d = execute(command_for(&name), &text, 0).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!d.rows.is_empty(), "{name}");
        assert!(d.rows.iter().all(|r| r.len() == d.columns.len()), "{name}");
        n += 1;
    }
    assert!(n >= 15);
}

#[test]
fn binary_writes_csv_and_json() {
    let dir = std::env::temp_dir().join(format!("qnet-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = configs_dir().join("c14_detector.json");
    let csv = dir.join("det.csv");
    let st = qnet().args(["protocol", "--config"]).arg(&cfg).arg("--out").arg(&csv).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# schema_version=1\n"));
    assert!(text.contains("\ndelta_p,p_det,p_no_click,total\n"));

    let out = qnet().args(["protocol", "--format", "json", "--jobs", "2", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seeds_are_reproducible() {
    let cfg = configs_dir().join("c08_backend_equivalence.json");
    let run = |seed: &str| qnet().args(["scatter", "--seed", seed, "--config"]).arg(&cfg).output().unwrap().stdout;
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
}

#[test]
fn exit_codes() {
    let dir = std::env::temp_dir().join(format!("qnet-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"protocol": "detector", "delta_p": [0.0], "extra": true}"#).unwrap();
    let st = qnet().args(["protocol", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));

    std::fs::write(&bad, r#"{"mode": "single", "r": 0.2, "gamma": -1.0}"#).unwrap();
    let st = qnet().args(["directionality", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));

    // a long-lived subradiant mode outlasts the emission horizon
    std::fs::write(&bad, r#"{"mode": "single", "r": 0.7}"#).unwrap();
    let st = qnet().args(["directionality", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(3));

    let st = qnet().args(["protocol", "--config"]).arg(dir.join("missing.json")).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = qnet().args(["teleport", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
