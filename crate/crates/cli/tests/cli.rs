use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_infoshock");

fn infoshock(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("INFOSHOCK_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn synth(dir: &Path, preset: &str) -> String {
    let o = infoshock(&["synth", "--preset", preset, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("config.toml").to_string_lossy().into_owned()
}

const OUTPUTS: [&str; 6] = [
    "table1.csv",
    "table2.csv",
    "event_study.csv",
    "table5.csv",
    "series.csv",
    "irf.csv",
];

#[test]
fn run_writes_every_artifact_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    let o = infoshock(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in OUTPUTS {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    for f in OUTPUTS {
        assert!(manifest.contains(&format!("\"{f}\"")), "{f} not listed");
    }
    assert!(manifest.contains("config_hash"));

    let r = infoshock(&["report", "--config", &cfg]);
    assert_eq!(code(&r), 0);
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("Nominal 3 month"));
}

#[test]
fn stages_compose_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    let whole = dir.path().join("whole");
    let parts = dir.path().join("parts");
    let o = infoshock(&["run", "--config", &cfg, "--out", whole.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for stage in ["decompose", "channels", "event-study", "bvar"] {
        let o = infoshock(&[stage, "--config", &cfg, "--out", parts.to_str().unwrap()]);
        assert_eq!(
            code(&o),
            0,
            "{stage}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for f in OUTPUTS {
        assert_eq!(
            fs::read(whole.join(f)).unwrap(),
            fs::read(parts.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn report_without_outputs_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = infoshock(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifact"));
}

#[test]
fn missing_input_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    fs::remove_file(dir.path().join("shocks.csv")).unwrap();
    let o = infoshock(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("shocks"));
    assert!(!dir.path().join("out").join("table1.csv").exists());
}

#[test]
fn failing_stage_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    // A macro panel too short for twelve lags makes the last stage fail.
    let text = fs::read_to_string(dir.path().join("macro.csv")).unwrap();
    let short: Vec<&str> = text.lines().take(6).collect();
    fs::write(dir.path().join("macro.csv"), short.join("\n") + "\n").unwrap();
    let o = infoshock(&[
        "run",
        "--config",
        &cfg,
        "--shock",
        "pns",
        "--subsample",
        "full",
    ]);
    assert_ne!(code(&o), 0);
    let out = dir.path().join("out");
    for f in OUTPUTS.iter().chain(["manifest.json"].iter()) {
        assert!(!out.join(f).exists(), "{f} left behind");
    }
}

#[test]
fn recovery_preset_then_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "recovery");
    let o = infoshock(&[
        "decompose",
        "--config",
        &cfg,
        "--shock",
        "pns",
        "--subsample",
        "full",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t1 = fs::read_to_string(dir.path().join("out").join("table1.csv")).unwrap();
    let mut lines = t1.lines();
    assert_eq!(lines.next(), Some("subsample,shock,r2,theta,se,t,p"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..2], &["full", "PNS"]);
    let theta: f64 = row[3].parse().unwrap();
    assert!(theta.is_finite());
    assert!(lines.next().is_none());
}

#[test]
fn environment_overrides_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    let target = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args([
            "decompose",
            "--config",
            &cfg,
            "--shock",
            "ff4",
            "--subsample",
            "prezlb",
        ])
        .env("INFOSHOCK_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("table1.csv").is_file());
}

#[test]
fn usage_and_config_errors() {
    assert_eq!(code(&infoshock(&["decompose"])), 2);
    assert_eq!(code(&infoshock(&["frobnicate"])), 2);
    assert_eq!(
        code(&infoshock(&[
            "synth", "--preset", "nope", "--out", "/tmp/x"
        ])),
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = \"one\"\n").unwrap();
    assert_eq!(
        code(&infoshock(&["run", "--config", bad.to_str().unwrap()])),
        2
    );
}

#[test]
fn ingest_check_reports_sample_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path(), "small");
    let o = infoshock(&["ingest-check", "--config", &cfg]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("106 meetings"));
    assert_eq!(text.lines().count(), 6);
}
