use std::path::{Path, PathBuf};
use std::process::Command;

use aces_cli::commands::run_preset;
use aces_cli::config::{ExperimentConfig, NoiseSource, Preset};

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn aces(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_aces")).args(args).output().unwrap()
}

#[test]
fn shipped_configs_parse_and_validate() {
    let files = configs();
    assert!(files.len() >= 5);
    for f in files {
        let cfg = ExperimentConfig::load(&f).unwrap();
        let preset = cfg.preset.expect("shipped configs name their preset");
        cfg.validate(preset).unwrap();
        cfg.noise.build().unwrap();
    }
}

#[test]
fn every_preset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for preset in [
        Preset::TwirlDemo,
        Preset::ConfusionDemo,
        Preset::AcesRun,
        Preset::AppendixModels,
        Preset::Rb,
    ] {
        let mut cfg = ExperimentConfig::for_preset(preset);
        cfg.shots = 200;
        cfg.twirl.points = 5;
        cfg.aces.sets = 5;
        cfg.aces.residual_shots = vec![200];
        cfg.appendix.sets = 5;
        cfg.appendix.shots = vec![200, 2000];
        cfg.appendix.comparison_repetitions = 3;
        cfg.rb.circuits_per_depth = 2;
        let out = dir.path().join(preset.name());
        let files = run_preset(preset, &cfg, &out).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        assert!(files.iter().any(|f| f.ends_with("summary.txt")));
    }
}

#[test]
fn noiseless_run_has_unit_fidelities() {
    let mut cfg = ExperimentConfig::for_preset(Preset::AcesRun);
    cfg.noise = NoiseSource::Noiseless { qubits: 2 };
    cfg.aces.sets = 10;
    cfg.aces.residual_shots = vec![];
    cfg.aces.injected_turns = vec![];
    let r = aces_cli::aces_run::run_aces(&cfg).unwrap();
    for (k, b) in &r.fidelity_stats {
        assert!((b.min - 1.0).abs() < 1e-9, "{k}: {b:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"preset": "aces-run", "shots": "many"}"#).unwrap();
    assert_eq!(aces(&["aces-run", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    assert_eq!(aces(&["rb", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    assert_eq!(aces(&["rb", "--config", "/nonexistent.json"]).status.code(), Some(2));

    // output directory nested under a regular file
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let nested = blocker.join("o");
    let o = aces(&["confusion-demo", "--shots", "100", "--out", nested.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));

    let ok = aces(&["confusion-demo", "--shots", "500", "--seed", "9", "--out", out]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(Path::new(out).join("confusion.csv").exists());
}
