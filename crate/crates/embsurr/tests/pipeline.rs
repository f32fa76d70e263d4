use std::path::{Path, PathBuf};
use std::process::Command;

use embsurr::artifacts::{self, StudyDir};
use embsurr::config::{SeedRange, StudyConfig};
use embsurr::core::data::Split;
use embsurr::core::gp::GpConfig;
use embsurr::core::synth::{generate, SynthConfig};
use embsurr::{embd, study, Error};

const BIN: &str = env!("CARGO_BIN_EXE_embsurr");

fn write_dataset(path: &Path) {
    let synth = generate(&SynthConfig { n: 240, d: 12, informative: 6, test: 48, seed: 7, ..Default::default() }).unwrap();
    embd::save(&synth.dataset, path).unwrap();
}

fn small_config(dataset: PathBuf) -> StudyConfig {
    StudyConfig {
        dataset,
        gp: GpConfig { pop_size: 16, max_generations: 4, ..Default::default() },
        seeds: SeedRange { start: 0, end: 3 },
        analysis: embsurr::config::AnalysisConfig { bootstraps: 10, ..Default::default() },
        ..Default::default()
    }
}

fn setup(root: &Path) -> PathBuf {
    let data = root.join("data.embd");
    write_dataset(&data);
    let config = root.join("study.json");
    let c = small_config("data.embd".into());
    std::fs::write(&config, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    config
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn stage(name: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, String) {
    let mut args = vec![name, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn cli_runs_every_stage_and_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let config = setup(tmp.path());
    let out = tmp.path().join("study");
    for (name, extra) in [
        ("partition", &[][..]),
        ("train", &["--jobs", "2"][..]),
        ("select", &[][..]),
        ("calibrate", &[][..]),
        ("evaluate", &[][..]),
        ("analyze", &[][..]),
        ("report", &[][..]),
    ] {
        let (code, text) = stage(name, &config, &out, extra);
        assert_eq!(code, 0, "{name} failed: {text}");
    }
    let dir = StudyDir::new(&out);
    for f in [
        artifacts::PARTITION,
        artifacts::SELECTION,
        artifacts::CALIBRATION,
        artifacts::METRICS_JSON,
        artifacts::METRICS_CSV,
        artifacts::CALIBRATION_TEST_CSV,
        artifacts::RELIABILITY_CSV,
        artifacts::REPORT,
        "runs_test.csv",
    ] {
        assert!(dir.path(f).is_file(), "{f} missing");
    }
    for f in ["importance.csv", "effects.csv", "effect_summary.csv", "usage.csv", "overlap.csv", "logits.txt", "analysis.json"] {
        assert!(dir.analysis(f).is_file(), "analysis/{f} missing");
    }
    for seed in 0..3 {
        assert!(dir.run(seed).is_file());
    }
    let metrics = std::fs::read_to_string(dir.path(artifacts::METRICS_CSV)).unwrap();
    assert!(metrics.starts_with("metric,mean,halfwidth\nF1,"));
    let report = std::fs::read_to_string(dir.path(artifacts::REPORT)).unwrap();
    assert!(report.contains("## Calibration (test)"));
}

#[test]
fn missing_upstream_artifact_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = setup(tmp.path());
    let out = tmp.path().join("empty");
    for name in ["train", "select", "calibrate", "evaluate", "analyze", "report"] {
        let (code, text) = stage(name, &config, &out, &[]);
        assert_eq!(code, 3, "{name}: {text}");
        assert!(text.contains("missing artifact"));
    }
}

#[test]
fn bad_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    std::fs::write(&config, r#"{"dataset": "x.embd", "val_fraction": 1.5}"#).unwrap();
    let (code, _) = stage("partition", &config, &tmp.path().join("s"), &[]);
    assert_eq!(code, 2);
    let (code, _) = cli(&["train", "--config", "c.json", "--out", "o", "--seeds", "5..2"]);
    assert_eq!(code, 2, "clap usage errors also exit 2");
}

#[test]
fn changed_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let config = setup(tmp.path());
    let out = tmp.path().join("study");
    assert_eq!(stage("partition", &config, &out, &[]).0, 0);
    let mut c = StudyConfig::load(&config).unwrap();
    c.gp.pop_size = 18;
    c.dataset = "data.embd".into();
    std::fs::write(&config, serde_json::to_string(&c).unwrap()).unwrap();
    let (code, text) = stage("train", &config, &out, &[]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("refusing"));
}

#[test]
fn foreign_run_file_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path().join("data.embd"));
    write_dataset(&config.dataset);
    let dir = StudyDir::new(tmp.path().join("study"));
    study::partition_stage(&config, &dir).unwrap();
    study::train_stage(&config, &dir, SeedRange { start: 0, end: 1 }, 1).unwrap();
    let path = dir.run(0);
    let mut record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    record["partition_digest"] = serde_json::json!(12345u64);
    std::fs::write(&path, record.to_string()).unwrap();
    let err = study::train_stage(&config, &dir, SeedRange { start: 0, end: 2 }, 1).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    assert!(matches!(study::select_stage(&config, &dir, SeedRange { start: 0, end: 1 }), Err(Error::Validation(_))));
}

/// Everything up to calibration must be blind to test rows: scrambling them
/// leaves every artifact unchanged apart from the dataset digest.
#[test]
fn stages_before_evaluate_never_read_test_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = tmp.path().join("clean.embd");
    write_dataset(&clean);
    let mut scrambled = embd::load(&clean).unwrap();
    for i in scrambled.indices(Split::Test) {
        scrambled.x.row_mut(i).fill(1.0e6);
        scrambled.y[i] = (scrambled.y[i] + 1) % scrambled.classes;
    }
    let dirty = tmp.path().join("dirty.embd");
    embd::save(&scrambled, &dirty).unwrap();

    let seeds = SeedRange { start: 0, end: 2 };
    let mut parts = Vec::new();
    let mut dirs = Vec::new();
    for (name, data) in [("a", &clean), ("b", &dirty)] {
        let config = small_config(data.clone());
        let dir = StudyDir::new(tmp.path().join(name));
        let mut p = study::partition_stage(&config, &dir).unwrap();
        study::train_stage(&config, &dir, seeds, 1).unwrap();
        study::select_stage(&config, &dir, seeds).unwrap();
        study::calibrate_stage(&config, &dir).unwrap();
        p.dataset_digest = 0;
        parts.push(p);
        dirs.push(dir);
    }
    assert_eq!(parts[0], parts[1]);
    let read = |dir: &StudyDir, p: PathBuf| std::fs::read(dir.root().join(p)).unwrap();
    for f in [PathBuf::from(artifacts::SELECTION), PathBuf::from(artifacts::CALIBRATION), Path::new("runs").join("run_0.json"), Path::new("runs").join("run_1.json")] {
        assert_eq!(read(&dirs[0], f.clone()), read(&dirs[1], f.clone()), "{} differs", f.display());
    }
}

#[test]
fn runs_are_deterministic_across_job_counts_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path().join("data.embd"));
    write_dataset(&config.dataset);
    let seeds = SeedRange { start: 0, end: 4 };
    let serial = StudyDir::new(tmp.path().join("serial"));
    let parallel = StudyDir::new(tmp.path().join("parallel"));
    study::partition_stage(&config, &serial).unwrap();
    study::partition_stage(&config, &parallel).unwrap();
    study::train_stage(&config, &serial, seeds, 1).unwrap();
    study::train_stage(&config, &parallel, seeds, 3).unwrap();
    for s in seeds.seeds() {
        assert_eq!(std::fs::read(serial.run(s)).unwrap(), std::fs::read(parallel.run(s)).unwrap(), "seed {s}");
    }

    let before = std::fs::read(serial.run(2)).unwrap();
    std::fs::remove_file(serial.run(2)).unwrap();
    let resumed = study::train_stage(&config, &serial, seeds, 2).unwrap();
    assert_eq!(resumed.trained, vec![2]);
    assert_eq!(resumed.reused, vec![0, 1, 3]);
    assert_eq!(std::fs::read(serial.run(2)).unwrap(), before);

    // more seeds extend the study without touching finished runs
    let more = study::train_stage(&config, &serial, SeedRange { start: 0, end: 5 }, 2).unwrap();
    assert_eq!(more.trained, vec![4]);
}

#[test]
fn csv_dataset_drives_the_same_study() {
    let tmp = tempfile::tempdir().unwrap();
    let e = tmp.path().join("data.embd");
    write_dataset(&e);
    let c = tmp.path().join("data.csv");
    embsurr::table::save(&embd::load(&e).unwrap(), &c).unwrap();
    let a = study::partition_stage(&small_config(e), &StudyDir::new(tmp.path().join("a"))).unwrap();
    let b = study::partition_stage(&small_config(c), &StudyDir::new(tmp.path().join("b"))).unwrap();
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.preprocess, b.preprocess);
}
