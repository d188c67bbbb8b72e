use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use socketvib::container::Manifest;
use socketvib::lstm::{reference_preset, ModelParams, NetworkSpec};
use socketvib::report::perception_accuracy;
use socketvib::sim::HandArchetype;

fn cli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socketvib"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SOCKETVIB_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = cli(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::read_text_file(&dir.join("manifest.txt")).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Dataset of `n` impacts per finger split 60/20/20 into `dir`.
fn splits(dir: &Path, hand: &str, n: usize) {
    ok(dir, &["dataset", "--hand", hand, "--n", &n.to_string()]);
    let ds = dir.join(format!("dataset-{hand}.bin"));
    ok(dir, &["split", "--dataset", s(&ds), "--fractions", "0.6,0.2,0.2"]);
}

#[test]
fn simulate_writes_archive_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let stdout = ok(t.path(), &["simulate", "--hand", "SH", "--n", "1"]);
    assert!(stdout.contains("simulated 5 impacts"), "{stdout}");
    let m = manifest(t.path());
    assert_eq!(m.get("subcommand"), Some("simulate"));
    assert_eq!(m.get("hand"), Some("SH"));
    assert_eq!(m.get("n_per_finger"), Some("1"));
    assert_eq!(m.get("output.0"), Some("sim-SH.bin"));
    let archive = socketvib::sim::SimArchive::load(&t.path().join("sim-SH.bin")).unwrap();
    assert_eq!(archive.outputs.len(), 5);
}

#[test]
fn invalid_archetype_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let o = cli(t.path(), &["simulate", "--hand", "XX"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown hand archetype"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        ok(d, &["--seed", "9", "simulate", "--hand", "IL", "--n", "2", "--impactor", "pendulum"]);
        ok(d, &["pipeline", "--archive", s(&d.join("sim-IL.bin"))]);
    }
    for f in ["sim-IL.bin", "impacts.csv", "energy.csv", "energy.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma.get("output.0.sha256"), mb.get("output.0.sha256"));
}

#[test]
fn transmission_report_requires_four_archives() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["simulate", "--hand", "SH", "--n", "1"]);
    let o = cli(t.path(), &["transmission-report", "--archive", s(&t.path().join("sim-SH.bin"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("requires four archives"));
}

#[test]
fn transmission_report_over_four_hands() {
    let t = tempfile::tempdir().unwrap();
    let mut args = vec!["transmission-report".to_string()];
    for h in HandArchetype::ALL {
        ok(t.path(), &["simulate", "--hand", h.code(), "--n", "2"]);
        args.push("--archive".into());
        args.push(t.path().join(format!("sim-{}.bin", h.code())).display().to_string());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let stdout = ok(t.path(), &args);
    assert!(stdout.contains("spearman_rho="), "{stdout}");
    for f in ["energy.csv", "summary.csv", "report.txt", "mean-energy.svg", "energy-CH.svg"] {
        assert!(t.path().join(f).exists(), "{f}");
    }
}

#[test]
fn dataset_has_one_hundred_impacts_per_finger() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["dataset", "--hand", "VP"]);
    let d = socketvib::signal::load_dataset(&t.path().join("dataset-VP.bin")).unwrap();
    assert_eq!(d.len(), 500);
    assert_eq!(d.counts(), [100; 5]);
}

#[test]
fn preset_values_are_applied_and_flags_win() {
    let t = tempfile::tempdir().unwrap();
    splits(t.path(), "VP", 5);
    let cfg = t.path().join("cfg.txt");
    fs::write(&cfg, "train.learning_rate=0.005\nnetwork.dropout=0.3\n").unwrap();
    let (tr, va) = (t.path().join("train.bin"), t.path().join("validation.bin"));
    ok(
        t.path(),
        &["--config", s(&cfg), "train", "--train", s(&tr), "--val", s(&va), "--preset", "SH", "--epochs", "1"],
    );
    let (spec, tc) = reference_preset(HandArchetype::Sh, 1);
    let m = manifest(t.path());
    assert_eq!(m.get("preset"), Some("SH"));
    assert_eq!(m.parse::<usize>("network.dense_units").unwrap(), spec.dense_units);
    assert_eq!(m.parse::<usize>("network.lstm_hidden").unwrap(), spec.lstm_hidden);
    assert_eq!(m.parse::<usize>("train.batch_size").unwrap(), tc.batch_size);
    assert_eq!(m.parse::<f64>("train.learning_rate").unwrap(), 0.005);
    assert_eq!(m.parse::<f64>("network.dropout").unwrap(), 0.3);
    assert_eq!(m.parse::<usize>("train.epochs").unwrap(), 1);
    assert!(t.path().join("model.bin").exists());
    assert_eq!(fs::read_to_string(t.path().join("history.csv")).unwrap().lines().count(), 2);
}

#[test]
fn random_models_score_near_chance() {
    let t = tempfile::tempdir().unwrap();
    splits(t.path(), "CH", 20);
    let spec = NetworkSpec::new(8, 8);
    let test = t.path().join("test.bin");
    let mut total = 0.0;
    for seed in 0..5 {
        let model = t.path().join(format!("random{seed}.bin"));
        ModelParams::random(&spec, seed, 0.5).unwrap().save(&model).unwrap();
        let out = t.path().join(format!("eval{seed}"));
        let stdout = ok(&out, &["eval", "--model", s(&model), "--test", s(&test)]);
        assert!(stdout.contains("accuracy="), "{stdout}");
        total += manifest(&out).parse::<f64>("accuracy").unwrap();
        assert!(out.join("report.txt").exists() && out.join("summary.csv").exists());
    }
    let mean = total / 5.0;
    assert!((0.1..=0.3).contains(&mean), "mean random accuracy {mean}");
}

#[test]
fn eval_refuses_the_training_split() {
    let t = tempfile::tempdir().unwrap();
    splits(t.path(), "SH", 5);
    let (tr, va) = (t.path().join("train.bin"), t.path().join("validation.bin"));
    ok(
        t.path(),
        &["train", "--train", s(&tr), "--val", s(&va), "--epochs", "1", "--dense", "4", "--hidden", "4"],
    );
    let o = cli(t.path(), &["eval", "--model", s(&t.path().join("model.bin")), "--test", s(&tr)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("error[provenance]") && err.contains("training split"), "{err}");
    ok(t.path(), &["eval", "--model", s(&t.path().join("model.bin")), "--test", s(&t.path().join("test.bin"))]);
}

#[test]
fn search_writes_trials() {
    let t = tempfile::tempdir().unwrap();
    splits(t.path(), "VP", 5);
    let cfg = t.path().join("cfg.txt");
    fs::write(
        &cfg,
        "search.epochs_min=1\nsearch.epochs_max=1\nsearch.dense_min=4\nsearch.dense_max=4\nsearch.hidden_min=4\nsearch.hidden_max=4\n",
    )
    .unwrap();
    let (tr, va) = (t.path().join("train.bin"), t.path().join("validation.bin"));
    ok(t.path(), &["--config", s(&cfg), "search", "--train", s(&tr), "--val", s(&va), "--budget", "2"]);
    let trials = fs::read_to_string(t.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);
    assert!(fs::read_to_string(t.path().join("best.txt")).unwrap().contains("val_accuracy="));
}

#[test]
fn help_lists_the_tuned_values() {
    let t = tempfile::tempdir().unwrap();
    let help = ok(t.path(), &["train", "--help"]);
    for h in HandArchetype::ALL {
        let (spec, tc) = reference_preset(h, 1);
        let line = help
            .lines()
            .find(|l| l.trim_start().starts_with(&format!("{}:", h.code())))
            .unwrap_or_else(|| panic!("no help line for {h}"));
        for v in [
            tc.learning_rate.to_string(),
            format!("{} epochs", tc.epochs),
            format!("{} dense", spec.dense_units),
            format!("{} LSTM", spec.lstm_hidden),
            format!("batch {}", tc.batch_size),
        ] {
            assert!(line.contains(&v), "{line:?} lacks {v:?}");
        }
    }
    let help = ok(t.path(), &["transmission-report", "--help"]);
    for h in HandArchetype::ALL {
        assert!(help.contains(&format!("{} {}%", h.code(), perception_accuracy(h))), "{h}");
    }
    assert!(help.contains("chance level 20%"));
}
