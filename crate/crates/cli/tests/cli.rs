use std::path::Path;
use std::process::{Command, Output};

use wsgan_core::harness::ExperimentConfig;

fn wsgan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsgan"))
        .args(args)
        .current_dir(cwd)
        .env_remove("WSGAN_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status,
        stdout(o),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsgan(&["--help"], dir.path());
    assert_ok(&o);
    let text = stdout(&o);
    for sub in [
        "synth-data",
        "synth-lfs",
        "fit-labelmodel",
        "train",
        "benchmark",
        "augment",
        "theory",
        "report",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn data_votes_labelmodel_train_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_ok(&wsgan(
        &["synth-data", "-n", "1000", "--seed", "3", "-o", "data.csv"],
        p,
    ));
    let header = std::fs::read_to_string(p.join("data.csv")).unwrap();
    assert!(header.starts_with("x_0,x_1,label\n"));
    assert_eq!(header.lines().count(), 1001);

    let o = wsgan(
        &[
            "synth-lfs",
            "--data",
            "data.csv",
            "--count",
            "8",
            "-o",
            "votes.csv",
        ],
        p,
    );
    assert_ok(&o);
    assert!(p.join("votes.json").exists());

    let o = wsgan(
        &[
            "fit-labelmodel",
            "--votes",
            "votes.csv",
            "--model",
            "dawid-skene",
            "--data",
            "data.csv",
            "-o",
            "ds.csv",
        ],
        p,
    );
    assert_ok(&o);
    assert!(stdout(&o).contains("covered-set accuracy"));
    let post = std::fs::read_to_string(p.join("ds.csv")).unwrap();
    assert!(post.starts_with("p_0,p_1,p_2,p_3,covered\n"));

    assert_ok(&wsgan(
        &["fit-labelmodel", "--votes", "votes.csv", "-o", "mv.csv"],
        p,
    ));

    let o = wsgan(
        &[
            "train",
            "--data",
            "data.csv",
            "--votes",
            "votes.csv",
            "--epochs",
            "2",
            "-o",
            "run",
        ],
        p,
    );
    assert_ok(&o);
    let hist = std::fs::read_to_string(p.join("run/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3);

    let o = wsgan(
        &[
            "train",
            "--data",
            "data.csv",
            "--votes",
            "votes.csv",
            "--epochs",
            "1",
            "--resume",
            "run/checkpoint.json",
            "-o",
            "resumed",
        ],
        p,
    );
    assert_ok(&o);
    let hist = std::fs::read_to_string(p.join("resumed/history.csv")).unwrap();
    assert!(hist.lines().nth(1).unwrap().starts_with("2,"));
}

#[test]
fn output_root_variable_applies_to_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_wsgan"))
        .args(["synth-data", "-n", "50", "-o", "nested/d.csv"])
        .current_dir(dir.path())
        .env("WSGAN_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_ok(&o);
    assert!(root.join("nested/d.csv").exists());
    assert!(!dir.path().join("nested").exists());
}

#[test]
fn theory_grid_runs_and_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "theory",
        "--m",
        "3,7",
        "--alpha",
        "0.2",
        "--lf-errors",
        "0.25,0.49",
        "--eps",
        "0.1",
        "--trials",
        "2000",
        "--joints",
        "5",
        "--pairs",
        "20",
        "-o",
        "th",
    ];
    let o = wsgan(&args, dir.path());
    assert_ok(&o);
    assert!(dir.path().join("th/theory.json").exists());
    let json = std::fs::read_to_string(dir.path().join("th/theory.json")).unwrap();
    assert!(json.contains("0.49"));

    let o = wsgan(&["theory", "--empty", "-o", "empty"], dir.path());
    assert_ok(&o);
    let o = wsgan(&["report", "th"], dir.path());
    assert_ok(&o);
    assert!(stdout(&o).contains("theory.txt"));
}

#[test]
fn small_benchmark_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsgan(&["benchmark", "--print-config"], dir.path());
    assert_ok(&o);
    let mut cfg = ExperimentConfig::from_json_str(&stdout(&o)).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    cfg.dataset.n = 300;
    cfg.training.epochs = 1;
    cfg.seeds = vec![4];
    std::fs::write(
        dir.path().join("cfg.json"),
        serde_json::to_string(&cfg).unwrap(),
    )
    .unwrap();

    let o = wsgan(
        &["benchmark", "--config", "cfg.json", "-o", "bench"],
        dir.path(),
    );
    assert_ok(&o);
    let summary = std::fs::read_to_string(dir.path().join("bench/summary.csv")).unwrap();
    for model in [
        "mv",
        "dawid_skene",
        "infogan",
        "wsgan_vector",
        "wsgan_encoder",
    ] {
        assert!(summary.contains(model), "{model} missing");
    }
    let o = wsgan(&["report", "bench"], dir.path());
    assert_ok(&o);
    assert!(stdout(&o).contains("0 failures"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsgan(&["report", "missing"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = wsgan(&["synth-data", "--sigma", "-1"], dir.path());
    assert!(!o.status.success());
    let o = wsgan(&["benchmark", "--seeds", ""], dir.path());
    assert!(!o.status.success());
}
