//! CLI contract: subcommand behavior, exit codes, and artifacts.

use std::path::{Path, PathBuf};
use std::process::Command;

use unreal::graph::save_graph;
use unreal::synth::{generate, SynthConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unreal"))
}

fn write_dataset(dir: &Path) {
    let g = generate(&SynthConfig {
        class_sizes: vec![120, 120, 120, 120],
        f: 24,
        active_dims: 5,
        noise: 0.8,
        p_in: 0.03,
        p_out: 0.004,
        seed: 9,
    })
    .unwrap();
    std::fs::create_dir_all(dir).unwrap();
    save_graph(
        &g,
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )
    .unwrap();
}

#[test]
fn prepare_split_prints_distribution_and_writes_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let out = tmp.path().join("split.txt");
    let result = bin()
        .args(["prepare-split", "--rho", "10", "--majority", "20"])
        .arg("--data-dir")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .args(["--val-per-class", "10", "--seed", "1"])
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("achieved rho 10.00"), "{stdout}");
    let split = std::fs::read_to_string(&out).unwrap();
    assert!(split.starts_with("[train]"));
    assert!(split.contains("[val]"));
    assert!(split.contains("[test]"));
}

#[test]
fn missing_dataset_exits_2_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let ghost = tmp.path().join("nope");
    let result = bin()
        .args(["prepare-split", "--rho", "10"])
        .arg("--data-dir")
        .arg(&ghost)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("nope"), "{stderr}");
}

#[test]
fn infeasible_rho_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let result = bin()
        .args(["prepare-split", "--rho", "1", "--majority", "100000"])
        .arg("--data-dir")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("capacity"), "{stderr}");
}

#[test]
fn run_writes_journal_audit_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let out_dir = tmp.path().join("out");
    let result = bin()
        .args([
            "run",
            "--method",
            "vanilla",
            "--rho",
            "10",
            "--val-per-class",
            "10",
            "--epochs",
            "60",
            "--hidden",
            "16",
            "--seed",
            "2",
        ])
        .arg("--data-dir")
        .arg(&data)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("bAcc"), "{stdout}");
    assert!(out_dir.join("run.jsonl").exists());
    assert!(out_dir.join("run.audit.jsonl").exists());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("run.jsonl"));

    // The journal embeds the fully-resolved config.
    let record = unreal::pipeline::read_run_record(&out_dir.join("run.jsonl")).unwrap();
    assert_eq!(record.summary.config.model.max_epochs, 60);
    assert_eq!(record.summary.config.model.hidden, 16);
    assert_eq!(record.summary.config.seed, 2);
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "[run]\nmethdo = unreal\n").unwrap();
    let result = bin()
        .args(["run", "--rho", "10"])
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("methdo"));
}

#[test]
fn sweep_runs_grid_and_empty_grid_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);

    let cfg = tmp.path().join("sweep.cfg");
    std::fs::write(
        &cfg,
        "[model]\nhidden = 16\nmax_epochs = 50\npatience = 30\n\n[run]\nmethod = vanilla\n\n[sweep]\nseed = 1,2\nrho = 10\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("sweep-out");
    let result = bin()
        .arg("sweep")
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--val-per-class", "10", "--jobs", "2"])
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    assert!(out_dir.join("run_0000.jsonl").exists());
    assert!(out_dir.join("run_0001.jsonl").exists());
    assert!(out_dir.join("summary.md").exists());

    let empty = tmp.path().join("empty.cfg");
    std::fs::write(&empty, "[model]\nhidden = 16\n").unwrap();
    let result = bin()
        .arg("sweep")
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&empty)
        .arg("--out-dir")
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn report_aggregates_and_rejects_schema_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let out_dir = tmp.path().join("out");
    bin()
        .args([
            "run",
            "--method",
            "vanilla",
            "--rho",
            "10",
            "--val-per-class",
            "10",
            "--epochs",
            "40",
            "--hidden",
            "16",
        ])
        .arg("--data-dir")
        .arg(&data)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    let journal: PathBuf = out_dir.join("run.jsonl");
    let report = tmp.path().join("report.md");
    let result = bin()
        .arg("report")
        .arg(&journal)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    assert!(std::fs::read_to_string(&report)
        .unwrap()
        .contains("| vanilla |"));

    // Corrupt the schema version: the error names the file.
    let text = std::fs::read_to_string(&journal).unwrap();
    let bad = out_dir.join("bad.jsonl");
    std::fs::write(&bad, text.replace("\"schema_version\":1", "\"schema_version\":9")).unwrap();
    let result = bin()
        .arg("report")
        .arg(&bad)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bad.jsonl"));
}

#[test]
fn audit_subcommand_reads_back_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    write_dataset(&data);
    let out_dir = tmp.path().join("out");
    bin()
        .args([
            "run",
            "--method",
            "unreal",
            "--rho",
            "10",
            "--val-per-class",
            "10",
            "--ci-budget",
            "--rounds",
            "2",
            "--alpha",
            "3",
            "--kprime",
            "30",
            "--hidden",
            "16",
        ])
        .args(["--seed", "4"])
        .arg("--data-dir")
        .arg(&data)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    let result = bin()
        .arg("audit")
        .arg("--data-dir")
        .arg(&data)
        .arg("--record")
        .arg(out_dir.join("run.jsonl"))
        .args(["--top-n", "10"])
        .output()
        .unwrap();
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("minority additions"), "{stdout}");
    assert!(stdout.contains("dpam_in_acc"), "{stdout}");
}
