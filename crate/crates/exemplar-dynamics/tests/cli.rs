//! End-to-end checks of the command-line interface: exit codes, output
//! schema stability, manifests, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use exemplar_dynamics::output::RunManifest;

fn exdyn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exdyn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn preset_list_names_every_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(&["preset-list"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "single-1d",
        "two-word-nocomp",
        "two-word-pure-p1",
        "two-word-pure-p15",
        "two-word-discards-p1",
        "validate-regime2",
        "2d-five-words",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn missing_scenario_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(&["run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = exdyn(&["run", "--preset", "no-such-preset"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(&["classify", "does-not-exist.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_file_reports_offending_key() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[model]\nalpha = 1.5\nbeta = 0.5\n").unwrap();
    let out = exdyn(&["run", "--config", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("alpha + beta"), "{err}");
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = exdyn(
            &[
                "run",
                "--preset",
                "two-word-discards-p1",
                "--engine",
                "exemplar",
                "--seed",
                "7",
                "--t-max",
                "5",
                "--out-dir",
                dir,
            ],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let run = "two-word-discards-p1/exemplar-seed7";
    let a = std::fs::read(tmp.path().join("a").join(run).join("series.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b").join(run).join("series.csv")).unwrap();
    assert_eq!(a, b, "series differs between identical reruns");
}

#[test]
fn run_outputs_match_schema_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(
        &[
            "run",
            "--preset",
            "single-1d",
            "--engine",
            "both",
            "--seed",
            "0",
            "--t-max",
            "2",
            "--out-dir",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let ex_dir = tmp.path().join("out/single-1d/exemplar-seed0");
    let fe_dir = tmp.path().join("out/single-1d/field-seed0");
    let series = std::fs::read_to_string(ex_dir.join("series.csv")).unwrap();
    assert_eq!(
        series.lines().next().unwrap(),
        "t,word,mean_x,dispersion,total_weight,live_count,discard_count"
    );
    // field series leaves the exemplar-only columns empty
    let fseries = std::fs::read_to_string(fe_dir.join("series.csv")).unwrap();
    assert!(fseries.lines().nth(1).unwrap().ends_with(",,"));
    let snap = std::fs::read_to_string(ex_dir.join("snapshot_t0.1.csv")).unwrap();
    assert_eq!(snap.lines().next().unwrap(), "word,x,weight");
    let grid_dump = std::fs::read_to_string(fe_dir.join("field_t0.1.txt")).unwrap();
    assert!(grid_dump.starts_with("# field snapshot"));

    for dir in [&ex_dir, &fe_dir] {
        let manifest =
            RunManifest::from_json(&std::fs::read_to_string(dir.join("manifest.json")).unwrap())
                .unwrap();
        assert!(manifest.verify(dir).unwrap().is_empty());
    }
    // manifest digests catch tampering
    let manifest =
        RunManifest::from_json(&std::fs::read_to_string(ex_dir.join("manifest.json")).unwrap())
            .unwrap();
    let mut tampered = std::fs::read_to_string(ex_dir.join("series.csv")).unwrap();
    tampered.push(' ');
    std::fs::write(ex_dir.join("series.csv"), tampered).unwrap();
    assert_eq!(manifest.verify(&ex_dir).unwrap(), vec!["series.csv".to_string()]);
}

#[test]
fn written_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |scenario_source: &[&str], dir: &str| {
        let mut args = vec!["run"];
        args.extend_from_slice(scenario_source);
        args.extend_from_slice(&[
            "--engine", "exemplar", "--seed", "3", "--t-max", "2", "--out-dir", dir,
        ]);
        let out = exdyn(&args, tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["--preset", "two-word-pure-p1"], "first");
    // the emitted config.toml is a complete standalone scenario
    let config = "first/two-word-pure-p1/exemplar-seed3/config.toml";
    run(&["--config", config], "second");
    let a = std::fs::read(
        tmp.path().join("first/two-word-pure-p1/exemplar-seed3/series.csv"),
    )
    .unwrap();
    let b = std::fs::read(
        tmp.path().join("second/two-word-pure-p1/exemplar-seed3/series.csv"),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn classify_reports_merger_for_no_competition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(
        &[
            "run",
            "--preset",
            "two-word-nocomp",
            "--engine",
            "field",
            "--t-max",
            "120",
            "--dt",
            "0.02",
            "--out-dir",
            "out",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = exdyn(
        &["classify", "out/two-word-nocomp/field-seed0/series.csv"],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("Merged"), "{text}");
}

#[test]
fn validate_prints_one_line_per_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = exdyn(&["validate"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    let pass_lines = text.lines().filter(|l| l.starts_with("PASS")).count();
    assert_eq!(pass_lines, 7, "{text}");
}
