//! Black-box checks of the command-line interface: argument handling,
//! config resolution through real files, exit codes, and the output
//! directory override. Heavier determinism checks live in the
//! acceptance suite.

use std::path::Path;
use std::process::{Command, Output};

use momineq::model::make_interval_regression_model;
use momineq::load_dataset;

fn momineq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momineq"))
        .args(args)
        .current_dir(dir)
        .env_remove("MOMINEQ_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn gen_round_trips_through_the_loader() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("regression.csv");
    let out = momineq(
        tmp.path(),
        &["gen", "--experiment", "ex52", "--n", "40", "--seed", "9", "--out", path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let data = load_dataset(&path, &["y1", "y2", "x1", "x2", "z1", "z2"]).unwrap();
    assert_eq!(data.n(), 40);
    let model = make_interval_regression_model(2, 2).unwrap();
    model.check_columns(&data).unwrap();
}

#[test]
fn gen_uses_the_env_directory_and_default_name() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_momineq"))
        .args(["gen", "--experiment", "ex51", "--n", "25"])
        .current_dir(tmp.path())
        .env("MOMINEQ_OUT_DIR", tmp.path().join("generated"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let expected = tmp.path().join("generated/ex51_n25_seed0.csv");
    assert!(expected.is_file(), "missing {}", expected.display());
    assert_eq!(load_dataset(&expected, &["y1", "y2"]).unwrap().n(), 25);
}

#[test]
fn run_reads_the_config_file_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "experiment = \"ex51\"\nn = [200]\nseed = 6\n\n[sampler]\nb = 300\n\n[estimator]\npi = [\"1-over-n\"]\nepsilon = [\"loglog-n\"]\ngrid_spacing = 0.05\ndensity_step = 1.0\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = momineq(
        tmp.path(),
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--n",
            "150",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table2 = std::fs::read_to_string(out_dir.join("ex51/table2.csv")).unwrap();
    let mut lines = table2.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,pi_kind,pi,lower,upper,sq_err"
    );
    // The flag value replaces the file's sample sizes entirely.
    for line in lines {
        assert!(line.starts_with("150,"), "unexpected row {line}");
    }
    assert!(out_dir.join("ex51/metadata.toml").is_file());
}

#[test]
fn invalid_config_fails_with_every_problem_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    // Wrong psi length for the two-moment model and an init outside
    // the prior support, in one file.
    std::fs::write(
        &cfg,
        "experiment = \"ex51\"\npsi = [0.1, 0.5, 0.2]\n\n[sampler]\ninit = [40.0]\n",
    )
    .unwrap();
    let out = momineq(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("invalid config"), "stderr: {err}");
    assert!(err.contains("psi"), "stderr: {err}");
    assert!(err.contains("init"), "stderr: {err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.toml");
    std::fs::write(&cfg, "experiment = \"ex51\"\nsample_sizes = [100]\n").unwrap();
    let out = momineq(tmp.path(), &["run", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("sample_sizes"));
}

#[test]
fn verbs_gate_the_experiments_they_cover() {
    let tmp = tempfile::tempdir().unwrap();
    let select = momineq(tmp.path(), &["select", "--experiment", "ex51"]);
    assert!(!select.status.success());
    let err = stderr_of(&select);
    assert!(
        err.contains("select covers ex53") && err.contains("use run"),
        "stderr: {err}"
    );
    let estimate = momineq(tmp.path(), &["estimate", "--experiment", "ex53"]);
    assert!(!estimate.status.success());
    assert!(stderr_of(&estimate).contains("estimate covers"));
}

#[test]
fn run_without_an_experiment_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = momineq(tmp.path(), &["run"]);
    assert!(!out.status.success());
    assert!(!stderr_of(&out).is_empty());
}

#[test]
fn env_out_dir_beats_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_momineq"))
        .args(["run", "--experiment", "ex53", "--n", "100", "--out-dir", "ignored"])
        .current_dir(tmp.path())
        .env("MOMINEQ_OUT_DIR", tmp.path().join("envdir"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(tmp.path().join("envdir/ex53/metadata.toml").is_file());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn estimate_handles_a_custom_dataset_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data_path = tmp.path().join("observed.csv");
    momineq::gen_example_4_1(80, 3)
        .unwrap()
        .write_csv(&data_path)
        .unwrap();
    let cfg = tmp.path().join("custom.toml");
    std::fs::write(
        &cfg,
        format!(
            "experiment = \"custom\"\nseed = 2\npsi = [0.1, 0.1, 0.5, 0.5]\n\n[custom]\ndata = {:?}\nmodel = \"interval-regression\"\nnum_instruments = 2\nnum_regressors = 2\n\n[theta_prior]\nkind = \"flat\"\nlower = [-2.0, -2.0]\nupper = [2.0, 2.0]\n\n[sampler]\nb = 300\n\n[estimator]\npi = [\"1-over-n\"]\n",
            data_path.to_str().unwrap()
        ),
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = momineq(
        tmp.path(),
        &[
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let intervals = std::fs::read_to_string(out_dir.join("custom/intervals.csv")).unwrap();
    let rows: Vec<&str> = intervals.lines().collect();
    assert_eq!(rows[0], "coordinate,pi_kind,pi,lower,upper");
    // Two coordinates, one pi kind.
    assert_eq!(rows.len(), 3);
}

#[test]
fn reruns_write_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = momineq(
            tmp.path(),
            &[
                "run",
                "--experiment",
                "ex52",
                "--seed",
                "8",
                "--b",
                "250",
                "--out-dir",
                tmp.path().join(name).to_str().unwrap(),
            ],
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let dir_a = tmp.path().join("a/ex52");
    let dir_b = tmp.path().join("b/ex52");
    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = std::fs::read(dir_a.join(&name)).unwrap();
        let b = std::fs::read(dir_b.join(&name)).unwrap();
        assert!(a == b, "{name} differs between reruns");
    }
}
