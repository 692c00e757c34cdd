use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ckn-lab"))
}

fn shipped(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.cfg"));
    std::fs::read_to_string(p).unwrap()
}

/// Writes `text` with its output redirected into `dir`, returns the config path.
fn config_in(dir: &Path, text: &str) -> PathBuf {
    let body: String = text.lines().filter(|l| !l.trim_start().starts_with("output.dir")).map(|l| format!("{l}\n")).collect();
    let path = dir.join("run.cfg");
    std::fs::write(&path, format!("{body}output.dir = {}\n", dir.join("out").display())).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_cfg(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let cfg = config_in(dir, text);
    let mut args = vec!["run", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn list_names_every_experiment_in_order() {
    let out = run(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["measure_identities", "regularity_report", "lemma_a2_property"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    assert_eq!(text, String::from_utf8(run(&["list"]).stdout).unwrap());
}

#[test]
fn measure_identities_passes_and_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cfg(dir.path(), &shipped("measure_identities"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/measure_report.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest "));
    assert_eq!(lines.next().unwrap(), "N,a,r,closed_form,quadrature,rel_error,doubling,doubling_expected,doubling_rel_error");
    assert_eq!(lines.count(), 100);
    assert!(dir.path().join("out/measure_identities_summary.txt").exists());
}

#[test]
fn mms_table_has_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cfg(dir.path(), &shipped("mms_convergence"), &[]);
    assert_eq!(out.status.code(), Some(0));
    for case in 0..2 {
        let csv = std::fs::read_to_string(dir.path().join(format!("out/mms_case{case}.csv"))).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "level,h,max_error,observed_order");
        assert_eq!(lines.len(), 2 + 5);
        // the coarsest level has no order
        assert!(lines[2].ends_with(','));
        assert!(lines[3..].iter().all(|l| !l.ends_with(',')));
    }
}

#[test]
fn scientific_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cfg(dir.path(), &shipped("mms_convergence_uniform"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("case1.order = FAIL"));
    assert!(summary.contains("pass = false"));
}

#[test]
fn missing_seed_is_a_usage_error_naming_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = shipped("lemma_a2_property").lines().filter(|l| !l.starts_with("seed")).map(|l| format!("{l}\n")).collect();
    let out = run_cfg(dir.path(), &text, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("seed"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_1_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("experiment = no_such_thing\n", "no_such_thing"),
        ("experiment = exponent_algebra\nseed = 1\nrun.bogus = 3\n", "run.bogus"),
        ("experiment = exponent_algebra\nseed = x\n", "seed"),
        ("experiment = mms_convergence\nparams.N = 3\nparams.a = 0\nparams.b = 0\nparams.s = inf\ngrid.kind = hex\ngrid.n = 8\n", "grid.kind"),
        ("experiment = mms_convergence\nparams.N = 3\nparams.a = 0, 0.2\nparams.b = 0, 0.1, 0\nparams.s = inf\ngrid.kind = radial\ngrid.n = 8\n", "params.a"),
        ("experiment = exponent_algebra\nsolver.tol = 2\n", "solver.tol"),
        ("experiment = exponent_algebra\nfoo.bar = 1\n", "foo.bar"),
    ];
    for (text, key) in cases {
        let out = run_cfg(dir.path(), text, &[]);
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(out.status.code(), Some(1), "{text}: {err}");
        assert!(err.contains(key), "{text}: {err}");
    }
}

#[test]
fn invocation_errors_exit_1() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["list", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["run", "/nonexistent/config.cfg"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn dump_trials_adds_the_trial_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cfg(dir.path(), &shipped("exponent_algebra"), &["--dump-trials"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/exponent_trials.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "trial,N,a,b,p,identity_error");
    assert_eq!(csv.lines().count(), 2 + 10_000);

    let plain = tempfile::tempdir().unwrap();
    run_cfg(plain.path(), &shipped("exponent_algebra"), &[]);
    assert!(!plain.path().join("out/exponent_trials.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    for name in ["lemma_a1_ratio", "harmonic_replacement", "lemma_a2_property"] {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        assert_eq!(run_cfg(d1.path(), &shipped(name), &["--dump-trials"]).status.code(), Some(0));
        assert_eq!(run_cfg(d2.path(), &shipped(name), &["--dump-trials"]).status.code(), Some(0));
        let mut files: Vec<_> = std::fs::read_dir(d1.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(files.len() >= 2);
        for f in files {
            let a = std::fs::read(d1.path().join("out").join(&f)).unwrap();
            let b = std::fs::read(d2.path().join("out").join(&f)).unwrap();
            assert!(a == b, "{name}: {f:?} differs");
        }
    }
}

#[test]
fn different_seeds_change_randomized_output() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let base = shipped("lemma_a1_ratio");
    run_cfg(d1.path(), &base, &[]);
    run_cfg(d2.path(), &base.replace("seed = 5", "seed = 6"), &[]);
    let a = std::fs::read_to_string(d1.path().join("out/lemma_a1_report.csv")).unwrap();
    let b = std::fs::read_to_string(d2.path().join("out/lemma_a1_report.csv")).unwrap();
    assert_ne!(a, b);
}
