use std::path::Path;
use std::process::{Command, Output};

use confsym::verifier::SuiteReport;
use confsym_cli::{CommutatorsOutput, IdentityOutput, LiftOutput, ReduceOutput, RulesOutput, SolveOutput, SymmetriesOutput};
use serde::de::DeserializeOwned;

fn confsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confsym"))
        .args(args)
        .env_remove("CONFSYM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_as<T: DeserializeOwned>(o: &Output) -> T {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn file_as<T: DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn symmetries_report_every_generator() {
    let o = confsym(&["symmetries", "--eq", "burgers", "--alpha", "0.7", "--beta", "0.6"]);
    assert_eq!(o.status.code(), Some(0));
    let s: SymmetriesOutput = stdout_as(&o);
    assert_eq!(s.fields.len(), 5);
    assert!(s.pass && s.family.pass);
    assert!(s.fields.iter().all(|f| f.max_abs < 1e-8));
}

#[test]
fn kdv_commutator_table() {
    let o = confsym(&["commutators", "--eq", "kdv"]);
    assert_eq!(o.status.code(), Some(0));
    let c: CommutatorsOutput = stdout_as(&o);
    assert!(c.pass && c.antisymmetric && c.jacobi_failures.is_empty());
    assert!(c.stated.iter().any(|b| b.bracket == "[V1,V3]" && b.holds));
}

#[test]
fn commutators_as_csv() {
    let o = confsym(&["commutators", "--eq", "burgers", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    // header plus one row per ordered pair of the five generators
    assert_eq!(text.lines().count(), 26, "{text}");
    assert!(text.lines().any(|l| l.starts_with("[V1,V1],0")));
}

#[test]
fn rules_and_identity() {
    let o = confsym(&["rules-check"]);
    assert_eq!(o.status.code(), Some(0));
    let r: RulesOutput = stdout_as(&o);
    assert!(r.pass && r.worked_example_error < 1e-8);
    assert_eq!(r.orders.len(), 4);

    let o = confsym(&["identity", "--gamma", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let i: IdentityOutput = stdout_as(&o);
    assert!(i.pass && i.miura_roundtrip < 1e-8);
}

#[test]
fn reduce_all_pipelines() {
    let o = confsym(&["reduce", "--key", "all", "--alpha", "0.5", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let r: ReduceOutput = stdout_as(&o);
    assert_eq!(r.entries.len(), 7);
    assert!(r.entries.iter().all(|e| e.reduce_check && e.invariant_form));
}

#[test]
fn solve_and_lift() {
    let o = confsym(&["solve", "--key", "mkdv/V3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: SolveOutput = stdout_as(&o);
    assert!(s.pass);

    let o = confsym(&["lift", "--key", "burgers/V3+muV1", "--nt", "20", "--nx", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let l: LiftOutput = stdout_as(&o);
    assert!(l.pass && l.report.max_abs < 1e-7);
}

#[test]
fn files_written_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = confsym(&["lift", "--key", "kdv/V3+aV1", "--nt", "10", "--nx", "10", "--out", d, "--format", "both"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let l: LiftOutput = file_as(&dir.path().join("lift_kdv_V3_aV1.json"));
    assert!(l.pass);
    let csv = std::fs::read_to_string(dir.path().join("lift_kdv_V3_aV1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn suite_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        let o = confsym(&["suite", "--out", d.to_str().unwrap(), "--format", "both"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().filter(|l| l.starts_with("PASS ")).count(), 8, "{err}");
        texts.push(std::fs::read(d.join("suite.json")).unwrap());
        assert!(d.join("suite.csv").exists());
    }
    assert_eq!(texts[0], texts[1]);
    let r: SuiteReport = serde_json::from_slice(&texts[0]).unwrap();
    assert!(r.pass && r.sections.len() == 8);
}

#[test]
fn zero_strength_controls_make_the_suite_fail() {
    let o = confsym(&["suite", "--sections", "symmetries", "--control-perturbation", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let r: SuiteReport = stdout_as(&o);
    assert!(!r.pass);
}

#[test]
fn empty_selection_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"sections": []}"#).unwrap();
    let o = confsym(&["suite", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r: SuiteReport = stdout_as(&o);
    assert!(r.sections.is_empty() && r.pass);
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_confsym"));
        c.args(["symmetries", "--eq", "mkdv"]).args(extra).env_remove("CONFSYM_SEED");
        if let Some(v) = env {
            c.env("CONFSYM_SEED", v);
        }
        c.output().unwrap()
    };
    let s: SymmetriesOutput = stdout_as(&run(Some("0x2a"), &[]));
    assert_eq!(s.seed, 42);
    let s: SymmetriesOutput = stdout_as(&run(Some("0x2a"), &["--seed", "7"]));
    assert_eq!(s.seed, 7);
    assert_eq!(run(Some("nope"), &[]).status.code(), Some(2));
}

#[test]
fn usage_and_domain_errors_exit_2() {
    for args in [
        vec!["bogus"],
        vec!["symmetries", "--no-such-flag"],
        vec!["symmetries", "--alpha", "1.5"],
        vec!["reduce", "--key", "kdv/V9"],
        vec!["suite", "--sections", "nope"],
    ] {
        let o = confsym(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"alpha": 0.5, "colour": 3}"#).unwrap();
    let o = confsym(&["symmetries", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
