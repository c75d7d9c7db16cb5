//! Acceptance run: one line per criterion, then a single assertion so every
//! line is printed even when something fails. Lines go straight to the stderr
//! handle, which the test harness does not capture.

use std::io::Write;

use confsym::equation::EquationId;
use confsym::expr::{Expr, ZeroTest};
use confsym::jet::VectorField;
use confsym::reductions::PIPELINE_KEYS;
use confsym::symmetry::{commutator, family};
use confsym::verifier::{run_suite, Section, SuiteConfig, SuiteReport, LIFT_PIPELINES};

fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

struct Outcome {
    lines: Vec<String>,
    ok: bool,
}

impl Outcome {
    fn record(&mut self, n: u32, title: &str, pass: bool, detail: String) {
        let line = format!("criterion {n} {title}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        say(&line);
        self.lines.push(line);
        self.ok &= pass;
    }
}

fn failed(sec: &Section) -> Vec<&str> {
    sec.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
}

fn summary(sec: &Section) -> String {
    let bad = failed(sec);
    let mut s = format!("{} checks, {} failed", sec.checks.len(), bad.len());
    for b in bad.iter().take(5) {
        s.push_str(&format!("; {b}"));
    }
    s
}

fn worst(sec: &Section) -> f64 {
    sec.checks.iter().filter(|c| !c.control).map(|c| c.measured).fold(0.0, f64::max)
}

/// `[V_i, V_j] - Σ c_k V_k` must vanish coefficient-wise.
fn bracket_is(basis: &[VectorField], i: usize, j: usize, rhs: &[(usize, i64)]) -> bool {
    let z = ZeroTest::default();
    let got = commutator(&basis[i], &basis[j]);
    let mut want = [Expr::zero(), Expr::zero(), Expr::zero()];
    for &(k, c) in rhs {
        for (w, b) in want.iter_mut().zip(basis[k].coefficients()) {
            *w = &*w + Expr::int(c) * b;
        }
    }
    let holds = got.coefficients().into_iter().zip(want).all(|(g, w)| z.is_zero(&(g - w)));
    holds
}

fn criteria(report: &SuiteReport, again: &SuiteReport, out: &mut Outcome) {
    let sec = |name: &str| report.section(name).unwrap_or_else(|| panic!("section {name} missing"));

    let rules = sec("rules");
    let sqrt_ok = rules.checks.iter().any(|c| c.name.starts_with("D^1/2 sqrt(t)") && c.pass);
    out.record(
        1,
        "conformable calculus rules",
        rules.pass && sqrt_ok && report.rules.len() == 40,
        format!("{}, worst residual {:.2e}", summary(rules), worst(rules)),
    );

    let sym = sec("symmetries");
    let generators: usize = EquationId::ALL.iter().map(|id| family(*id).basis.len()).sum();
    let controls_ok = sym.checks.iter().filter(|c| c.control).all(|c| c.pass);
    out.record(
        2,
        "symmetry verification",
        sym.pass && generators == 15 && controls_ok,
        format!("{generators} generators, {}, worst residual {:.2e}", summary(sym), worst(sym)),
    );

    let alg = sec("algebra");
    let burgers_brackets = alg.checks.iter().filter(|c| c.name.starts_with("burgers [")).count();
    let kdv = family(EquationId::Kdv).basis;
    let mkdv = family(EquationId::Mkdv).basis;
    let mb = family(EquationId::Mburgers).basis;
    let stated = bracket_is(&kdv, 0, 2, &[(1, 6)])
        && bracket_is(&mkdv, 0, 2, &[(0, 3)])
        && bracket_is(&mb, 0, 2, &[(0, 4)])
        && bracket_is(&mb, 1, 2, &[(1, 2)]);
    out.record(
        3,
        "Lie algebra tables",
        alg.pass && burgers_brackets == 10 && stated && report.tables.len() == 4,
        format!("{}, {burgers_brackets} Burgers brackets, stated brackets hold: {stated}", summary(alg)),
    );

    let red = sec("reductions");
    let covered = PIPELINE_KEYS
        .iter()
        .all(|k| red.checks.iter().filter(|c| c.name.starts_with(&format!("{k} alpha="))).count() >= 3);
    out.record(
        4,
        "reduction correctness",
        red.pass && covered && PIPELINE_KEYS.len() == 7,
        format!("{} pipelines, {}", PIPELINE_KEYS.len(), summary(red)),
    );

    let lifts = sec("lifts");
    let per_key: Vec<String> = report
        .residuals
        .iter()
        .map(|r| format!("{} {:.2e}", r.key, r.max_abs))
        .collect();
    let all_keys = LIFT_PIPELINES.iter().all(|k| report.residuals.iter().any(|r| r.key == *k && r.pass));
    let below = report.residuals.iter().filter(|r| LIFT_PIPELINES.contains(&r.key.as_str())).all(|r| r.max_abs < 1e-7);
    out.record(
        5,
        "end-to-end lift residuals",
        lifts.pass && all_keys && below,
        format!("{}; {}", summary(lifts), per_key.join(", ")),
    );

    let id = sec("identity");
    out.record(6, "K1/K2 identity and Miura round trip", id.pass, format!("{}, worst {:.2e}", summary(id), worst(id)));

    let sc = sec("scale_maps");
    for n in &sc.notes {
        say(&format!("    note: {n}"));
    }
    out.record(7, "scale maps", sc.pass, format!("{}, worst {:.2e}", summary(sc), worst(sc)));

    let p34 = sec("p34");
    for n in &p34.notes {
        say(&format!("    note: {n}"));
    }
    let finite = p34.checks.iter().all(|c| c.pass) && p34.notes.len() >= 2;
    out.record(8, "p34 residual report", p34.pass && finite, format!("{}", summary(p34)));

    let a = serde_json::to_string_pretty(report).unwrap();
    let b = serde_json::to_string_pretty(again).unwrap();
    let parsed: Result<SuiteReport, _> = serde_json::from_str(&a);
    let schema_ok = parsed.as_ref().is_ok_and(|p| p == report);
    let version_ok = report.version == confsym::verifier::REPORT_VERSION;
    out.record(
        9,
        "determinism and schema",
        a == b && schema_ok && version_ok,
        format!("{} bytes, identical: {}, schema: {}", a.len(), a == b, schema_ok),
    );
}

#[test]
fn acceptance() {
    let cfg = SuiteConfig::default();
    let start = std::time::Instant::now();
    let report = run_suite(&cfg).expect("suite runs");
    let elapsed = start.elapsed();
    let again = run_suite(&cfg).expect("suite runs twice");
    let mut out = Outcome { lines: Vec::new(), ok: true };
    criteria(&report, &again, &mut out);
    say(&format!("suite wall time {:.2} s", elapsed.as_secs_f64()));
    assert!(elapsed.as_secs() < 60, "suite over budget");
    assert_eq!(out.lines.len(), 9);
    assert!(out.ok && report.pass, "acceptance failed:\n{}", out.lines.join("\n"));
}

/// Loosened controls must be caught: at zero strength every negative control
/// becomes a genuine symmetry or solution and the suite must report failure.
#[test]
fn zero_strength_controls_fail() {
    let cfg = SuiteConfig {
        control_perturbation: 0.0,
        sections: Some(vec!["symmetries".into(), "reductions".into(), "lifts".into()]),
        ..SuiteConfig::default()
    };
    let r = run_suite(&cfg).unwrap();
    assert!(!r.pass);
    for name in ["symmetries", "reductions", "lifts"] {
        let s = r.section(name).unwrap();
        assert!(s.checks.iter().any(|c| c.control && !c.pass), "{name}");
        assert!(s.checks.iter().filter(|c| !c.control).all(|c| c.pass), "{name}");
    }
}
