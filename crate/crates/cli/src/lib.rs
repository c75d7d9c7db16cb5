//! Command-line front end. `run` takes argv and returns the exit status:
//! 0 when every check passes, 1 when a check fails, 2 on usage or domain
//! errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use confsym::conformable::{check_rules, conf_diff_numeric, default_corpus, linspace, ConfCalcConfig, RuleReport};
use confsym::equation::{EquationId, EquationSpec};
use confsym::expr::{EvalEnv, ZeroTest};
use confsym::jet::{JetPoint, JET_SEED};
use confsym::ode::{integrate_ivp, residual_of_ode, s_substitute, OdeResidual, OdeSolutionMeta};
use confsym::reductions::{pipeline, resolve_key, s_range, Pipeline, ReductionParams, PIPELINE_KEYS};
use confsym::symmetry::{
    check_expected_brackets, family, field_residual, jacobi_failures, random_constants, structure_constants,
    BracketCheck, StructureTable,
};
use confsym::verifier::{
    grid_csv, k1_k2_identity_check, lift, miura_roundtrip, pde_residual, pointwise_residuals, run_suite, ConfigEcho,
    GridSpec, IdentityReport, ResidualReport, SuiteConfig, SuiteReport, LIFT_PIPELINES, REPORT_VERSION,
    RULE_ORDERS,
};

pub const SEED_ENV: &str = "CONFSYM_SEED";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

/// Every setting a run can take; the config file is this struct in JSON with
/// any subset of fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub eq: EquationId,
    pub key: String,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: Option<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub kdv_a: f64,
    pub seed: u64,
    pub ode_tol: f64,
    pub grid: GridSpec,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub ic: Option<Vec<f64>>,
    pub s0: Option<f64>,
    pub span: Option<(f64, f64)>,
    pub sections: Option<Vec<String>>,
    pub pipelines: Option<Vec<String>>,
    pub control_perturbation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eq: EquationId::Kdv,
            key: "mkdv/V3".into(),
            alpha: 0.7,
            beta: 0.6,
            a: 1.0,
            b: 1.0,
            gamma: None,
            mu: 1.0,
            sigma: -1.0 / 6.0,
            kdv_a: 6.0,
            seed: JET_SEED,
            ode_tol: 1e-10,
            grid: GridSpec::default(),
            out: None,
            format: Format::Json,
            ic: None,
            s0: None,
            span: None,
            sections: None,
            pipelines: None,
            control_perturbation: 1.0,
        }
    }
}

/// Config file contents: every field optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    eq: Option<EquationId>,
    key: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    kdv_a: Option<f64>,
    seed: Option<u64>,
    ode_tol: Option<f64>,
    grid: Option<GridSpec>,
    out: Option<PathBuf>,
    format: Option<Format>,
    ic: Option<Vec<f64>>,
    s0: Option<f64>,
    span: Option<(f64, f64)>,
    sections: Option<Vec<String>>,
    pipelines: Option<Vec<String>>,
    control_perturbation: Option<f64>,
}

#[derive(Parser, Debug)]
#[command(name = "confsym", version, about = "Symmetries and similarity reductions of conformable KdV/Burgers-type equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the conformable calculus rules on the function corpus.
    RulesCheck(Common),
    /// Verify the basis generators and the full family of an equation.
    Symmetries(Common),
    /// Commutator table and stated brackets of an equation's algebra.
    Commutators(Common),
    /// Symbolic reduction checks for one pipeline, or all with `--key all`.
    Reduce(Common),
    /// Integrate a pipeline's ODE.
    Solve(Common),
    /// Lift a pipeline's solution to a (t, x) grid.
    Lift(Common),
    /// Equivalent-form residual of a lifted solution.
    Residual(Common),
    /// K1/K2 identity and Miura round trip.
    Identity(Common),
    /// Every acceptance check.
    Suite(Common),
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub eq: Option<EquationId>,
    /// Pipeline key such as `mkdv/V3`.
    #[arg(long)]
    pub key: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub kdv_a: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// `lo,hi` for t.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub grid_t: Option<(f64, f64)>,
    /// `lo,hi` for x.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub grid_x: Option<(f64, f64)>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Initial values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ic: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub s0: Option<f64>,
    /// `lo,hi` of the integration span.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub span: Option<(f64, f64)>,
    /// Suite sections, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sections: Option<Vec<String>>,
    /// Pipelines to lift in the suite, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub pipelines: Option<Vec<String>>,
    #[arg(long)]
    pub control_perturbation: Option<f64>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: std::error::Error,
{
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

/// Flag > config file > `CONFSYM_SEED` (seed only) > default.
pub fn resolve(c: &Common, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(s) = env_seed {
        cfg.seed = parse_seed(s).ok_or_else(|| CliError::Usage(format!("{SEED_ENV}: bad seed `{s}`")))?;
    }
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let f: ConfigFile = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = f.$field { cfg.$field = v; } )* };
        }
        take!(eq, key, alpha, beta, a, b, mu, sigma, kdv_a, seed, ode_tol, grid, format, control_perturbation);
        cfg.gamma = f.gamma.or(cfg.gamma);
        cfg.out = f.out.or(cfg.out);
        cfg.ic = f.ic.or(cfg.ic);
        cfg.s0 = f.s0.or(cfg.s0);
        cfg.span = f.span.or(cfg.span);
        cfg.sections = f.sections.or(cfg.sections);
        cfg.pipelines = f.pipelines.or(cfg.pipelines);
    }
    macro_rules! flag {
        ($($field:ident => $target:ident),*) => { $( if let Some(v) = c.$field.clone() { cfg.$target = v; } )* };
    }
    flag!(eq => eq, key => key, alpha => alpha, beta => beta, a => a, b => b, mu => mu, sigma => sigma,
          kdv_a => kdv_a, seed => seed, tol => ode_tol, format => format,
          control_perturbation => control_perturbation);
    if c.gamma.is_some() {
        cfg.gamma = c.gamma;
    }
    if let Some(v) = c.grid_t {
        cfg.grid.t = v;
    }
    if let Some(v) = c.grid_x {
        cfg.grid.x = v;
    }
    if let Some(v) = c.nt {
        cfg.grid.nt = v;
    }
    if let Some(v) = c.nx {
        cfg.grid.nx = v;
    }
    cfg.out = c.out.clone().or(cfg.out);
    cfg.ic = c.ic.clone().or(cfg.ic);
    cfg.s0 = c.s0.or(cfg.s0);
    cfg.span = c.span.or(cfg.span);
    cfg.sections = c.sections.clone().or(cfg.sections);
    cfg.pipelines = c.pipelines.clone().or(cfg.pipelines);
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_seed(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    for (name, v) in [("alpha", cfg.alpha), ("beta", cfg.beta)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(CliError::Domain(format!("{name} = {v} must lie in (0, 1]")));
        }
    }
    if cfg.b == 0.0 || cfg.a == 0.0 || cfg.mu == 0.0 || cfg.kdv_a == 0.0 {
        return Err(CliError::Domain("a, b, mu and kdv_a must be nonzero".into()));
    }
    if !(cfg.ode_tol > 0.0) {
        return Err(CliError::Domain("tol must be positive".into()));
    }
    if let Some(s) = &cfg.sections {
        for n in s {
            if !confsym::verifier::SECTIONS.contains(&n.as_str()) {
                return Err(CliError::Usage(format!("unknown section `{n}`")));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn reduction_params(&self) -> ReductionParams {
        ReductionParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            mu: self.mu,
            kdv_a: self.kdv_a,
            a: self.a,
            b: self.b,
        }
    }

    pub fn spec(&self) -> EquationSpec {
        let s = EquationSpec::new(self.eq, self.alpha, self.beta);
        if self.eq.has_ab() {
            s.with_ab(self.a, self.b)
        } else {
            s
        }
    }

    fn pipeline(&self) -> Result<Pipeline, CliError> {
        let mut pl = pipeline(&self.key, &self.reduction_params())?;
        if pl.params.get("sigma").is_some() {
            pl.params.set("sigma", self.sigma);
            for st in &mut pl.stages {
                st.ode.params.set("sigma", self.sigma);
            }
        }
        Ok(pl)
    }

    pub fn suite_config(&self) -> SuiteConfig {
        SuiteConfig {
            alpha: self.alpha,
            beta: self.beta,
            a: self.a,
            b: self.b,
            gamma: self.gamma,
            mu: self.mu,
            kdv_a: self.kdv_a,
            seed: self.seed,
            ode_tol: self.ode_tol,
            grid: self.grid.clone(),
            pipelines: self.pipelines.clone(),
            control_perturbation: self.control_perturbation,
            sections: self.sections.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RulesOutput {
    pub version: u32,
    pub orders: Vec<f64>,
    pub reports: Vec<RuleReport>,
    /// `|D^{1/2} √t − 1/2|` at `t = 1.7`.
    pub worked_example_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldOutput {
    pub label: String,
    pub xi: String,
    pub tau: String,
    pub eta: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymmetriesOutput {
    pub version: u32,
    pub equation: EquationId,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub points: usize,
    pub tolerance: f64,
    pub fields: Vec<FieldOutput>,
    pub family: FieldOutput,
    pub family_constants: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CommutatorsOutput {
    pub version: u32,
    pub equation: EquationId,
    pub table: StructureTable,
    pub stated: Vec<BracketCheck>,
    pub jacobi_failures: Vec<(usize, usize, usize)>,
    pub antisymmetric: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReduceEntry {
    pub key: String,
    pub zeta: String,
    pub u_form: String,
    pub reduced: String,
    pub reduce_check: bool,
    pub max_abs: f64,
    pub invariant_form: bool,
    pub links: Vec<(String, bool)>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReduceOutput {
    pub version: u32,
    pub alpha: f64,
    pub beta: f64,
    pub entries: Vec<ReduceEntry>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolveOutput {
    pub version: u32,
    pub key: String,
    pub stage: String,
    pub solution: OdeSolutionMeta,
    pub residual: OdeResidual,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LiftOutput {
    pub version: u32,
    pub key: String,
    pub psi: OdeSolutionMeta,
    pub report: ResidualReport,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IdentityOutput {
    pub version: u32,
    pub identity: IdentityReport,
    pub miura_roundtrip: f64,
    pub miura_flagged: usize,
    pub pass: bool,
}

struct Output {
    name: String,
    json: String,
    csv: Option<String>,
    pass: bool,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Domain(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn file_stem(key: &str) -> String {
    key.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn rules(cfg: &RunConfig, explicit_alpha: bool) -> Result<Output, CliError> {
    let orders = if explicit_alpha { vec![cfg.alpha] } else { RULE_ORDERS.to_vec() };
    let cc = ConfCalcConfig::default();
    let corpus = default_corpus();
    let pts = linspace(0.3, 2.5, 20);
    let mut reports = Vec::new();
    for &a in &orders {
        reports.extend(check_rules(a, &corpus, &pts, &cc)?);
    }
    let worked = (conf_diff_numeric(|t: f64| Some(t.sqrt()), 1.7, 0.5, &cc)? - 0.5).abs();
    let pass = reports.iter().all(|r| r.pass) && worked < 1e-8;
    let mut csv = String::from("rule,alpha,max_residual,points_checked,skipped,pass\n");
    for r in &reports {
        let _ = writeln!(csv, "{:?},{},{:e},{},{},{}", r.rule, r.alpha, r.max_residual, r.points_checked, r.skipped, r.pass);
    }
    let out = RulesOutput {
        version: REPORT_VERSION,
        orders,
        reports,
        worked_example_error: worked,
        pass,
    };
    Ok(Output {
        name: "rules".into(),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn symmetries(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = cfg.spec();
    let fam = family(cfg.eq);
    let pts = JetPoint::sample(100, cfg.seed);
    let tol = 1e-8;
    let none = EvalEnv::new();
    let field_out = |v: &confsym::jet::VectorField| -> Result<FieldOutput, CliError> {
        let r = field_residual(&spec, v, &pts, &none)?;
        Ok(FieldOutput {
            label: v.label.clone(),
            xi: v.xi.to_string(),
            tau: v.tau.to_string(),
            eta: v.eta.to_string(),
            max_abs: r.max_abs,
            mean_abs: r.mean_abs,
            pass: r.max_abs < tol,
        })
    };
    let fields = fam.basis.iter().map(&field_out).collect::<Result<Vec<_>, _>>()?;
    let c = random_constants(fam.constants, cfg.seed ^ 0x5EED);
    let family = field_out(&fam.specialize(&c))?;
    let pass = fields.iter().all(|f| f.pass) && family.pass;
    let mut csv = String::from("label,max_abs,mean_abs,pass\n");
    for f in fields.iter().chain(std::iter::once(&family)) {
        let _ = writeln!(csv, "{},{:e},{:e},{}", f.label, f.max_abs, f.mean_abs, f.pass);
    }
    let out = SymmetriesOutput {
        version: REPORT_VERSION,
        equation: cfg.eq,
        alpha: cfg.alpha,
        beta: cfg.beta,
        seed: cfg.seed,
        points: pts.len(),
        tolerance: tol,
        fields,
        family,
        family_constants: c,
        pass,
    };
    Ok(Output {
        name: format!("symmetries_{}", cfg.eq),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn commutators(cfg: &RunConfig) -> Result<Output, CliError> {
    let spec = cfg.spec();
    let basis = family(cfg.eq).basis;
    let table = structure_constants(&basis, &spec.env(), cfg.seed)?;
    let z = ZeroTest {
        seed: cfg.seed,
        ..ZeroTest::default()
    };
    let stated = check_expected_brackets(cfg.eq, &z)?;
    let jac = jacobi_failures(&basis, &z)?;
    let antisymmetric = table.is_antisymmetric();
    let pass = antisymmetric && jac.is_empty() && stated.iter().all(|b| b.holds);
    let mut csv = String::from("bracket,value\n");
    for (i, row) in table.brackets.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(csv, "[{},{}],{}", table.labels[i], table.labels[j], v);
        }
    }
    let out = CommutatorsOutput {
        version: REPORT_VERSION,
        equation: cfg.eq,
        table,
        stated,
        jacobi_failures: jac,
        antisymmetric,
        pass,
    };
    Ok(Output {
        name: format!("commutators_{}", cfg.eq),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn reduce(cfg: &RunConfig) -> Result<Output, CliError> {
    let keys: Vec<String> = if cfg.key == "all" {
        PIPELINE_KEYS.iter().map(|s| s.to_string()).collect()
    } else {
        vec![resolve_key(&cfg.key)?.to_string()]
    };
    let mut entries = Vec::new();
    for key in keys {
        let mut c = cfg.clone();
        c.key = key.clone();
        let pl = c.pipeline()?;
        let r = pl.reduce_check(cfg.seed)?;
        let z = ZeroTest {
            seed: cfg.seed,
            ..ZeroTest::default()
        }
        .with_fixed(pl.env());
        let (vz, vf) = pl.map.invariance_residuals();
        let invariant_form = z.is_zero(&vz) && z.is_zero(&vf);
        let links: Vec<(String, bool)> = pl.link_checks(cfg.seed)?.into_iter().map(|(n, v)| (n, v.is_zero())).collect();
        let pass = r.pass && invariant_form && links.iter().all(|l| l.1);
        entries.push(ReduceEntry {
            key,
            zeta: pl.map.zeta.to_string(),
            u_form: pl.map.u_form.to_string(),
            reduced: pl.stages[0].ode.lhs.to_string(),
            reduce_check: r.pass,
            max_abs: r.verdict.max_abs(),
            invariant_form,
            links,
            pass,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    let mut csv = String::from("key,reduce_check,max_abs,invariant_form,pass\n");
    for e in &entries {
        let _ = writeln!(csv, "{},{},{:e},{},{}", e.key, e.reduce_check, e.max_abs, e.invariant_form, e.pass);
    }
    let out = ReduceOutput {
        version: REPORT_VERSION,
        alpha: cfg.alpha,
        beta: cfg.beta,
        entries,
        pass,
    };
    Ok(Output {
        name: format!("reduce_{}", file_stem(&cfg.key)),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let pl = cfg.pipeline()?;
    let stage = pl.stage(&pl.plan.stage).expect("planned stage");
    let ode = s_substitute(&stage.ode);
    let ic = cfg.ic.clone().unwrap_or_else(|| pl.plan.ic.clone());
    if ic.len() != ode.order {
        return Err(CliError::Domain(format!("{} needs {} initial values, got {}", pl.key, ode.order, ic.len())));
    }
    let s0 = cfg.s0.unwrap_or(pl.plan.s0);
    let span = cfg.span.unwrap_or((s0.min(0.0), s0.max(0.0) + 3.0));
    let sol = integrate_ivp(&ode, &ic, s0, span, cfg.ode_tol)?;
    let residual = residual_of_ode(&ode, &sol, 400)?;
    let pass = residual.max_scaled < 10.0 * cfg.ode_tol.max(1e-12) || residual.max_scaled < 1e-8;
    let mut csv = String::from("s,value,derivative\n");
    let (lo, hi) = sol.span;
    let n = 400;
    for i in 0..=n {
        let s = lo + (hi - lo) * i as f64 / n as f64;
        let d = sol.derivatives(s, 1)?;
        let _ = writeln!(csv, "{s},{:e},{:e}", d[0], d[1]);
    }
    let out = SolveOutput {
        version: REPORT_VERSION,
        key: pl.key.clone(),
        stage: stage.name.clone(),
        solution: sol.meta(),
        residual,
        pass,
    };
    Ok(Output {
        name: format!("solve_{}", file_stem(&pl.key)),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn lift_cmd(cfg: &RunConfig, name: &str) -> Result<Output, CliError> {
    let pl = cfg.pipeline()?;
    let span = s_range(&pl.map, &pl.env(), cfg.grid.t, cfg.grid.x, cfg.grid.nt.max(cfg.grid.nx).max(2))?;
    let sol = pl.solve(span, cfg.ode_tol)?;
    let g = lift(&pl.map, &sol.psi, &cfg.grid, &pl.env())?;
    let tolerance = confsym::verifier::lift_tolerance(&pl.key);
    let echo = ConfigEcho {
        alpha: cfg.alpha,
        beta: cfg.beta,
        a: pl.params.get("a"),
        b: pl.params.get("b"),
        gamma: pl.params.get("gamma"),
        mu: pl.params.get("mu"),
        seed: cfg.seed,
        ode_tol: cfg.ode_tol,
        tolerance,
    };
    let report = pde_residual(&pl.spec, &g, echo)?;
    let csv = grid_csv(&g, &pointwise_residuals(&pl.spec, &g)?);
    let pass = report.pass;
    let json = if name == "residual" {
        to_json(&report)?
    } else {
        to_json(&LiftOutput {
            version: REPORT_VERSION,
            key: pl.key.clone(),
            psi: g.psi.clone(),
            report,
            pass,
        })?
    };
    Ok(Output {
        name: format!("{name}_{}", file_stem(&pl.key)),
        json,
        csv: Some(csv),
        pass,
    })
}

fn identity(cfg: &RunConfig) -> Result<Output, CliError> {
    let gamma = cfg.gamma.unwrap_or(1.0);
    let rp = ReductionParams {
        gamma: Some(gamma),
        ..cfg.reduction_params()
    };
    let pl = pipeline("kdv/V4:fp2", &rp)?;
    let span = s_range(&pl.map, &pl.env(), cfg.grid.t, cfg.grid.x, 21)?;
    let sol = pl.solve(span, cfg.ode_tol)?;
    let id = k1_k2_identity_check(&sol.stages["k2"], gamma, cfg.alpha, 400)?;
    let (rt, flagged) = miura_roundtrip(&sol.stages["fp2"], &sol.stages["k2"], gamma, 400)?;
    let pass = id.max_abs < 1e-6 && rt < 1e-8;
    let csv = format!("check,value\nidentity,{:e}\nmiura_roundtrip,{rt:e}\n", id.max_abs);
    let out = IdentityOutput {
        version: REPORT_VERSION,
        identity: id,
        miura_roundtrip: rt,
        miura_flagged: flagged,
        pass,
    };
    Ok(Output {
        name: "identity".into(),
        json: to_json(&out)?,
        csv: Some(csv),
        pass,
    })
}

fn suite(cfg: &RunConfig) -> Result<(Output, SuiteReport), CliError> {
    let mut sc = cfg.suite_config();
    if let Some(p) = &sc.pipelines {
        for k in p {
            resolve_key(k)?;
        }
    } else {
        sc.pipelines = Some(LIFT_PIPELINES.iter().map(|s| s.to_string()).collect());
    }
    let report = run_suite(&sc)?;
    let mut csv = String::from("section,check,measured,threshold,control,pass\n");
    for s in &report.sections {
        for c in &s.checks {
            let _ = writeln!(csv, "{},\"{}\",{:e},{:e},{},{}", s.name, c.name, c.measured, c.threshold, c.control, c.pass);
        }
    }
    Ok((
        Output {
            name: "suite".into(),
            json: to_json(&report)?,
            csv: Some(csv),
            pass: report.pass,
        },
        report,
    ))
}

fn emit(out: &Output, cfg: &RunConfig, stdout: &mut String) -> Result<(), CliError> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?;
            let write = |p: PathBuf, s: &str| fs::write(&p, s).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())));
            if matches!(cfg.format, Format::Json | Format::Both) {
                write(dir.join(format!("{}.json", out.name)), &out.json)?;
            }
            if matches!(cfg.format, Format::Csv | Format::Both) {
                if let Some(csv) = &out.csv {
                    write(dir.join(format!("{}.csv", out.name)), csv)?;
                }
            }
        }
        None => match cfg.format {
            Format::Csv => stdout.push_str(out.csv.as_deref().unwrap_or("")),
            _ => stdout.push_str(&out.json),
        },
    }
    Ok(())
}

/// Result of a run: exit status plus what goes to stdout and stderr.
pub struct RunResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(argv: I, env_seed: Option<&str>) -> RunResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                RunResult { code, stdout: text, stderr: String::new() }
            } else {
                RunResult { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let mut stdout = String::new();
    let mut stderr = String::new();
    let res = dispatch(&cli.command, env_seed, &mut stdout, &mut stderr);
    let code = match res {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(stderr, "usage error: {m}");
            2
        }
        Err(CliError::Domain(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            2
        }
    };
    RunResult { code, stdout, stderr }
}

fn dispatch(cmd: &Command, env_seed: Option<&str>, stdout: &mut String, stderr: &mut String) -> Result<bool, CliError> {
    let common = match cmd {
        Command::RulesCheck(c)
        | Command::Symmetries(c)
        | Command::Commutators(c)
        | Command::Reduce(c)
        | Command::Solve(c)
        | Command::Lift(c)
        | Command::Residual(c)
        | Command::Identity(c)
        | Command::Suite(c) => c,
    };
    let cfg = resolve(common, env_seed)?;
    let out = match cmd {
        Command::RulesCheck(c) => rules(&cfg, c.alpha.is_some())?,
        Command::Symmetries(_) => symmetries(&cfg)?,
        Command::Commutators(_) => commutators(&cfg)?,
        Command::Reduce(_) => reduce(&cfg)?,
        Command::Solve(_) => solve(&cfg)?,
        Command::Lift(_) => lift_cmd(&cfg, "lift")?,
        Command::Residual(_) => lift_cmd(&cfg, "residual")?,
        Command::Identity(_) => identity(&cfg)?,
        Command::Suite(_) => {
            let (out, report) = suite(&cfg)?;
            for s in &report.sections {
                let failed = s.checks.iter().filter(|c| !c.pass).count();
                let _ = writeln!(
                    stderr,
                    "{} {} ({} checks, {failed} failed)",
                    if s.pass { "PASS" } else { "FAIL" },
                    s.name,
                    s.checks.len()
                );
            }
            out
        }
    };
    emit(&out, &cfg, stdout)?;
    Ok(out.pass)
}

/// Write the default config as JSON, for reference.
pub fn default_config_json() -> String {
    serde_json::to_string_pretty(&RunConfig::default()).expect("serializable")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"alpha": 0.5, "beta": 0.4, "seed": 7}"#).unwrap();
        let c = Common {
            config: Some(path.clone()),
            beta: Some(0.9),
            ..Common::default()
        };
        let cfg = resolve(&c, Some("11")).unwrap();
        assert_eq!((cfg.alpha, cfg.beta, cfg.seed), (0.5, 0.9, 7));
        let cfg = resolve(&Common::default(), Some("0x10")).unwrap();
        assert_eq!(cfg.seed, 16);
        assert_eq!(resolve(&Common::default(), None).unwrap().seed, JET_SEED);
    }

    #[test]
    fn bad_config_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"alpah": 0.5}"#).unwrap();
        let c = Common {
            config: Some(path),
            ..Common::default()
        };
        assert!(matches!(resolve(&c, None), Err(CliError::Usage(_))));
    }

    #[test]
    fn order_out_of_range() {
        let c = Common {
            alpha: Some(1.5),
            ..Common::default()
        };
        assert!(matches!(resolve(&c, None), Err(CliError::Domain(_))));
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("0.5, 2").unwrap(), (0.5, 2.0));
        assert!(parse_pair("0.5").is_err());
    }
}
