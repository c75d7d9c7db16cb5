//! Similarity reductions: the pipelines from each equation to its reduced
//! ODEs, the maps between those ODEs, and the lift of ODE solutions back to
//! solutions on a `(t, x)` grid.
//!
//! Every reduced ODE is stored in the form it is written in (conformable
//! derivatives in `zeta`/`omega`, or classical in `zeta`/`z`). All numerics
//! happen in the classical variable `S`: `S = ζ^α/α` for conformable
//! reductions and `S = ζ` for classical ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::{EquationId, EquationSpec};
use crate::expr::{compile, diff, parse, simplify, substitute, EvalEnv, Expr, ExprError, Rational, Symbol, ZeroTest, ZeroVerdict};
use crate::jet::VectorField;
use crate::ode::{integrate_ivp, residual_at, s_substitute, CanonicalOde, OdeError, OdeKind, OdeResidual, OdeSolution};
use crate::symmetry::family;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("unknown pipeline `{0}`")]
    UnknownPipeline(String),
    #[error("pipeline mismatch: {0}")]
    Mismatch(String),
    #[error("4γ + 1 vanishes (γ = {0})")]
    SingularGamma(f64),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

pub(crate) fn p(text: &str) -> Expr {
    simplify(&parse(text).expect("built-in expression"))
}

pub(crate) fn num(v: f64) -> Expr {
    Expr::num(Rational::from_float(v).expect("finite value"))
}

fn sym(name: &str) -> Symbol {
    Symbol::new(name).expect("alphabet symbol")
}

/// Similarity form `u = P(t, x, Ψ(ζ))`.
#[derive(Clone, Debug)]
pub struct ReductionMap {
    pub key: String,
    pub equation: EquationId,
    pub generator: VectorField,
    /// Similarity variable in `(t, x)`.
    pub zeta: Expr,
    /// Whether the reduced ODE uses conformable derivatives in `ζ`.
    pub fractional: bool,
    /// `u` in terms of `t`, `x` and the symbol `Psi`.
    pub u_form: Expr,
    /// Substituting the form into the equivalent classical equation gives
    /// `pde_factor · (reduced ODE)`.
    pub pde_factor: Expr,
}

impl ReductionMap {
    /// The classical variable `S(t, x)`.
    pub fn s_expr(&self) -> Expr {
        if self.fractional {
            simplify(&(self.zeta.pow(Expr::sym("alpha")) / Expr::sym("alpha")))
        } else {
            self.zeta.clone()
        }
    }

    /// `V(ζ)` and `V(u - P)|_{u = P}`, both zero for an invariant form.
    pub fn invariance_residuals(&self) -> (Expr, Expr) {
        let v = &self.generator;
        let vz = v.apply(&self.zeta);
        // Ψ is constant along the orbits since ζ is
        let form_u = Expr::sym("u") - &self.u_form;
        let vf = v.apply(&form_u);
        let on = substitute(&vf, &[("u", self.u_form.clone())]);
        (vz, on)
    }
}

/// How a stage's unknown relates to the previous stage's.
#[derive(Clone, Debug)]
pub enum Link {
    /// First stage.
    Origin,
    /// The stage is a first integral: `d/dS[f · this] = f · previous`.
    FirstIntegral { factor: Expr },
    Scale(ScaleMap),
    /// Previous unknown `W` and this `Φ` satisfy
    /// `W = -Φ' - Φ²`, `Φ = (W' + γ)/(2W - S)`.
    Miura,
    /// `Θ = (W - S/2)/(4γ + 1)`.
    P34,
    /// `Ψ = (2b/a) Φ'/Φ`.
    ColeHopf,
}

/// Scale change `v_tgt = k·v_src + d`, `Y_src = m·Y_tgt`, written on the
/// variables as printed. For conformable ODEs the classical variable moves by
/// `S_tgt = k^α S_src` (`d` must vanish).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScaleMap {
    pub k: f64,
    pub d: f64,
    pub m: f64,
    /// `Some(α)` when both ODEs are conformable of order `α`.
    pub alpha: Option<f64>,
}

impl ScaleMap {
    /// `(c, d, m)` with `S_tgt = c·S_src + d`.
    pub fn classical(&self) -> (f64, f64, f64) {
        match self.alpha {
            Some(a) => (self.k.powf(a), 0.0, self.m),
            None => (self.k, self.d, self.m),
        }
    }

    pub fn forward(&self, s: f64, y: f64) -> (f64, f64) {
        let (c, d, m) = self.classical();
        (c * s + d, y / m)
    }

    pub fn inverse(&self, s: f64, y: f64) -> (f64, f64) {
        let (c, d, m) = self.classical();
        ((s - d) / c, m * y)
    }
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub name: String,
    pub ode: CanonicalOde,
    pub link: Link,
}

/// Which stage is integrated numerically, and from where.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolvePlan {
    pub stage: String,
    pub s0: f64,
    pub ic: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    pub key: String,
    pub spec: EquationSpec,
    pub map: ReductionMap,
    pub stages: Vec<Stage>,
    pub plan: SolvePlan,
    pub params: EvalEnv,
}

impl Pipeline {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    fn stage_index(&self, name: &str) -> usize {
        self.stages.iter().position(|s| s.name == name).expect("stage exists")
    }

    /// Equation parameters merged with the pipeline's constants.
    pub fn env(&self) -> EvalEnv {
        self.spec.env().merged(&self.params)
    }
}

/// Free constants of the reductions.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReductionParams {
    pub alpha: f64,
    pub beta: f64,
    /// Integration constant; each pipeline has its own default when unset.
    pub gamma: Option<f64>,
    /// Constant of the `V3 + μV1` Burgers reduction.
    pub mu: f64,
    /// Constant of the `V3 + aV1` KdV reduction.
    pub kdv_a: f64,
    /// Burgers coefficients.
    pub a: f64,
    pub b: f64,
}

impl Default for ReductionParams {
    fn default() -> Self {
        ReductionParams {
            alpha: 0.7,
            beta: 0.6,
            gamma: None,
            mu: 1.0,
            kdv_a: 6.0,
            a: 1.0,
            b: 1.0,
        }
    }
}

/// Default integration constant. For mKdV `γ = 1` gives `μ = 3γ/β = 5` at
/// `β = 0.6` and the second Painlevé solution blows up inside the lift grid.
pub fn default_gamma(key: &str) -> f64 {
    if key == "mkdv/V3" {
        0.2
    } else {
        1.0
    }
}

impl ReductionParams {
    pub fn gamma_for(&self, key: &str) -> f64 {
        self.gamma.unwrap_or_else(|| default_gamma(key))
    }
}

pub const PIPELINE_KEYS: [&str; 7] = [
    "kdv/V4:fp2",
    "kdv/V4:p34",
    "kdv/V3+aV1",
    "mkdv/V3",
    "burgers/V4",
    "burgers/V3+muV1",
    "mburgers/V3",
];

/// Accepts the canonical keys and `kdv/V4` for the FP_II branch.
pub fn resolve_key(key: &str) -> Result<&'static str, ReductionError> {
    if key == "kdv/V4" {
        return Ok("kdv/V4:fp2");
    }
    PIPELINE_KEYS
        .iter()
        .find(|k| **k == key)
        .copied()
        .ok_or_else(|| ReductionError::UnknownPipeline(key.to_string()))
}

fn frac(kind: OdeKind, unknown: &str, var: &str, lhs: &str, env: &EvalEnv) -> CanonicalOde {
    CanonicalOde::new(kind, unknown, var, p(lhs), env.clone()).fractional()
}

fn classical(kind: OdeKind, unknown: &str, var: &str, lhs: &str, env: &EvalEnv) -> CanonicalOde {
    CanonicalOde::new(kind, unknown, var, p(lhs), env.clone())
}

fn stage(name: &str, ode: CanonicalOde, link: Link) -> Stage {
    Stage {
        name: name.to_string(),
        ode,
        link,
    }
}

const FP2_IC: [f64; 2] = [0.1, 0.0];
const S0: f64 = 1e-3;

fn kdv_v4(rp: &ReductionParams, branch: &str) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Kdv, rp.alpha, rp.beta);
    let mut env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("gamma", rp.gamma_for("kdv/V4:fp2"));
    if branch == "p34" {
        env.set("sigma", -1.0 / 6.0);
    }
    let map = ReductionMap {
        key: format!("kdv/V4:{branch}"),
        equation: EquationId::Kdv,
        generator: family(EquationId::Kdv).basis[3].clone(),
        zeta: p("x*t^(-beta/(3*alpha))"),
        fractional: true,
        u_form: p("t^(-2*beta/3)*Psi"),
        pde_factor: p("t^(-5*beta/3)"),
    };
    let scale = ScaleMap {
        k: (rp.beta / 3.0).powf(1.0 / (3.0 * rp.alpha)),
        d: 0.0,
        m: (rp.beta / 3.0).powf(2.0 / 3.0),
        alpha: Some(rp.alpha),
    };
    let mut stages = vec![
        stage(
            "reduced",
            frac(
                OdeKind::ReducedRaw,
                "Psi",
                "zeta",
                "Psi_3 + 6*Psi*Psi_1 - beta/3*zeta^alpha/alpha*Psi_1 - 2*beta/3*Psi",
                &env,
            ),
            Link::Origin,
        ),
        stage(
            "k1",
            frac(OdeKind::K1, "W", "omega", "W_3 + 6*W*W_1 - omega^alpha/alpha*W_1 - 2*W", &env),
            Link::Scale(scale),
        ),
        stage(
            "k2",
            frac(
                OdeKind::K2,
                "W",
                "omega",
                "W_2 + 2*W^2 - omega^alpha/alpha*W + (gamma*(gamma + 1) + W_1 - W_1^2)/(2*W - omega^alpha/alpha)",
                &env,
            ),
            Link::FirstIntegral {
                factor: p("2*W - omega^alpha/alpha"),
            },
        ),
    ];
    let fp2 = stage(
        "fp2",
        frac(OdeKind::FpII, "Phi", "omega", "Phi_2 - 2*Phi^3 - omega^alpha/alpha*Phi - gamma", &env),
        Link::Miura,
    );
    stages.push(fp2);
    if branch == "p34" {
        stages.push(stage(
            "fp34",
            frac(
                OdeKind::Fp34,
                "Theta",
                "omega",
                "Theta_2 - Theta_1^2/(2*Theta) - 4*sigma*Theta^2 + omega^alpha/alpha*Theta + 1/(2*Theta)",
                &env,
            ),
            Link::P34,
        ));
    }
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages,
        plan: SolvePlan {
            stage: "fp2".into(),
            s0: S0,
            ic: FP2_IC.to_vec(),
        },
        params: env,
    }
}

fn kdv_v3_a_v1(rp: &ReductionParams) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Kdv, rp.alpha, rp.beta);
    let env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("gamma", rp.gamma_for("kdv/V3+aV1"))
        .with("a", rp.kdv_a);
    let basis = family(EquationId::Kdv).basis;
    let generator = basis[2].add(&basis[0].scale(&Expr::sym("a"))).with_label("V3+aV1");
    let map = ReductionMap {
        key: "kdv/V3+aV1".into(),
        equation: EquationId::Kdv,
        generator,
        zeta: p("x^alpha/alpha - 3*t^(2*beta)/(a*beta^2)"),
        fractional: false,
        u_form: p("t^beta/(a*beta) + Psi"),
        pde_factor: Expr::one(),
    };
    let k = (1.0 / (2.0 * rp.kdv_a)).powf(0.2);
    let scale = ScaleMap {
        k,
        d: -k * rp.gamma_for("kdv/V3+aV1") * rp.kdv_a,
        m: -2.0 * k * k,
        alpha: None,
    };
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages: vec![
            stage(
                "reduced",
                classical(OdeKind::ReducedRaw, "Psi", "zeta", "Psi_3 + 6*Psi*Psi_1 + 1/a", &env),
                Link::Origin,
            ),
            stage(
                "integrated",
                classical(OdeKind::ReducedRaw, "Psi", "zeta", "Psi_2 + 3*Psi^2 + zeta/a - gamma", &env),
                Link::FirstIntegral { factor: Expr::one() },
            ),
            stage(
                "p1",
                classical(OdeKind::PI, "Phi", "z", "Phi_2 - 6*Phi^2 - z", &env),
                Link::Scale(scale),
            ),
        ],
        plan: SolvePlan {
            stage: "integrated".into(),
            s0: 0.0,
            ic: vec![0.0, 0.0],
        },
        params: env,
    }
}

fn mkdv_v3(rp: &ReductionParams) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Mkdv, rp.alpha, rp.beta);
    let env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("gamma", rp.gamma_for("mkdv/V3"))
        .with("mu", 3.0 * rp.gamma_for("mkdv/V3") / rp.beta);
    let map = ReductionMap {
        key: "mkdv/V3".into(),
        equation: EquationId::Mkdv,
        generator: family(EquationId::Mkdv).basis[2].clone(),
        zeta: p("x*t^(-beta/(3*alpha))"),
        fractional: true,
        u_form: p("t^(-beta/3)*Psi"),
        pde_factor: p("t^(-4*beta/3)"),
    };
    let c = (rp.beta / 3.0).powf(1.0 / 3.0);
    let scale = ScaleMap {
        k: (rp.beta / 3.0).powf(1.0 / (3.0 * rp.alpha)),
        d: 0.0,
        m: c,
        alpha: Some(rp.alpha),
    };
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages: vec![
            stage(
                "reduced",
                frac(
                    OdeKind::ReducedRaw,
                    "Psi",
                    "zeta",
                    "Psi_3 - 6*Psi^2*Psi_1 - beta/3*zeta^alpha/alpha*Psi_1 - beta/3*Psi",
                    &env,
                ),
                Link::Origin,
            ),
            stage(
                "integrated",
                frac(
                    OdeKind::ReducedRaw,
                    "Psi",
                    "zeta",
                    "Psi_2 - 2*Psi^3 - beta/3*zeta^alpha/alpha*Psi - gamma",
                    &env,
                ),
                Link::FirstIntegral { factor: Expr::one() },
            ),
            stage(
                "fp2",
                frac(OdeKind::FpII, "Phi", "omega", "Phi_2 - 2*Phi^3 - omega^alpha/alpha*Phi - mu", &env),
                Link::Scale(scale),
            ),
        ],
        plan: SolvePlan {
            stage: "fp2".into(),
            s0: S0,
            ic: FP2_IC.to_vec(),
        },
        params: env,
    }
}

fn burgers_v4(rp: &ReductionParams) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Burgers, rp.alpha, rp.beta).with_ab(rp.a, rp.b);
    let env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("gamma", rp.gamma_for("burgers/V4"))
        .with("a", rp.a)
        .with("b", rp.b);
    let map = ReductionMap {
        key: "burgers/V4".into(),
        equation: EquationId::Burgers,
        generator: family(EquationId::Burgers).basis[3].clone(),
        zeta: p("x*t^(-beta/(2*alpha))"),
        fractional: true,
        u_form: p("t^(-beta/2)*Psi"),
        pde_factor: p("t^(-3*beta/2)"),
    };
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages: vec![
            stage(
                "reduced",
                frac(
                    OdeKind::ReducedRaw,
                    "Psi",
                    "zeta",
                    "b*Psi_2 + a*Psi*Psi_1 - beta/2*zeta^alpha/alpha*Psi_1 - beta/2*Psi",
                    &env,
                ),
                Link::Origin,
            ),
            stage(
                "riccati",
                frac(
                    OdeKind::FractionalRiccati,
                    "Psi",
                    "zeta",
                    "b*Psi_1 + a/2*Psi^2 - beta/2*zeta^alpha/alpha*Psi - gamma",
                    &env,
                ),
                Link::FirstIntegral { factor: Expr::one() },
            ),
            stage(
                "linear",
                frac(
                    OdeKind::Linear2ndOrder,
                    "Phi",
                    "zeta",
                    "Phi_2 - beta/(2*b)*zeta^alpha/alpha*Phi_1 - a*gamma/(2*b^2)*Phi",
                    &env,
                ),
                Link::ColeHopf,
            ),
        ],
        plan: SolvePlan {
            stage: "linear".into(),
            s0: S0,
            ic: vec![1.0, 0.0],
        },
        params: env,
    }
}

fn burgers_v3_mu_v1(rp: &ReductionParams) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Burgers, rp.alpha, rp.beta).with_ab(rp.a, rp.b);
    let env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("gamma", rp.gamma_for("burgers/V3+muV1"))
        .with("mu", rp.mu)
        .with("a", rp.a)
        .with("b", rp.b);
    let basis = family(EquationId::Burgers).basis;
    let generator = basis[2].add(&basis[0].scale(&Expr::sym("mu"))).with_label("V3+muV1");
    let map = ReductionMap {
        key: "burgers/V3+muV1".into(),
        equation: EquationId::Burgers,
        generator,
        zeta: p("x^alpha/alpha - a*t^(2*beta)/(2*mu*beta^2)"),
        fractional: false,
        u_form: p("t^beta/(mu*beta) + Psi"),
        pde_factor: Expr::one(),
    };
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages: vec![
            stage(
                "reduced",
                classical(OdeKind::ReducedRaw, "Psi", "zeta", "b*Psi_2 + a*Psi*Psi_1 + 1/mu", &env),
                Link::Origin,
            ),
            stage(
                "riccati",
                classical(
                    OdeKind::ClassicalRiccati,
                    "Psi",
                    "zeta",
                    "b*Psi_1 + a/2*Psi^2 + zeta/mu - gamma",
                    &env,
                ),
                Link::FirstIntegral { factor: Expr::one() },
            ),
        ],
        plan: SolvePlan {
            stage: "riccati".into(),
            s0: -3.0,
            ic: vec![0.0],
        },
        params: env,
    }
}

fn mburgers_v3(rp: &ReductionParams) -> Pipeline {
    let spec = EquationSpec::new(EquationId::Mburgers, rp.alpha, rp.beta).with_ab(rp.a, rp.b);
    let env = EvalEnv::new()
        .with("alpha", rp.alpha)
        .with("beta", rp.beta)
        .with("a", rp.a)
        .with("b", rp.b);
    let map = ReductionMap {
        key: "mburgers/V3".into(),
        equation: EquationId::Mburgers,
        generator: family(EquationId::Mburgers).basis[2].clone(),
        zeta: p("x*t^(-beta/(2*alpha))"),
        fractional: true,
        u_form: p("t^(-beta/4)*Psi"),
        pde_factor: p("t^(-5*beta/4)"),
    };
    let scale = ScaleMap {
        k: (rp.beta / 2.0).powf(1.0 / (2.0 * rp.alpha)),
        d: 0.0,
        m: (rp.beta / 2.0).powf(0.25),
        alpha: Some(rp.alpha),
    };
    Pipeline {
        key: map.key.clone(),
        spec,
        map,
        stages: vec![
            stage(
                "reduced",
                frac(
                    OdeKind::ReducedRaw,
                    "Psi",
                    "zeta",
                    "b*Psi_2 + a*Psi^2*Psi_1 - beta/2*zeta^alpha/alpha*Psi_1 - beta/4*Psi",
                    &env,
                ),
                Link::Origin,
            ),
            stage(
                "target",
                frac(
                    OdeKind::ReducedRaw,
                    "Phi",
                    "omega",
                    "b*Phi_2 + (a*Phi^2 - omega^alpha/alpha)*Phi_1 - Phi/2",
                    &env,
                ),
                Link::Scale(scale),
            ),
        ],
        plan: SolvePlan {
            stage: "target".into(),
            s0: S0,
            ic: FP2_IC.to_vec(),
        },
        params: env,
    }
}

pub fn pipeline(key: &str, rp: &ReductionParams) -> Result<Pipeline, ReductionError> {
    Ok(match resolve_key(key)? {
        "kdv/V4:fp2" => kdv_v4(rp, "fp2"),
        "kdv/V4:p34" => kdv_v4(rp, "p34"),
        "kdv/V3+aV1" => kdv_v3_a_v1(rp),
        "mkdv/V3" => mkdv_v3(rp),
        "burgers/V4" => burgers_v4(rp),
        "burgers/V3+muV1" => burgers_v3_mu_v1(rp),
        "mburgers/V3" => mburgers_v3(rp),
        _ => unreachable!(),
    })
}

/// All seven pipelines.
pub fn catalog(rp: &ReductionParams) -> Vec<Pipeline> {
    PIPELINE_KEYS.iter().map(|k| pipeline(k, rp).unwrap()).collect()
}

/// `d/dS` of an ODE expression in `var` and the derivative symbols of `unknown`.
pub fn ode_total_derivative(e: &Expr, var: &str, unknown: &str) -> Expr {
    let mut terms = vec![diff(e, &sym(var))];
    for s in e.free_symbols() {
        if let Some((base, k)) = s.unknown_parts() {
            if base == unknown {
                terms.push(diff(e, &s) * Expr::symbol(&Symbol::unknown(unknown, k + 1)));
            }
        }
    }
    simplify(&Expr::sum(terms))
}

/// Chain-rule derivative of `P(t, x, Ψ_k)` where `Ψ_k` are derivatives in
/// the classical variable `S(t, x)`.
fn chain_derivative(e: &Expr, var: &str, s_expr: &Expr, unknown: &str) -> Expr {
    let v = sym(var);
    let ds = diff(s_expr, &v);
    let mut terms = vec![diff(e, &v)];
    for s in e.free_symbols() {
        if let Some((base, k)) = s.unknown_parts() {
            if base == unknown {
                terms.push(diff(e, &s) * Expr::symbol(&Symbol::unknown(unknown, k + 1)) * &ds);
            }
        }
    }
    simplify(&Expr::sum(terms))
}

/// `u, u_t, u_x, u_xx, u_xxx` as functions of `t, x, Psi_0..Psi_4`.
#[derive(Clone, Debug)]
pub struct LiftExprs {
    pub u: Expr,
    pub u_t: Expr,
    pub u_x: Expr,
    pub u_xx: Expr,
    pub u_xxx: Expr,
}

pub fn lift_exprs(map: &ReductionMap) -> LiftExprs {
    let s = map.s_expr();
    let u = map.u_form.clone();
    let u_t = chain_derivative(&u, "t", &s, "Psi");
    let u_x = chain_derivative(&u, "x", &s, "Psi");
    let u_xx = chain_derivative(&u_x, "x", &s, "Psi");
    let u_xxx = chain_derivative(&u_xx, "x", &s, "Psi");
    LiftExprs { u, u_t, u_x, u_xx, u_xxx }
}

/// The equivalent classical equation with the similarity form substituted.
pub fn substituted_equation(spec: &EquationSpec, map: &ReductionMap) -> Expr {
    let l = lift_exprs(map);
    let ee = spec.equivalent_form();
    simplify(&substitute(
        &ee,
        &[
            ("u_xxx", l.u_xxx),
            ("u_xx", l.u_xx),
            ("u_x", l.u_x),
            ("u_t", l.u_t),
            ("u", l.u),
        ],
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReduceReport {
    pub key: String,
    pub alpha: f64,
    pub beta: f64,
    pub verdict: ZeroVerdict,
    pub pass: bool,
}

/// Substitute the similarity form into the equivalent classical equation and
/// zero-test `PDE − pde_factor · reduced`, with `S` written in `(t, x)`.
pub fn reduce_check(
    spec: &EquationSpec,
    map: &ReductionMap,
    reduced: &CanonicalOde,
    params: &EvalEnv,
    seed: u64,
) -> Result<ReduceReport, ReductionError> {
    if spec.id != map.equation {
        return Err(ReductionError::Mismatch(format!("{} vs {}", spec.id, map.key)));
    }
    if reduced.unknown != "Psi" {
        return Err(ReductionError::Mismatch(format!("reduced unknown is {}", reduced.unknown)));
    }
    let cl = s_substitute(reduced);
    let ode_in_tx = substitute(&cl.lhs, &[(&cl.var, map.s_expr())]);
    let diff = substituted_equation(spec, map) - &map.pde_factor * ode_in_tx;
    let z = ZeroTest {
        seed,
        ..ZeroTest::default()
    }
    .with_fixed(spec.env().merged(params));
    let verdict = z.check(&diff)?;
    Ok(ReduceReport {
        key: map.key.clone(),
        alpha: spec.alpha,
        beta: spec.beta,
        pass: verdict.is_zero(),
        verdict,
    })
}

impl Pipeline {
    /// [`reduce_check`] against the first stage.
    pub fn reduce_check(&self, seed: u64) -> Result<ReduceReport, ReductionError> {
        reduce_check(&self.spec, &self.map, &self.stages[0].ode, &self.params, seed)
    }

    /// Symbolic check of each link that is an algebraic statement:
    /// first integrals and scale maps. Returns `(stage, verdict)`.
    pub fn link_checks(&self, seed: u64) -> Result<Vec<(String, ZeroVerdict)>, ReductionError> {
        let z = ZeroTest {
            seed,
            ..ZeroTest::default()
        }
        .with_fixed(self.env());
        let mut out = Vec::new();
        for w in self.stages.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            let a = s_substitute(&prev.ode);
            let b = s_substitute(&cur.ode);
            let residual = match &cur.link {
                Link::FirstIntegral { factor } => {
                    let f = substitute(factor, &[(&cur.ode.var, s_var_expr(&cur.ode))]);
                    let f = simplify(&f);
                    let lhs = ode_total_derivative(&(&f * &b.lhs), &b.var, &b.unknown);
                    let rhs = &f * rename_unknown(&a.lhs, &a.unknown, &b.unknown);
                    Some(lhs - rhs)
                }
                Link::Scale(sc) => Some(scale_residual(&a, &b, sc)),
                _ => None,
            };
            if let Some(r) = residual {
                out.push((cur.name.clone(), z.check(&r)?));
            }
        }
        Ok(out)
    }
}

/// The classical variable of a conformable ODE written in its own variable:
/// `var = (α s)^{1/α}`; used to move factors to `s`.
fn s_var_expr(ode: &CanonicalOde) -> Expr {
    if ode.fractional {
        (Expr::sym("alpha") * Expr::sym("s")).pow(Expr::sym("alpha").recip())
    } else {
        Expr::sym(&ode.var)
    }
}

fn rename_unknown(e: &Expr, from: &str, to: &str) -> Expr {
    if from == to {
        return e.clone();
    }
    let mut b = BTreeMap::new();
    for s in e.free_symbols() {
        if let Some((base, k)) = s.unknown_parts() {
            if base == from {
                b.insert(s.clone(), Expr::symbol(&Symbol::unknown(to, k)));
            }
        }
    }
    e.substitute(&b)
}

/// Substitute `Y_src^{(k)} = m c^k Y_tgt^{(k)}` and `S_src = (S_tgt − d)/c`
/// into the source ODE and compare with the target ODE times the factor read
/// off the highest derivative.
fn scale_residual(src: &CanonicalOde, tgt: &CanonicalOde, sc: &ScaleMap) -> Expr {
    let (c, d, m) = sc.classical();
    let mut b = BTreeMap::new();
    for k in 0..=src.order {
        b.insert(
            src.y(k),
            num(m * c.powi(k as i32)) * Expr::symbol(&tgt.y(k)),
        );
    }
    let src_var = src.var_symbol();
    b.insert(src_var, (Expr::symbol(&tgt.var_symbol()) - num(d)) / num(c));
    let moved = simplify(&src.lhs.substitute(&b));
    let h = tgt.y(tgt.order);
    let factor = simplify(&(diff(&moved, &h) / diff(&tgt.lhs, &h)));
    moved - factor * &tgt.lhs
}

/// Sample points `(S, Y)` mapped forward and back; largest relative error.
pub fn scale_roundtrip_error(sc: &ScaleMap, samples: &[(f64, f64)]) -> f64 {
    samples
        .iter()
        .map(|&(s, y)| {
            let (a, b) = sc.forward(s, y);
            let (s2, y2) = sc.inverse(a, b);
            ((s2 - s).abs() / (1.0 + s.abs())).max((y2 - y).abs() / (1.0 + y.abs()))
        })
        .fold(0.0, f64::max)
}

/// Forward Miura map: FP_II solution `Φ` to `W = -Φ' - Φ²`.
pub fn miura_forward(phi: &OdeSolution, k2: &CanonicalOde) -> Result<OdeSolution, ReductionError> {
    let k2 = s_substitute(k2);
    Ok(phi.map(&p("-Phi_1 - Phi^2"), k2, "miura_forward")?)
}

/// Inverse Miura map `Φ = (W' + γ)/(2W − S)` evaluated at points; points
/// where `|2W − S| < 1e-10` are flagged and skipped.
pub fn miura_inverse_at(w: &OdeSolution, gamma: f64, points: &[f64]) -> Result<Vec<Option<f64>>, ReductionError> {
    points
        .iter()
        .map(|&s| {
            let d = w.derivatives(s, 1)?;
            let den = 2.0 * d[0] - s;
            Ok(if den.abs() < 1e-10 { None } else { Some((d[1] + gamma) / den) })
        })
        .collect()
}

/// Inverse Miura map as a dense solution (series division).
pub fn miura_inverse(w: &OdeSolution, fp2: &CanonicalOde) -> Result<OdeSolution, ReductionError> {
    let fp2 = s_substitute(fp2);
    let e = substitute(&p("(W_1 + gamma)/(2*W - s)"), &[("s", Expr::sym(&w.ode.var))]);
    Ok(w.map(&e, fp2, "miura_inverse")?)
}

/// `Θ = (W − S/2)/(4γ + 1)`.
pub fn p34_map(w: &OdeSolution, fp34: &CanonicalOde, gamma: f64) -> Result<OdeSolution, ReductionError> {
    if (4.0 * gamma + 1.0).abs() < 1e-14 {
        return Err(ReductionError::SingularGamma(gamma));
    }
    let fp34 = s_substitute(fp34);
    let e = (Expr::sym("W") - Expr::sym(&w.ode.var) / Expr::int(2)) / num(4.0 * gamma + 1.0);
    Ok(w.map(&e, fp34, "p34")?)
}

/// `Ψ = (2b/a) Φ'/Φ`. Fails at a zero of `Φ` inside the span.
pub fn cole_hopf(phi: &OdeSolution, riccati: &CanonicalOde, a: f64, b: f64) -> Result<OdeSolution, ReductionError> {
    for seg in &phi.segments {
        for s in [seg.lo, seg.center, seg.hi] {
            if phi.eval(s, 0)?.abs() < 1e-12 {
                return Err(ReductionError::Domain(format!("Φ vanishes near S = {s}")));
            }
        }
    }
    let riccati = s_substitute(riccati);
    Ok(phi.map(&(num(2.0 * b / a) * p("Phi_1/Phi")), riccati, "cole_hopf")?)
}

/// Residual of an ODE along a solution, skipping points where `skip` is
/// near zero (denominators).
pub fn residual_skipping(
    ode: &CanonicalOde,
    sol: &OdeSolution,
    samples: usize,
    skip: Option<&Expr>,
) -> Result<(OdeResidual, usize), ReductionError> {
    let ode = s_substitute(ode);
    let (lo, hi) = sol.span;
    let mut pts: Vec<f64> = (0..samples)
        .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / samples as f64)
        .collect();
    let mut skipped = 0;
    if let Some(den) = skip {
        let f = compile(den, &ode.slots(ode.order), &ode.params)?;
        let mut keep = Vec::with_capacity(pts.len());
        for s in pts {
            let mut args = vec![s];
            args.extend(sol.derivatives(s, ode.order)?);
            if f.eval(&args)?.abs() < 1e-6 {
                skipped += 1;
            } else {
                keep.push(s);
            }
        }
        pts = keep;
    }
    Ok((residual_at(&ode, sol, &pts)?, skipped))
}

/// Numeric solutions along a pipeline, all in their classical variables.
#[derive(Clone, Debug)]
pub struct PipelineSolution {
    pub key: String,
    /// The integrated stage's solution.
    pub integrated: OdeSolution,
    /// `Ψ(S_ζ)` for the lift.
    pub psi: OdeSolution,
    /// Intermediate solutions by stage name.
    pub stages: BTreeMap<String, OdeSolution>,
}

/// Range of the classical variable over a `(t, x)` rectangle, sampled on an
/// `n × n` grid including the edges.
pub fn s_range(map: &ReductionMap, env: &EvalEnv, t: (f64, f64), x: (f64, f64), n: usize) -> Result<(f64, f64), ReductionError> {
    let f = compile(&map.s_expr(), &[sym("t"), sym("x")], env)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let tv = t.0 + (t.1 - t.0) * i as f64 / (n - 1) as f64;
            let xv = x.0 + (x.1 - x.0) * j as f64 / (n - 1) as f64;
            let s = f.eval(&[tv, xv])?;
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    Ok((lo, hi))
}

impl Pipeline {
    /// Integrate the planned stage over a span large enough to cover
    /// `psi_span` (in the reduction variable) and map to `Ψ`.
    pub fn solve(&self, psi_span: (f64, f64), tol: f64) -> Result<PipelineSolution, ReductionError> {
        let target = self.stage(&self.plan.stage).expect("planned stage");
        let idx = self.stage_index(&self.plan.stage);
        // span of the integrated stage's variable
        let (mut lo, mut hi) = psi_span;
        for st in &self.stages[1..=idx] {
            if let Link::Scale(sc) = &st.link {
                let (c, d, _) = sc.classical();
                let (a, b) = (c * lo + d, c * hi + d);
                lo = a.min(b);
                hi = a.max(b);
            }
        }
        let margin = 0.02 * (hi - lo).max(1e-3);
        let lo = (lo - margin).min(self.plan.s0);
        let hi = (hi + margin).max(self.plan.s0);
        let ode = s_substitute(&target.ode);
        let sol = integrate_ivp(&ode, &self.plan.ic, self.plan.s0, (lo, hi), tol)?;
        let mut stages = BTreeMap::new();
        stages.insert(target.name.clone(), sol.clone());
        // walk back to the reduced equation
        let mut cur = sol.clone();
        for i in (1..=idx).rev() {
            let st = &self.stages[i];
            let prev = &self.stages[i - 1];
            let prev_ode = s_substitute(&prev.ode);
            cur = match &st.link {
                Link::Scale(sc) => {
                    let (c, d, m) = sc.classical();
                    cur.rescale(c, d, m, prev_ode, &format!("scaled_from_{}", st.name))
                }
                Link::Miura => miura_forward(&cur, &prev.ode)?,
                Link::ColeHopf => cole_hopf(&cur, &prev.ode, self.params.get("a").unwrap(), self.params.get("b").unwrap())?,
                Link::FirstIntegral { .. } => {
                    let mut c = cur.clone();
                    c.ode = prev_ode;
                    c
                }
                Link::P34 | Link::Origin => return Err(ReductionError::Mismatch("cannot walk back".into())),
            };
            stages.insert(prev.name.clone(), cur.clone());
        }
        Ok(PipelineSolution {
            key: self.key.clone(),
            integrated: sol,
            psi: cur,
            stages,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_pipelines() {
        let c = catalog(&ReductionParams::default());
        assert_eq!(c.len(), 7);
        let k = &c[0];
        assert_eq!(k.map.zeta, p("x*t^(-beta/(3*alpha))"));
        assert_eq!(k.map.u_form, p("t^(-2*beta/3)*Psi"));
        let b = pipeline("burgers/V3+muV1", &ReductionParams::default()).unwrap();
        assert_eq!(b.map.u_form, p("t^beta/(mu*beta) + Psi"));
        assert_eq!(resolve_key("kdv/V4").unwrap(), "kdv/V4:fp2");
        assert!(resolve_key("heat/V1").is_err());
    }

    #[test]
    fn forms_are_invariant() {
        for pl in catalog(&ReductionParams::default()) {
            let (a, b) = pl.map.invariance_residuals();
            let z = ZeroTest::default().with_fixed(pl.env());
            assert!(z.is_zero(&a), "{} zeta", pl.key);
            assert!(z.is_zero(&b), "{} form", pl.key);
        }
    }

    #[test]
    fn reductions_hold() {
        for (alpha, beta) in [(1.0, 1.0), (0.7, 0.6)] {
            let rp = ReductionParams {
                alpha,
                beta,
                ..ReductionParams::default()
            };
            for pl in catalog(&rp) {
                let r = pl.reduce_check(1).unwrap();
                assert!(r.pass, "{} {alpha} {beta}: {:?}", pl.key, r.verdict);
            }
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        let pl = pipeline("kdv/V4", &ReductionParams::default()).unwrap();
        let mut bad = pl.stages[0].ode.clone();
        bad.lhs = p("Psi_3 + 6*Psi*Psi_1 - beta/3*zeta^alpha/alpha*Psi_1 + 2*beta/3*Psi");
        let r = reduce_check(&pl.spec, &pl.map, &bad, &pl.params, 1).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn links_hold() {
        for pl in catalog(&ReductionParams::default()) {
            for (name, v) in pl.link_checks(1).unwrap() {
                assert!(v.is_zero(), "{} {name}: {v:?}", pl.key);
            }
        }
    }

    #[test]
    fn printed_mu_only_fits_beta_one() {
        for (beta, holds) in [(1.0, true), (0.6, false)] {
            let rp = ReductionParams {
                beta,
                ..ReductionParams::default()
            };
            let mut pl = pipeline("mkdv/V3", &rp).unwrap();
            let g = pl.params.get("gamma").unwrap();
            pl.params.set("mu", 3.0 * g);
            let all = pl.link_checks(3).unwrap();
            let (_, v) = all.iter().find(|(n, _)| n == "fp2").unwrap();
            assert_eq!(v.is_zero(), holds, "beta = {beta}");
        }
    }

    #[test]
    fn printed_cole_hopf_coefficient_leaves_residual() {
        let pl = pipeline("burgers/V4", &ReductionParams::default()).unwrap();
        let riccati = s_substitute(&pl.stages[1].ode);
        let mut printed = pl.stages[2].ode.clone();
        printed.lhs = p("Phi_2 - beta/(2*b)*zeta^alpha/alpha*Phi_1 + gamma/b*Phi");
        for (ode, ok) in [(pl.stages[2].ode.clone(), true), (printed, false)] {
            let lin = s_substitute(&ode);
            let phi = integrate_ivp(&lin, &[1.0, 0.0], 1e-3, (1e-3, 2.0), 1e-10).unwrap();
            let psi = cole_hopf(&phi, &pl.stages[1].ode, 1.0, 1.0).unwrap();
            let r = residual_at(&riccati, &psi, &[0.3, 0.9, 1.5]).unwrap();
            assert_eq!(r.max_abs < 1e-8, ok, "{}", r.max_abs);
        }
    }

    #[test]
    fn scale_maps_invert() {
        let sc = ScaleMap {
            k: 0.3,
            d: -1.2,
            m: -2.5,
            alpha: None,
        };
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1 - 2.0, (i as f64).sin())).collect();
        assert!(scale_roundtrip_error(&sc, &pts) < 1e-12);
    }

    #[test]
    fn p34_rejects_quarter() {
        let pl = pipeline("kdv/V4:p34", &ReductionParams::default()).unwrap();
        let sol = pl.solve((0.5, 1.0), 1e-10).unwrap();
        let w = &sol.stages["k2"];
        let fp34 = &pl.stage("fp34").unwrap().ode;
        assert!(matches!(p34_map(w, fp34, -0.25), Err(ReductionError::SingularGamma(_))));
    }

    #[test]
    fn constant_psi_lifts_to_offset() {
        let pl = pipeline("kdv/V3+aV1", &ReductionParams::default()).unwrap();
        let l = lift_exprs(&pl.map);
        let u = substitute(&l.u, &[("Psi", num(0.25))]);
        let want = p("t^beta/(a*beta) + 1/4");
        assert!(ZeroTest::default().with_fixed(pl.env()).is_zero(&(u - want)));
        let ux = substitute(&l.u_x, &[("Psi_1", Expr::zero())]);
        assert!(ux.is_zero() || ZeroTest::default().with_fixed(pl.env()).is_zero(&ux));
    }
}
