//! Reduced ODEs: representation, the conformable-to-classical change of
//! variable, adaptive integration with dense output, and residuals.
//!
//! A conformable ODE in `ω` whose derivatives are sequential `D^α_ω` becomes a
//! classical ODE in `s = ω^α/α`, because `D^α_ω = d/ds` on differentiable
//! functions. Integration always happens in the classical variable.
//!
//! Steps are taken by Dormand–Prince 5(4). At every accepted node the local
//! Taylor series of the solution is generated from the ODE itself, and the
//! dense output on the half-steps around a node is that series. Derivatives of
//! any order are available from the series, including those above the ODE's
//! order, which is what the PDE lifts need.

pub mod dopri;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{compile, diff, simplify, substitute, CompiledExpr, EvalEnv, Expr, ExprError, Node, Symbol};
use crate::jet::expr_text;

pub use dopri::{dopri5, Next, RunStats, StepControl};

/// Values above this count as blow-up.
pub const BLOW_UP: f64 = 1e8;
/// Degree of the local Taylor series.
pub const SERIES_DEGREE: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid span: s0 = {s0}, span = [{lo}, {hi}]")]
    InvalidSpan { s0: f64, lo: f64, hi: f64 },
    #[error("step size underflow at s = {at} (|y| = {value})")]
    StepUnderflow { at: f64, value: f64 },
    #[error("step limit reached at s = {at}")]
    MaxSteps { at: f64 },
    #[error("s = {s} lies outside the solution span [{lo}, {hi}]")]
    OutOfSpan { s: f64, lo: f64, hi: f64 },
    #[error("derivative of order {k} requested, dense output carries {have}")]
    MissingDerivative { k: usize, have: usize },
    #[error("cannot solve for the highest derivative: {0}")]
    NotSolvable(String),
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Eval(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OdeKind {
    #[serde(rename = "P_I")]
    PI,
    #[serde(rename = "FP_II")]
    FpII,
    #[serde(rename = "FP_34")]
    Fp34,
    K1,
    K2,
    #[serde(rename = "FRACTIONAL_RICCATI")]
    FractionalRiccati,
    #[serde(rename = "CLASSICAL_RICCATI")]
    ClassicalRiccati,
    #[serde(rename = "LINEAR_2ND_ORDER")]
    Linear2ndOrder,
    #[serde(rename = "REDUCED_RAW")]
    ReducedRaw,
}

/// `lhs = 0` for an unknown `Y` of one variable. `Y_k` denotes the `k`-th
/// derivative: classical when `fractional` is false, otherwise the
/// sequential conformable derivative of order `kα` in `var`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CanonicalOde {
    pub kind: OdeKind,
    pub order: usize,
    pub unknown: String,
    pub var: String,
    pub fractional: bool,
    #[serde(with = "expr_text")]
    pub lhs: Expr,
    /// Values for every parameter in `lhs` (`alpha`, `beta`, `gamma`, ...).
    pub params: EvalEnv,
}

impl CanonicalOde {
    pub fn new(kind: OdeKind, unknown: &str, var: &str, lhs: Expr, params: EvalEnv) -> Self {
        let lhs = simplify(&lhs);
        let order = lhs
            .free_symbols()
            .iter()
            .filter_map(|s| s.unknown_parts().filter(|(b, _)| *b == unknown).map(|(_, k)| k))
            .max()
            .unwrap_or(0);
        CanonicalOde {
            kind,
            order,
            unknown: unknown.to_string(),
            var: var.to_string(),
            fractional: false,
            lhs,
            params,
        }
    }

    pub fn fractional(mut self) -> Self {
        self.fractional = true;
        self
    }

    pub fn y(&self, k: usize) -> Symbol {
        Symbol::unknown(&self.unknown, k)
    }

    pub fn var_symbol(&self) -> Symbol {
        Symbol::new(&self.var).expect("alphabet variable")
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name)
    }

    /// Slots `[var, Y_0, .., Y_m]`.
    pub fn slots(&self, m: usize) -> Vec<Symbol> {
        let mut v = vec![self.var_symbol()];
        v.extend((0..=m).map(|k| self.y(k)));
        v
    }

    /// The highest derivative as a function of the lower ones.
    pub fn rhs(&self) -> Result<Expr, OdeError> {
        let h = self.y(self.order);
        let c = diff(&self.lhs, &h);
        if c.contains(&h) {
            return Err(OdeError::NotSolvable(format!("{h} enters nonlinearly")));
        }
        if c.is_zero() {
            return Err(OdeError::NotSolvable(format!("{h} does not occur")));
        }
        let rest = substitute(&self.lhs, &[(h.name(), Expr::zero())]);
        Ok(simplify(&(-(rest / c))))
    }

    pub fn compiled_lhs(&self) -> Result<CompiledExpr, OdeError> {
        Ok(compile(&self.lhs, &self.slots(self.order), &self.params)?)
    }
}

/// Rewrite a conformable ODE in the classical variable `s = var^α/α`.
/// Classical ODEs are returned unchanged.
pub fn s_substitute(ode: &CanonicalOde) -> CanonicalOde {
    if !ode.fractional {
        return ode.clone();
    }
    let inverse = (Expr::sym("alpha") * Expr::sym("s")).pow(Expr::sym("alpha").recip());
    let mut out = ode.clone();
    out.lhs = simplify(&substitute(&ode.lhs, &[(&ode.var, inverse)]));
    out.var = "s".into();
    out.fractional = false;
    out
}

/// Value of the classical variable at a point of the conformable one.
pub fn to_s(omega: f64, alpha: f64) -> f64 {
    omega.powf(alpha) / alpha
}

pub fn from_s(s: f64, alpha: f64) -> f64 {
    (alpha * s).powf(1.0 / alpha)
}

/// Local Taylor polynomial `Σ c_i (s - center)^i`, used on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl Segment {
    /// `k`-th derivative at `s`.
    pub fn eval(&self, s: f64, k: usize) -> Result<f64, OdeError> {
        let n = self.coeffs.len();
        if k >= n {
            return Err(OdeError::MissingDerivative { k, have: n.saturating_sub(1) });
        }
        let h = s - self.center;
        let mut acc = 0.0;
        for i in (k..n).rev() {
            acc = acc * h + self.coeffs[i] * falling(i, k);
        }
        Ok(acc)
    }

    /// Derivative orders this segment can deliver.
    pub fn max_derivative(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// `i (i-1) ... (i-k+1)`.
fn falling(i: usize, k: usize) -> f64 {
    ((i + 1 - k)..=i).map(|v| v as f64).product()
}

/// Dense numeric solution.
#[derive(Clone, Debug)]
pub struct OdeSolution {
    pub ode: CanonicalOde,
    pub ic: Vec<f64>,
    pub s0: f64,
    pub requested: (f64, f64),
    pub span: (f64, f64),
    pub tol: f64,
    pub blow_up: bool,
    /// Largest relative jump `|Δ|/(1+|y|)` of `Y_0..Y_{order-1}` at segment joints.
    pub max_joint_mismatch: f64,
    /// How the solution was obtained, e.g. `integrated` or `miura_forward`.
    pub origin: String,
    pub segments: Vec<Segment>,
}

/// Serializable summary of an [`OdeSolution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSolutionMeta {
    pub kind: OdeKind,
    pub lhs: String,
    pub var: String,
    pub params: EvalEnv,
    pub ic: Vec<f64>,
    pub s0: f64,
    pub requested: (f64, f64),
    pub span: (f64, f64),
    pub tol: f64,
    pub blow_up: bool,
    pub max_joint_mismatch: f64,
    pub origin: String,
    pub segments: usize,
}

impl OdeSolution {
    pub fn meta(&self) -> OdeSolutionMeta {
        OdeSolutionMeta {
            kind: self.ode.kind,
            lhs: self.ode.lhs.to_string(),
            var: self.ode.var.clone(),
            params: self.ode.params.clone(),
            ic: self.ic.clone(),
            s0: self.s0,
            requested: self.requested,
            span: self.span,
            tol: self.tol,
            blow_up: self.blow_up,
            max_joint_mismatch: self.max_joint_mismatch,
            origin: self.origin.clone(),
            segments: self.segments.len(),
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.span.0 && s <= self.span.1
    }

    fn segment(&self, s: f64) -> Result<&Segment, OdeError> {
        let slack = 1e-12 * (1.0 + s.abs());
        if !(s >= self.span.0 - slack && s <= self.span.1 + slack) {
            return Err(OdeError::OutOfSpan {
                s,
                lo: self.span.0,
                hi: self.span.1,
            });
        }
        let i = self.segments.partition_point(|seg| seg.hi < s);
        Ok(&self.segments[i.min(self.segments.len() - 1)])
    }

    /// `k`-th derivative of the unknown at `s`.
    pub fn eval(&self, s: f64, k: usize) -> Result<f64, OdeError> {
        self.segment(s)?.eval(s, k)
    }

    /// `Y_0..Y_m` at `s`.
    pub fn derivatives(&self, s: f64, m: usize) -> Result<Vec<f64>, OdeError> {
        let seg = self.segment(s)?;
        (0..=m).map(|k| seg.eval(s, k)).collect()
    }

    pub fn max_derivative(&self) -> usize {
        self.segments.iter().map(Segment::max_derivative).min().unwrap_or(0)
    }

    /// New solution `Z = expr(var, Y_0, .., Y_m)` on the same variable,
    /// computed segment by segment with series arithmetic.
    pub fn map(&self, expr: &Expr, target: CanonicalOde, origin: &str) -> Result<OdeSolution, OdeError> {
        let base = &self.ode.unknown;
        let m = expr
            .free_symbols()
            .iter()
            .filter_map(|s| s.unknown_parts().filter(|(b, _)| b == base).map(|(_, k)| k))
            .max()
            .unwrap_or(0);
        let f = compile(expr, &self.ode.slots(m), &self.ode.params.merged(&target.params))?;
        let mut segments = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let n = seg.coeffs.len();
            if n <= m {
                return Err(OdeError::MissingDerivative { k: m, have: n.saturating_sub(1) });
            }
            let len = n - m;
            let mut args = vec![var_series(seg.center, len)];
            for j in 0..=m {
                args.push((0..len).map(|i| seg.coeffs[i + j] * rising(i, j)).collect());
            }
            segments.push(Segment {
                center: seg.center,
                lo: seg.lo,
                hi: seg.hi,
                coeffs: f.eval_series(&args)?,
            });
        }
        let mut out = OdeSolution {
            ode: target,
            ic: self.ic.clone(),
            s0: self.s0,
            requested: self.requested,
            span: self.span,
            tol: self.tol,
            blow_up: self.blow_up,
            max_joint_mismatch: 0.0,
            origin: origin.to_string(),
            segments,
        };
        out.max_joint_mismatch = out.joint_mismatch();
        Ok(out)
    }

    /// Given this solution `Y_tgt(S_tgt)`, the solution
    /// `Y_src(S_src) = m · Y_tgt(c·S_src + d)`.
    pub fn rescale(&self, c: f64, d: f64, m: f64, target: CanonicalOde, origin: &str) -> OdeSolution {
        let to_src = |s: f64| (s - d) / c;
        let mut segments: Vec<Segment> = self
            .segments
            .iter()
            .map(|seg| {
                let (a, b) = (to_src(seg.lo), to_src(seg.hi));
                let mut ck = m;
                Segment {
                    center: to_src(seg.center),
                    lo: a.min(b),
                    hi: a.max(b),
                    coeffs: seg
                        .coeffs
                        .iter()
                        .map(|v| {
                            let r = v * ck;
                            ck *= c;
                            r
                        })
                        .collect(),
                }
            })
            .collect();
        if c < 0.0 {
            segments.reverse();
        }
        let (a, b) = (to_src(self.span.0), to_src(self.span.1));
        let (ra, rb) = (to_src(self.requested.0), to_src(self.requested.1));
        let mut out = OdeSolution {
            ode: target,
            ic: self.ic.clone(),
            s0: to_src(self.s0),
            requested: (ra.min(rb), ra.max(rb)),
            span: (a.min(b), a.max(b)),
            tol: self.tol,
            blow_up: self.blow_up,
            max_joint_mismatch: 0.0,
            origin: origin.to_string(),
            segments,
        };
        out.max_joint_mismatch = out.joint_mismatch();
        out
    }

    fn joint_mismatch(&self) -> f64 {
        let kmax = self.ode.order.max(1).min(self.max_derivative() + 1);
        let mut worst: f64 = 0.0;
        for w in self.segments.windows(2) {
            let b = w[0].hi;
            for k in 0..kmax {
                if let (Ok(l), Ok(r)) = (w[0].eval(b, k), w[1].eval(b, k)) {
                    worst = worst.max((l - r).abs() / (1.0 + l.abs()));
                }
            }
        }
        worst
    }
}

fn var_series(center: f64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[0] = center;
    if len > 1 {
        v[1] = 1.0;
    }
    v
}

/// `(i+1)(i+2)...(i+j)`.
fn rising(i: usize, j: usize) -> f64 {
    ((i + 1)..=(i + j)).map(|v| v as f64).product()
}

/// Taylor coefficients (degree `degree`) of the solution through `state` at
/// `s`, for `Y_n = F(s, Y_0..Y_{n-1})` with `F` compiled on `[s, Y_0..Y_{n-1}]`.
pub fn taylor_coefficients(
    f: &CompiledExpr,
    n: usize,
    s: f64,
    state: &[f64],
    degree: usize,
) -> Result<Vec<f64>, OdeError> {
    let mut c = vec![0.0; degree + 1];
    let mut fact = 1.0;
    for k in 0..n {
        if k > 0 {
            fact *= k as f64;
        }
        c[k] = state[k] / fact;
    }
    for m in 0..=(degree - n) {
        let len = m + 1;
        let mut args = vec![var_series(s, len)];
        for j in 0..n {
            args.push((0..len).map(|i| c[i + j] * rising(i, j)).collect());
        }
        let fm = f.eval_series(&args)?[m];
        c[m + n] = fm / rising(m, n);
    }
    Ok(c)
}

/// Convergence radius guess from the root test on the upper half of the
/// coefficients.
fn radius(c: &[f64]) -> f64 {
    let n = c.len() - 1;
    let mut r = f64::INFINITY;
    for (i, v) in c.iter().enumerate().skip(n / 2).filter(|(i, _)| *i > 0) {
        if *v != 0.0 {
            r = r.min(v.abs().powf(-1.0 / i as f64));
        }
    }
    r
}

struct PassNode {
    s: f64,
    coeffs: Vec<f64>,
}

fn integrate_pass(
    f: &CompiledExpr,
    n: usize,
    s0: f64,
    y0: &[f64],
    s1: f64,
    tol: f64,
) -> Result<(Vec<PassNode>, bool), OdeError> {
    let mut nodes = Vec::new();
    let mut blow_up = false;
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<(), OdeError> {
        dy[..n - 1].copy_from_slice(&y[1..n]);
        let mut args = Vec::with_capacity(n + 1);
        args.push(s);
        args.extend_from_slice(y);
        dy[n - 1] = f.eval(&args)?;
        Ok(())
    };
    let result = dopri5(rhs, s0, y0, s1, &StepControl::new(tol), |s, y| {
        if y.iter().any(|v| v.abs() > BLOW_UP) {
            blow_up = true;
            return Ok(Next::Stop);
        }
        let coeffs = taylor_coefficients(f, n, s, y, SERIES_DEGREE)?;
        let r = radius(&coeffs);
        nodes.push(PassNode { s, coeffs });
        Ok(Next::Continue(0.5 * r))
    });
    match result {
        Ok(_) => {}
        Err(OdeError::StepUnderflow { value, .. }) if value > 1e3 => blow_up = true,
        Err(OdeError::Eval(ExprError::Domain { .. })) if !nodes.is_empty() => blow_up = true,
        Err(e) => return Err(e),
    }
    Ok((nodes, blow_up))
}

/// Integrate a classical ODE from `s0` over `span` (both directions when
/// `s0` is interior). Blow-up truncates the span and sets the flag.
pub fn integrate_ivp(
    ode: &CanonicalOde,
    ic: &[f64],
    s0: f64,
    span: (f64, f64),
    tol: f64,
) -> Result<OdeSolution, OdeError> {
    if ode.fractional {
        return Err(OdeError::BadInput("apply s_substitute before integrating".into()));
    }
    let (lo, hi) = span;
    if !(lo <= s0 && s0 <= hi && lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(OdeError::InvalidSpan { s0, lo, hi });
    }
    let n = ode.order;
    if n == 0 {
        return Err(OdeError::BadInput("ODE has no derivative".into()));
    }
    if ic.len() != n {
        return Err(OdeError::BadInput(format!("{} initial values given, order is {n}", ic.len())));
    }
    if !(tol > 0.0) {
        return Err(OdeError::BadInput(format!("tolerance must be positive, got {tol}")));
    }
    let f = compile(&ode.rhs()?, &ode.slots(n - 1), &ode.params)?;
    let (fwd, fwd_blow) = if hi > s0 {
        integrate_pass(&f, n, s0, ic, hi, tol)?
    } else {
        let c = taylor_coefficients(&f, n, s0, ic, SERIES_DEGREE)?;
        (vec![PassNode { s: s0, coeffs: c }], false)
    };
    let (bwd, bwd_blow) = if lo < s0 {
        integrate_pass(&f, n, s0, ic, lo, tol)?
    } else {
        (Vec::new(), false)
    };
    let mut nodes: Vec<PassNode> = bwd.into_iter().skip(1).rev().collect();
    nodes.extend(fwd);
    let start = nodes.first().map(|p| p.s).unwrap_or(s0);
    let end = nodes.last().map(|p| p.s).unwrap_or(s0);
    let mut segments = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let a = if i == 0 { start } else { 0.5 * (nodes[i - 1].s + nodes[i].s) };
        let b = if i + 1 == nodes.len() { end } else { 0.5 * (nodes[i].s + nodes[i + 1].s) };
        segments.push(Segment {
            center: nodes[i].s,
            lo: a,
            hi: b,
            coeffs: std::mem::take(&mut nodes[i].coeffs),
        });
    }
    let mut sol = OdeSolution {
        ode: ode.clone(),
        ic: ic.to_vec(),
        s0,
        requested: span,
        span: (start, end),
        tol,
        blow_up: fwd_blow || bwd_blow,
        max_joint_mismatch: 0.0,
        origin: "integrated".into(),
        segments,
    };
    sol.max_joint_mismatch = sol.joint_mismatch();
    Ok(sol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeResidual {
    /// Largest `|lhs|`.
    pub max_abs: f64,
    /// Largest `|lhs| / (1 + Σ|terms|)`; meaningful near poles.
    pub max_scaled: f64,
    pub samples: usize,
    pub worst_at: f64,
}

/// `|lhs|` along the dense output at `samples` evenly spaced interior points.
pub fn residual_of_ode(ode: &CanonicalOde, sol: &OdeSolution, samples: usize) -> Result<OdeResidual, OdeError> {
    let (lo, hi) = sol.span;
    let points: Vec<f64> = (0..samples)
        .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / samples as f64)
        .collect();
    residual_at(ode, sol, &points)
}

pub fn residual_at(ode: &CanonicalOde, sol: &OdeSolution, points: &[f64]) -> Result<OdeResidual, OdeError> {
    let slots = ode.slots(ode.order);
    let terms: Vec<CompiledExpr> = match ode.lhs.node() {
        Node::Add(ts) => ts
            .iter()
            .map(|t| compile(t, &slots, &ode.params))
            .collect::<Result<_, _>>()?,
        _ => vec![compile(&ode.lhs, &slots, &ode.params)?],
    };
    let mut out = OdeResidual {
        max_abs: 0.0,
        max_scaled: 0.0,
        samples: points.len(),
        worst_at: f64::NAN,
    };
    let mut args = vec![0.0; slots.len()];
    for &s in points {
        args[0] = s;
        let d = sol.derivatives(s, ode.order)?;
        args[1..].copy_from_slice(&d);
        let mut total = 0.0;
        let mut size = 0.0;
        for t in &terms {
            let v = t.eval(&args)?;
            total += v;
            size += v.abs();
        }
        let r = total.abs();
        if r > out.max_abs || out.worst_at.is_nan() {
            out.worst_at = s;
        }
        out.max_abs = out.max_abs.max(r);
        out.max_scaled = out.max_scaled.max(r / (1.0 + size));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ode(kind: OdeKind, unknown: &str, var: &str, lhs: &str, params: EvalEnv) -> CanonicalOde {
        CanonicalOde::new(kind, unknown, var, parse(lhs).unwrap(), params)
    }

    fn fp2(gamma: f64, alpha: f64) -> CanonicalOde {
        ode(
            OdeKind::FpII,
            "Phi",
            "omega",
            "Phi_2 - 2*Phi^3 - omega^alpha/alpha*Phi - gamma",
            EvalEnv::new().with("gamma", gamma).with("alpha", alpha),
        )
        .fractional()
    }

    #[test]
    fn s_substitution_is_literal_for_fp2() {
        let c = s_substitute(&fp2(1.0, 0.7));
        assert_eq!(c.var, "s");
        let expect = simplify(&parse("Phi_2 - 2*Phi^3 - s*Phi - gamma").unwrap());
        assert_eq!(c.lhs, expect);
        let one = s_substitute(&fp2(1.0, 1.0));
        assert!(crate::expr::ZeroTest::default()
            .with_fixed(EvalEnv::new().with("alpha", 1.0))
            .is_zero(&(one.lhs - simplify(&parse("Phi_2 - 2*Phi^3 - s*Phi - gamma").unwrap()))));
    }

    #[test]
    fn cosine() {
        let o = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 + Phi", EvalEnv::new());
        let sol = integrate_ivp(&o, &[1.0, 0.0], 0.0, (0.0, 10.0), 1e-12).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let s = i as f64 * 0.01;
            worst = worst.max((sol.eval(s, 0).unwrap() - s.cos()).abs());
            worst = worst.max((sol.eval(s, 1).unwrap() + s.sin()).abs());
        }
        assert!(worst < 1e-9, "{worst}");
        assert!(sol.max_joint_mismatch < 1e-10);
    }

    #[test]
    fn zero_solution_stays_zero() {
        let o = s_substitute(&fp2(0.0, 0.7));
        let sol = integrate_ivp(&o, &[0.0, 0.0], 1e-3, (0.0, 3.0), 1e-10).unwrap();
        assert!(!sol.blow_up);
        assert_eq!(sol.span, (0.0, 3.0));
        assert_eq!(residual_of_ode(&o, &sol, 50).unwrap().max_abs, 0.0);
        assert_eq!(sol.eval(2.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn painleve_one_blows_up() {
        let o = ode(OdeKind::PI, "Phi", "z", "Phi_2 - 6*Phi^2 - z", EvalEnv::new());
        let sol = integrate_ivp(&o, &[0.0, 0.0], 0.0, (0.0, 10.0), 1e-10).unwrap();
        assert!(sol.blow_up);
        assert!(sol.span.1 < 10.0);
        let r = residual_of_ode(&o, &sol, 200).unwrap();
        assert!(r.max_scaled < 1e-8, "{r:?}");
    }

    #[test]
    fn two_sided_integration() {
        let o = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 - Phi", EvalEnv::new());
        let sol = integrate_ivp(&o, &[1.0, 1.0], 0.5, (-1.0, 2.0), 1e-12).unwrap();
        for s in [-1.0, -0.3, 0.5, 1.7, 2.0] {
            let exact = (s - 0.5f64).exp();
            assert!((sol.eval(s, 0).unwrap() - exact).abs() < 1e-9 * exact);
            assert!((sol.eval(s, 3).unwrap() - exact).abs() < 1e-8 * exact);
        }
        assert!(matches!(sol.eval(2.5, 0), Err(OdeError::OutOfSpan { .. })));
    }

    #[test]
    fn derivative_matches_differentiated_interpolant() {
        let o = s_substitute(&fp2(1.0, 0.7));
        let sol = integrate_ivp(&o, &[0.1, 0.0], 1e-3, (1e-3, 1.0), 1e-12).unwrap();
        let h = 1e-5;
        for i in 1..20 {
            let s = 0.05 * i as f64;
            let fd = (sol.eval(s + h, 0).unwrap() - sol.eval(s - h, 0).unwrap()) / (2.0 * h);
            assert!((fd - sol.eval(s, 1).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_pair_is_detected() {
        let o = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 + Phi", EvalEnv::new());
        let other = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 - Phi", EvalEnv::new());
        let sol = integrate_ivp(&o, &[1.0, 0.0], 0.0, (0.0, 3.0), 1e-10).unwrap();
        assert!(residual_of_ode(&other, &sol, 30).unwrap().max_abs > 1e-2);
    }

    #[test]
    fn rescale_inverts() {
        let o = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 + Phi", EvalEnv::new());
        let sol = integrate_ivp(&o, &[1.0, 0.0], 0.0, (0.0, 3.0), 1e-12).unwrap();
        // Y(S) = 2 cos(-0.5 S + 1)
        let r = sol.rescale(-0.5, 1.0, 2.0, o.clone(), "scaled");
        for s in [-3.0, -1.0, 0.0, 1.5, 2.0] {
            let v = r.eval(s, 0).unwrap();
            assert!((v - 2.0 * (1.0 - 0.5 * s).cos()).abs() < 1e-9);
            let d = r.eval(s, 1).unwrap();
            assert!((d - (1.0 - 0.5 * s).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn map_through_expression() {
        let o = ode(OdeKind::Linear2ndOrder, "Phi", "s", "Phi_2 + Phi", EvalEnv::new());
        let sol = integrate_ivp(&o, &[1.0, 0.0], 0.0, (0.0, 1.0), 1e-12).unwrap();
        let w = ode(OdeKind::ReducedRaw, "W", "s", "W_1 - 1", EvalEnv::new());
        let m = sol.map(&parse("Phi^2 + Phi_1^2").unwrap(), w, "norm").unwrap();
        for s in [0.1, 0.5, 0.9] {
            assert!((m.eval(s, 0).unwrap() - 1.0).abs() < 1e-10);
            assert!(m.eval(s, 1).unwrap().abs() < 1e-9);
        }
    }
}
