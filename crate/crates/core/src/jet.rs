//! Jet space: total derivatives, vector fields, classical and conformable
//! prolongations, and the infinitesimal symmetry criterion.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equation::EquationSpec;
use crate::expr::{compile, diff, parse, simplify, CompiledExpr, EvalEnv, Expr, ExprError, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    X,
    T,
}

impl Dir {
    fn var(self) -> Symbol {
        Symbol::new(match self {
            Dir::X => "x",
            Dir::T => "t",
        })
        .unwrap()
    }
}

/// Total derivative: `D_x E = ∂_x E + Σ_J ∂E/∂u_J · u_{J+x}`, the sum running
/// over the jet coordinates (including `u`) that occur in `E`.
pub fn total_derivative(e: &Expr, dir: Dir) -> Expr {
    let mut terms = vec![diff(e, &dir.var())];
    for s in e.free_symbols() {
        if let Some((nx, nt)) = s.jet_orders() {
            let next = match dir {
                Dir::X => Symbol::jet(nx + 1, nt),
                Dir::T => Symbol::jet(nx, nt + 1),
            };
            terms.push(diff(e, &s) * Expr::symbol(&next));
        }
    }
    Expr::sum(terms)
}

/// `ξ ∂_x + τ ∂_t + η ∂_u`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorField {
    #[serde(with = "expr_text")]
    pub xi: Expr,
    #[serde(with = "expr_text")]
    pub tau: Expr,
    #[serde(with = "expr_text")]
    pub eta: Expr,
    pub label: String,
}

pub(crate) mod expr_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::expr::{parse, Expr};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&e.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

impl VectorField {
    pub fn new(label: &str, xi: Expr, tau: Expr, eta: Expr) -> Self {
        VectorField {
            xi: simplify(&xi),
            tau: simplify(&tau),
            eta: simplify(&eta),
            label: label.to_string(),
        }
    }

    /// Parse the three coefficients from text.
    pub fn parse(label: &str, xi: &str, tau: &str, eta: &str) -> Result<Self, ExprError> {
        Ok(VectorField::new(label, parse(xi)?, parse(tau)?, parse(eta)?))
    }

    pub fn zero(label: &str) -> Self {
        VectorField::new(label, Expr::zero(), Expr::zero(), Expr::zero())
    }

    /// Action on a function of `(t, x, u)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        let x = Symbol::new("x").unwrap();
        let t = Symbol::new("t").unwrap();
        let u = Symbol::jet(0, 0);
        simplify(&(&self.xi * diff(f, &x) + &self.tau * diff(f, &t) + &self.eta * diff(f, &u)))
    }

    pub fn scale(&self, c: &Expr) -> VectorField {
        VectorField::new(&self.label, c * &self.xi, c * &self.tau, c * &self.eta)
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            &self.label,
            &self.xi + &other.xi,
            &self.tau + &other.tau,
            &self.eta + &other.eta,
        )
    }

    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> VectorField {
        VectorField::new(
            &self.label,
            self.xi.substitute(bindings),
            self.tau.substitute(bindings),
            self.eta.substitute(bindings),
        )
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn coefficients(&self) -> [&Expr; 3] {
        [&self.xi, &self.tau, &self.eta]
    }

    /// Point symmetries may not depend on derivatives.
    pub fn is_point_field(&self) -> bool {
        self.coefficients().iter().all(|c| {
            c.free_symbols()
                .iter()
                .all(|s| !matches!(s.jet_orders(), Some((nx, nt)) if nx + nt > 0))
        })
    }
}

/// Prolongation coefficients for `u_t`, `u_x`, `u_xx`, `u_xxx`.
#[derive(Clone, Debug)]
pub struct Prolongation {
    pub t: Expr,
    pub x: Expr,
    pub xx: Expr,
    pub xxx: Expr,
}

impl Prolongation {
    /// Coefficient of the `n`-th x-derivative (`n = 0` is `η` itself, which
    /// the caller supplies).
    pub fn x_order(&self, n: usize) -> &Expr {
        match n {
            1 => &self.x,
            2 => &self.xx,
            3 => &self.xxx,
            _ => panic!("prolongation order {n} not available"),
        }
    }
}

fn jet(nx: usize, nt: usize) -> Expr {
    Expr::symbol(&Symbol::jet(nx, nt))
}

/// Classical prolongation up to third order in x and first in t.
pub fn classical_prolongation(v: &VectorField) -> Prolongation {
    let dxi_x = total_derivative(&v.xi, Dir::X);
    let dtau_x = total_derivative(&v.tau, Dir::X);
    let eta_t = total_derivative(&v.eta, Dir::T)
        - jet(1, 0) * total_derivative(&v.xi, Dir::T)
        - jet(0, 1) * total_derivative(&v.tau, Dir::T);
    let eta_x = total_derivative(&v.eta, Dir::X) - jet(1, 0) * &dxi_x - jet(0, 1) * &dtau_x;
    let eta_xx = total_derivative(&eta_x, Dir::X) - jet(2, 0) * &dxi_x - jet(1, 1) * &dtau_x;
    let eta_xxx = total_derivative(&eta_xx, Dir::X) - jet(3, 0) * &dxi_x - jet(2, 1) * &dtau_x;
    Prolongation {
        t: simplify(&eta_t),
        x: simplify(&eta_x),
        xx: simplify(&eta_xx),
        xxx: simplify(&eta_xxx),
    }
}

fn p(text: &str) -> Expr {
    parse(text).expect("built-in expression")
}

/// Conformable prolongation coefficients with symbolic `alpha`, `beta`,
/// written out term by term on top of the classical ones.
pub fn fractional_prolongation(v: &VectorField) -> Prolongation {
    let c = classical_prolongation(v);
    let (xi, tau) = (&v.xi, &v.tau);
    let t = &c.t;
    let x1 = &c.x;
    let x2 = &c.xx;
    let x3 = &c.xxx;
    let eta_t = p("t^(1-beta)") * t + p("(1-beta)*t^(-beta)*u_t") * tau;
    let eta_x = p("x^(1-alpha)") * x1 + p("(1-alpha)*x^(-alpha)*u_x") * xi;
    let eta_xx = p("x^(2-2*alpha)") * x2
        + p("(1-alpha)*x^(1-2*alpha)") * x1
        + p("(2-2*alpha)*x^(1-2*alpha)*u_xx") * xi
        + p("(1-alpha)*(1-2*alpha)*x^(-2*alpha)*u_x") * xi;
    let eta_xxx = p("x^(3-3*alpha)") * x3
        + p("(3-3*alpha)*x^(2-3*alpha)") * x2
        + p("(1-alpha)*(1-2*alpha)*x^(1-3*alpha)") * x1
        + p("(3-3*alpha)*x^(2-3*alpha)*u_xxx") * xi
        + p("(3-3*alpha)*(2-3*alpha)*x^(1-3*alpha)*u_xx") * xi
        + p("(1-alpha)*(1-2*alpha)*(1-3*alpha)*x^(-3*alpha)*u_x") * xi;
    Prolongation {
        t: simplify(&eta_t),
        x: simplify(&eta_x),
        xx: simplify(&eta_xx),
        xxx: simplify(&eta_xxx),
    }
}

/// The same coefficients built recursively: with `Q_0 = u` and
/// `Q_{k+1} = x^{1-α} D_x Q_k`,
/// `pr V(Q_{k+1}) = (1-α) x^{-α} ξ D_x Q_k + x^{1-α} (D_x pr V(Q_k) - D_x ξ · D_x Q_k - D_x τ · D_t Q_k)`.
pub fn recursive_fractional_prolongation(v: &VectorField) -> Prolongation {
    let scale = p("x^(1-alpha)");
    let dscale = p("(1-alpha)*x^(-alpha)");
    let dxi = total_derivative(&v.xi, Dir::X);
    let dtau = total_derivative(&v.tau, Dir::X);
    let mut q = jet(0, 0);
    let mut pq = v.eta.clone();
    let mut out = Vec::new();
    for _ in 0..3 {
        let dq = total_derivative(&q, Dir::X);
        let next_pq = &dscale * &v.xi * &dq
            + &scale
                * (total_derivative(&pq, Dir::X) - &dxi * &dq - &dtau * total_derivative(&q, Dir::T));
        q = simplify(&(&scale * dq));
        pq = simplify(&next_pq);
        out.push(pq.clone());
    }
    let c = classical_prolongation(v);
    let eta_t = p("t^(1-beta)") * &c.t + p("(1-beta)*t^(-beta)*u_t") * &v.tau;
    let mut it = out.into_iter();
    Prolongation {
        t: simplify(&eta_t),
        x: it.next().unwrap(),
        xx: it.next().unwrap(),
        xxx: it.next().unwrap(),
    }
}

/// `pr V(Δ)` for the equation, built from the given prolongation, before
/// restricting to solutions.
pub fn prolonged_equation(spec: &EquationSpec, v: &VectorField, pr: &Prolongation) -> Expr {
    let s = spec.shape();
    let u = jet(0, 0);
    let q1 = p("x^(1-alpha)*u_x");
    let k = s.power;
    let nonlinear_u = if k == 1 {
        Expr::one()
    } else {
        Expr::int(k) * u.powi(k - 1)
    };
    simplify(
        &(&pr.t
            + &s.coef * nonlinear_u * &v.eta * q1
            + &s.coef * u.powi(k) * &pr.x
            + &s.disp * pr.x_order(s.order)),
    )
}

/// Restrict a jet-space expression to solutions by eliminating the highest
/// x-derivative and, if present, its t-derivative.
pub fn on_shell(spec: &EquationSpec, e: &Expr) -> Expr {
    let h = spec.highest();
    let solved = spec.solved_highest();
    let (nx, _) = h.jet_orders().unwrap();
    let ht = Symbol::jet(nx, 1);
    let mut e = e.clone();
    if e.contains(&ht) {
        let solved_t = total_derivative(&solved, Dir::T);
        e = e.substitute(&[(ht, solved_t)].into_iter().collect());
    }
    simplify(&e.substitute(&[(h, solved)].into_iter().collect()))
}

/// Which route to the conformable prolongation to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProlongationRoute {
    #[default]
    Printed,
    Recursive,
}

/// The symmetry criterion restricted to solutions, as a symbolic expression.
pub fn criterion_expr(spec: &EquationSpec, v: &VectorField, route: ProlongationRoute) -> Expr {
    let pr = match route {
        ProlongationRoute::Printed => fractional_prolongation(v),
        ProlongationRoute::Recursive => recursive_fractional_prolongation(v),
    };
    on_shell(spec, &prolonged_equation(spec, v, &pr))
}

/// A point of the truncated jet space. Coordinates are independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub t: f64,
    pub x: f64,
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xxx: f64,
    pub u_xt: f64,
    pub u_xxt: f64,
}

pub const JET_SEED: u64 = 0xC0FFEE;

impl JetPoint {
    pub fn env(&self) -> EvalEnv {
        EvalEnv::new()
            .with("t", self.t)
            .with("x", self.x)
            .with("u", self.u)
            .with("u_t", self.u_t)
            .with("u_x", self.u_x)
            .with("u_xx", self.u_xx)
            .with("u_xxx", self.u_xxx)
            .with("u_xt", self.u_xt)
            .with("u_xxt", self.u_xxt)
    }

    /// `t, x ∈ [0.3, 2.5]`, everything else in `[-2, 2]`.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut pos = || rng.gen_range(0.3..2.5);
        let (t, x) = (pos(), pos());
        let mut j = || rng.gen_range(-2.0..2.0);
        JetPoint {
            t,
            x,
            u: j(),
            u_t: j(),
            u_x: j(),
            u_xx: j(),
            u_xxx: j(),
            u_xt: j(),
            u_xxt: j(),
        }
    }

    pub fn sample(n: usize, seed: u64) -> Vec<JetPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| JetPoint::random(&mut rng)).collect()
    }
}

/// Compiled jet-space function. Jet symbols beyond those stored in a
/// [`JetPoint`] receive independent seeded random values.
pub struct JetFunction {
    compiled: CompiledExpr,
    extra: usize,
}

const POINT_SLOTS: [&str; 9] = ["t", "x", "u", "u_t", "u_x", "u_xx", "u_xxx", "u_xt", "u_xxt"];

impl JetFunction {
    pub fn new(e: &Expr, fixed: &EvalEnv) -> Result<Self, ExprError> {
        let mut slots: Vec<Symbol> = POINT_SLOTS.iter().map(|n| Symbol::new(n).unwrap()).collect();
        let known: BTreeSet<Symbol> = slots.iter().cloned().collect();
        let extra: Vec<Symbol> = e
            .free_symbols()
            .into_iter()
            .filter(|s| s.jet_orders().is_some() && !known.contains(s))
            .collect();
        let n_extra = extra.len();
        slots.extend(extra);
        Ok(JetFunction {
            compiled: compile(e, &slots, fixed)?,
            extra: n_extra,
        })
    }

    pub fn eval(&self, p: &JetPoint, index: usize) -> Result<f64, ExprError> {
        let mut args = vec![p.t, p.x, p.u, p.u_t, p.u_x, p.u_xx, p.u_xxx, p.u_xt, p.u_xxt];
        if self.extra > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(JET_SEED ^ (index as u64).wrapping_mul(0x9E37_79B9));
            args.extend((0..self.extra).map(|_| rng.gen_range(-2.0..2.0)));
        }
        self.compiled.eval(&args)
    }
}

/// The criterion at a single point. `params` binds `alpha`, `beta` and any
/// equation or family constants.
pub fn criterion_residual(
    spec: &EquationSpec,
    v: &VectorField,
    point: &JetPoint,
    params: &EvalEnv,
) -> Result<f64, ExprError> {
    criterion_residuals(spec, v, std::slice::from_ref(point), params, ProlongationRoute::Printed)
        .map(|r| r[0])
}

pub fn criterion_residuals(
    spec: &EquationSpec,
    v: &VectorField,
    points: &[JetPoint],
    params: &EvalEnv,
    route: ProlongationRoute,
) -> Result<Vec<f64>, ExprError> {
    let e = criterion_expr(spec, v, route);
    let f = JetFunction::new(&e, &spec.env().merged(params))?;
    points.iter().enumerate().map(|(i, p)| f.eval(p, i)).collect()
}

/// Largest difference between the printed and recursive conformable
/// prolongation coefficients over the given points.
pub fn prolongation_route_discrepancy(
    v: &VectorField,
    points: &[JetPoint],
    params: &EvalEnv,
) -> Result<f64, ExprError> {
    let a = fractional_prolongation(v);
    let b = recursive_fractional_prolongation(v);
    let mut worst: f64 = 0.0;
    for (ea, eb) in [(&a.t, &b.t), (&a.x, &b.x), (&a.xx, &b.xx), (&a.xxx, &b.xxx)] {
        let f = JetFunction::new(&(ea - eb), params)?;
        for (i, p) in points.iter().enumerate() {
            worst = worst.max(f.eval(p, i)?.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::EquationId;

    fn params(alpha: f64, beta: f64) -> EvalEnv {
        EvalEnv::new().with("alpha", alpha).with("beta", beta)
    }

    #[test]
    fn total_derivative_of_jet_monomial() {
        let e = p("x*u*u_x");
        let d = total_derivative(&e, Dir::X);
        let expect = p("u*u_x + x*u_x^2 + x*u*u_xx");
        assert!(crate::expr::ZeroTest::default().is_zero(&(d - expect)));
        assert_eq!(total_derivative(&p("u_xt"), Dir::T).to_string(), "u_xtt");
    }

    #[test]
    fn vertical_translation_has_trivial_prolongation() {
        let v = VectorField::parse("du", "0", "0", "1").unwrap();
        let pr = classical_prolongation(&v);
        assert!(pr.x.is_zero() && pr.xx.is_zero() && pr.xxx.is_zero() && pr.t.is_zero());
    }

    #[test]
    fn x_scaling_first_prolongation() {
        let v = VectorField::parse("xdx", "x", "0", "0").unwrap();
        assert_eq!(classical_prolongation(&v).x, simplify(&p("-u_x")));
    }

    #[test]
    fn conformable_translation_has_zero_eta_x() {
        let v = VectorField::parse("V2", "x^(1-alpha)", "0", "0").unwrap();
        assert!(crate::expr::ZeroTest::default().is_zero(&fractional_prolongation(&v).x));
    }

    #[test]
    fn classical_limit_collapses() {
        let v = VectorField::parse("g", "x*t + u", "t^2*x", "u*x - t").unwrap();
        let c = classical_prolongation(&v);
        let f = fractional_prolongation(&v);
        let one = EvalEnv::new().with("alpha", 1.0).with("beta", 1.0);
        let z = crate::expr::ZeroTest::default().with_fixed(one);
        for (a, b) in [(&c.t, &f.t), (&c.x, &f.x), (&c.xx, &f.xx), (&c.xxx, &f.xxx)] {
            assert!(z.is_zero(&(a - b)));
        }
    }

    #[test]
    fn printed_and_recursive_routes_agree() {
        let v = VectorField::parse("g", "x*t^2 + u*x", "t*x + u", "u^2*x + t").unwrap();
        let pts = JetPoint::sample(100, JET_SEED);
        let d = prolongation_route_discrepancy(&v, &pts, &params(0.7, 0.6)).unwrap();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn kdv_translation_criterion() {
        let spec = EquationSpec::new(EquationId::Kdv, 0.7, 0.6);
        let v3 = VectorField::parse("V3", "6*t^beta*x^(1-alpha)/beta", "0", "1").unwrap();
        let bogus = VectorField::parse("bogus", "x", "0", "0").unwrap();
        let pts = JetPoint::sample(20, JET_SEED);
        let r = criterion_residuals(&spec, &v3, &pts, &EvalEnv::new(), ProlongationRoute::Printed).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
        let r = criterion_residual(&spec, &bogus, &pts[0], &EvalEnv::new()).unwrap();
        assert!(r.abs() > 1e-3);
    }

    /// Jet transport oracle: the third prolongation of a scaling field equals
    /// the ε-derivative of the transformed third derivative.
    #[test]
    fn xxx_coefficient_matches_transported_jet() {
        // x ↦ x e^{aε}, t ↦ t e^{bε}, u ↦ u e^{cε}: u_xxx scales by e^{(c-3a)ε}
        let (a, b, c) = (-0.5 / 0.7, -1.5 / 0.6, 1.0);
        let v = VectorField::new("s", p("x") * Expr::num(rat(a)), p("t") * Expr::num(rat(b)), p("u"));
        let pr = classical_prolongation(&v);
        let pts = JetPoint::sample(10, 7);
        for pt in pts {
            let got = crate::expr::eval(&pr.xxx, &pt.env()).unwrap();
            let h = 1e-5;
            let moved = |e: f64| pt.u_xxx * ((c - 3.0 * a) * e).exp();
            let fd = (moved(h) - moved(-h)) / (2.0 * h);
            assert!((got - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    fn rat(v: f64) -> crate::expr::Rational {
        crate::expr::Rational::from_float(v).unwrap()
    }
}
