//! Symmetry algebras of the four equations: generator families, basis fields,
//! brackets, structure constants and flows.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equation::{EquationId, EquationSpec};
use crate::expr::{compile, parse, simplify, EvalEnv, Expr, ExprError, Rational, Symbol, ZeroTest};
use crate::jet::{criterion_residuals, JetPoint, ProlongationRoute, VectorField};
use crate::ode::{dopri5, Next, OdeError, StepControl};

#[derive(Debug, Error)]
pub enum SymmetryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("bracket [{0}, {1}] is not in the span of the basis (least-squares residual {2:.3e})")]
    NotClosed(String, String, f64),
    #[error("flow leaves t > 0, x > 0 at ε = {0}")]
    LeftDomain(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// The solved generator with free constants `c1..`, and the basis it spans.
#[derive(Clone, Debug)]
pub struct SymmetryFamily {
    pub id: EquationId,
    pub field: VectorField,
    pub constants: usize,
    pub basis: Vec<VectorField>,
    /// `c_i = 1` (others zero) gives `sign · basis[index]`.
    pub unit_map: Vec<(usize, i64)>,
}

fn field(label: &str, xi: &str, tau: &str, eta: &str) -> VectorField {
    VectorField::parse(label, xi, tau, eta).expect("built-in field")
}

pub fn family(id: EquationId) -> SymmetryFamily {
    let v1 = field("V1", "0", "t^(1-beta)", "0");
    let v2 = field("V2", "x^(1-alpha)", "0", "0");
    match id {
        EquationId::Kdv => SymmetryFamily {
            id,
            field: field(
                "kdv",
                "-c1*x/(2*alpha) + 6*c3*t^beta*x^(1-alpha)/beta + c4*x^(1-alpha)",
                "-3*c1*t/(2*beta) + c2*t^(1-beta)",
                "c1*u + c3",
            ),
            constants: 4,
            basis: vec![
                v1,
                v2,
                field("V3", "6*t^beta*x^(1-alpha)/beta", "0", "1"),
                field("V4", "-x/(2*alpha)", "-3*t/(2*beta)", "u"),
            ],
            unit_map: vec![(3, 1), (0, 1), (2, 1), (1, 1)],
        },
        EquationId::Mkdv => SymmetryFamily {
            id,
            field: field("mkdv", "-c1*x/alpha + c3*x^(1-alpha)", "-3*c1*t/beta + c2*t^(1-beta)", "c1*u"),
            constants: 3,
            basis: vec![v1, v2, field("V3", "x/alpha", "3*t/beta", "-u")],
            unit_map: vec![(2, -1), (0, 1), (1, 1)],
        },
        EquationId::Burgers => SymmetryFamily {
            id,
            field: field(
                "burgers",
                "c1*x*t^beta/(alpha*beta) - c2*x/alpha + a*c3*t^beta*x^(1-alpha)/beta + c5*x^(1-alpha)",
                "c1*t^(1+beta)/beta^2 - 2*c2*t/beta + c4*t^(1-beta)",
                "(-c1*t^beta/beta + c2)*u + c1*x^alpha/(a*alpha) + c3",
            ),
            constants: 5,
            basis: vec![
                v1,
                v2,
                field("V3", "a*t^beta*x^(1-alpha)/beta", "0", "1"),
                field("V4", "-x/alpha", "-2*t/beta", "u"),
                field(
                    "V5",
                    "x*t^beta/(alpha*beta)",
                    "t^(1+beta)/beta^2",
                    "-t^beta*u/beta + x^alpha/(a*alpha)",
                ),
            ],
            unit_map: vec![(4, 1), (3, 1), (2, 1), (0, 1), (1, 1)],
        },
        EquationId::Mburgers => SymmetryFamily {
            id,
            field: field("mburgers", "-2*c1*x/alpha + c3*x^(1-alpha)", "-4*c1*t/beta + c2*t^(1-beta)", "c1*u"),
            constants: 3,
            basis: vec![v1, v2, field("V3", "2*x/alpha", "4*t/beta", "-u")],
            unit_map: vec![(2, -1), (0, 1), (1, 1)],
        },
    }
}

impl SymmetryFamily {
    /// The family with `c_i` replaced by the given values.
    pub fn specialize(&self, c: &[f64]) -> VectorField {
        let bindings: BTreeMap<Symbol, Expr> = c
            .iter()
            .enumerate()
            .map(|(i, v)| {
                (
                    Symbol::new(&format!("c{}", i + 1)).unwrap(),
                    Expr::num(Rational::from_float(*v).expect("finite constant")),
                )
            })
            .collect();
        self.field.substitute(&bindings)
    }

    pub fn unit(&self, i: usize) -> VectorField {
        let c: Vec<f64> = (0..self.constants).map(|j| if j == i { 1.0 } else { 0.0 }).collect();
        self.specialize(&c)
    }

    /// Fields that are not symmetries; their criterion must not vanish.
    pub fn negative_controls(&self) -> Vec<VectorField> {
        let perturbed = match self.id {
            EquationId::Kdv => field("V4_wrong_tau", "-x/(2*alpha)", "-t/beta", "u"),
            EquationId::Mkdv => field("V3_wrong_tau", "x/alpha", "2*t/beta", "-u"),
            EquationId::Burgers => field("V5_no_shift", "x*t^beta/(alpha*beta)", "t^(1+beta)/beta^2", "-t^beta*u/beta"),
            EquationId::Mburgers => field("V3_wrong_tau", "2*x/alpha", "3*t/beta", "-u"),
        };
        vec![field("x_dx", "x", "0", "0"), perturbed]
    }
}

/// `[V, W]` with coefficients `V(W.c) - W(V.c)`.
pub fn commutator(v: &VectorField, w: &VectorField) -> VectorField {
    VectorField::new(
        &format!("[{},{}]", v.label, w.label),
        v.apply(&w.xi) - w.apply(&v.xi),
        v.apply(&w.tau) - w.apply(&v.tau),
        v.apply(&w.eta) - w.apply(&v.eta),
    )
}

/// `Σ c_k V_k`.
pub fn combination(coeffs: &[Expr], basis: &[VectorField], label: &str) -> VectorField {
    let mut acc = VectorField::zero(label);
    for (c, v) in coeffs.iter().zip(basis) {
        if !c.is_zero() {
            acc = acc.add(&v.scale(c));
        }
    }
    acc.with_label(label)
}

/// Whether two fields agree under the zero test.
pub fn fields_equal(v: &VectorField, w: &VectorField, z: &ZeroTest) -> Result<bool, ExprError> {
    for (a, b) in v.coefficients().into_iter().zip(w.coefficients()) {
        if !z.check(&(a - b))?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Continued-fraction approximation with denominator at most `max_den`.
pub fn rationalize(v: f64, max_den: i64, tol: f64) -> Option<Rational> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if (p1 as f64 / q1 as f64 - v).abs() < tol {
            return Some(Rational::new(BigInt::from(p1), BigInt::from(q1)));
        }
        let frac = x - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}

/// Structure constants `[V_i, V_j] = Σ_k C[i][j][k] V_k` at fixed parameter
/// values.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StructureTable {
    pub labels: Vec<String>,
    /// `constants[i][j][k]`.
    pub constants: Vec<Vec<Vec<f64>>>,
    /// Bracket text as `Σ c_k V_k`, `0` for commuting pairs.
    pub brackets: Vec<Vec<String>>,
    pub params: EvalEnv,
}

impl StructureTable {
    pub fn is_antisymmetric(&self) -> bool {
        let n = self.labels.len();
        (0..n).all(|i| {
            (0..n).all(|j| {
                (0..n).all(|k| (self.constants[i][j][k] + self.constants[j][i][k]).abs() < 1e-12)
            })
        })
    }
}

/// Sample points for fitting brackets: `t, x ∈ [0.3, 2.5]`, `u ∈ [-2, 2]`.
fn fit_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.gen_range(0.3..2.5), rng.gen_range(0.3..2.5), rng.gen_range(-2.0..2.0)])
        .collect()
}

fn field_values(v: &VectorField, params: &EvalEnv, pts: &[[f64; 3]]) -> Result<Vec<f64>, ExprError> {
    let slots = [Symbol::new("t").unwrap(), Symbol::new("x").unwrap(), Symbol::jet(0, 0)];
    let mut out = Vec::with_capacity(3 * pts.len());
    for c in v.coefficients() {
        let f = compile(c, &slots, params)?;
        for p in pts {
            out.push(f.eval(p)?);
        }
    }
    Ok(out)
}

/// Express each bracket in the basis by least squares at sample points, round
/// the coefficients to small rationals, and confirm with the zero test.
pub fn structure_constants(
    basis: &[VectorField],
    params: &EvalEnv,
    seed: u64,
) -> Result<StructureTable, SymmetryError> {
    let n = basis.len();
    let pts = fit_points(24, seed);
    let cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|v| field_values(v, params, &pts))
        .collect::<Result<_, _>>()?;
    let rows = cols[0].len();
    let a = DMatrix::from_fn(rows, n, |r, c| cols[c][r]);
    let svd = a.clone().svd(true, true);
    let z = ZeroTest {
        seed,
        ..ZeroTest::default()
    }
    .with_fixed(params.clone());
    let mut constants = vec![vec![vec![0.0; n]; n]; n];
    let mut brackets = vec![vec![String::from("0"); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let br = commutator(&basis[i], &basis[j]);
            let b = DVector::from_vec(field_values(&br, params, &pts)?);
            let sol = svd.solve(&b, 1e-12).expect("SVD with both factors");
            let resid = (&a * &sol - &b).norm() / (1.0 + b.norm());
            if resid > 1e-8 {
                return Err(SymmetryError::NotClosed(basis[i].label.clone(), basis[j].label.clone(), resid));
            }
            let mut exact = Vec::with_capacity(n);
            for k in 0..n {
                let r = rationalize(sol[k], 10_000, 1e-9).unwrap_or_else(|| {
                    Rational::from_float(sol[k]).expect("finite least-squares solution")
                });
                exact.push(r);
            }
            let coeffs: Vec<Expr> = exact.iter().cloned().map(Expr::num).collect();
            let comb = combination(&coeffs, basis, "fit");
            if !fields_equal(&br, &comb, &z)? {
                return Err(SymmetryError::NotClosed(basis[i].label.clone(), basis[j].label.clone(), resid));
            }
            for k in 0..n {
                let v = exact[k].to_f64().unwrap_or(f64::NAN);
                constants[i][j][k] = v;
                constants[j][i][k] = -v;
            }
            brackets[i][j] = format_combination(&exact, basis, false);
            brackets[j][i] = format_combination(&exact, basis, true);
        }
    }
    Ok(StructureTable {
        labels: basis.iter().map(|v| v.label.clone()).collect(),
        constants,
        brackets,
        params: params.clone(),
    })
}

fn format_combination(c: &[Rational], basis: &[VectorField], negate: bool) -> String {
    let mut out = String::new();
    for (r, v) in c.iter().zip(basis) {
        if num_traits::Zero::is_zero(r) {
            continue;
        }
        let r = if negate { -r.clone() } else { r.clone() };
        let neg = num_traits::Signed::is_negative(&r);
        let mag = num_traits::Signed::abs(&r);
        match (out.is_empty(), neg) {
            (true, true) => out.push('-'),
            (false, true) => out.push_str(" - "),
            (false, false) => out.push_str(" + "),
            (true, false) => {}
        }
        if !num_traits::One::is_one(&mag) {
            out.push_str(&format!("{mag}*"));
        }
        out.push_str(&v.label);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// A bracket as printed: `[V_i, V_j] = Σ coeff · V_k`, coefficients may
/// depend on equation parameters.
#[derive(Clone, Debug)]
pub struct ExpectedBracket {
    pub i: usize,
    pub j: usize,
    pub rhs: Vec<(usize, Expr)>,
}

fn br(i: usize, j: usize, rhs: &[(usize, &str)]) -> ExpectedBracket {
    ExpectedBracket {
        i: i - 1,
        j: j - 1,
        rhs: rhs.iter().map(|(k, c)| (k - 1, simplify(&parse(c).unwrap()))).collect(),
    }
}

/// Every bracket the commutation tables state, including the vanishing ones.
pub fn expected_brackets(id: EquationId) -> Vec<ExpectedBracket> {
    match id {
        EquationId::Kdv => vec![
            br(1, 2, &[]),
            br(1, 3, &[(2, "6")]),
            br(1, 4, &[(1, "-3/2")]),
            br(2, 3, &[]),
            br(2, 4, &[(2, "-1/2")]),
            br(3, 4, &[(3, "1")]),
        ],
        EquationId::Mkdv => vec![br(1, 2, &[]), br(1, 3, &[(1, "3")]), br(2, 3, &[(2, "1")])],
        EquationId::Burgers => vec![
            br(1, 2, &[]),
            br(2, 3, &[]),
            br(3, 5, &[]),
            br(2, 4, &[(2, "-1")]),
            br(2, 5, &[(3, "1/a")]),
            br(1, 3, &[(2, "a")]),
            br(1, 4, &[(1, "-2")]),
            br(1, 5, &[(4, "-1")]),
            br(3, 4, &[(3, "1")]),
            br(4, 5, &[(5, "-2")]),
        ],
        EquationId::Mburgers => vec![br(1, 2, &[]), br(1, 3, &[(1, "4")]), br(2, 3, &[(2, "2")])],
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BracketCheck {
    pub bracket: String,
    pub expected: String,
    pub holds: bool,
    pub max_abs: f64,
}

/// Check every stated bracket symbolically, parameters sampled.
pub fn check_expected_brackets(id: EquationId, z: &ZeroTest) -> Result<Vec<BracketCheck>, ExprError> {
    let basis = family(id).basis;
    let mut out = Vec::new();
    for e in expected_brackets(id) {
        let got = commutator(&basis[e.i], &basis[e.j]);
        let mut coeffs = vec![Expr::zero(); basis.len()];
        for (k, c) in &e.rhs {
            coeffs[*k] = c.clone();
        }
        let want = combination(&coeffs, &basis, "expected");
        let mut max_abs: f64 = 0.0;
        let mut holds = true;
        for (a, b) in got.coefficients().into_iter().zip(want.coefficients()) {
            let v = z.check(&(a - b))?;
            max_abs = max_abs.max(v.max_abs());
            holds &= v.is_zero();
        }
        let expected = if e.rhs.is_empty() {
            "0".to_string()
        } else {
            e.rhs
                .iter()
                .map(|(k, c)| format!("({c})*{}", basis[*k].label))
                .collect::<Vec<_>>()
                .join(" + ")
        };
        out.push(BracketCheck {
            bracket: format!("[{},{}]", basis[e.i].label, basis[e.j].label),
            expected,
            holds,
            max_abs,
        });
    }
    Ok(out)
}

/// Jacobi identity for every triple; returns the failing triples.
pub fn jacobi_failures(basis: &[VectorField], z: &ZeroTest) -> Result<Vec<(usize, usize, usize)>, ExprError> {
    let n = basis.len();
    let mut bad = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let a = commutator(&commutator(&basis[i], &basis[j]), &basis[k]);
                let b = commutator(&commutator(&basis[j], &basis[k]), &basis[i]);
                let c = commutator(&commutator(&basis[k], &basis[i]), &basis[j]);
                let sum = a.add(&b).add(&c);
                if !fields_equal(&sum, &VectorField::zero("0"), z)? {
                    bad.push((i, j, k));
                }
            }
        }
    }
    Ok(bad)
}

/// Criterion statistics for one field.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldResidual {
    pub label: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub points: usize,
}

pub fn field_residual(
    spec: &EquationSpec,
    v: &VectorField,
    points: &[JetPoint],
    params: &EvalEnv,
) -> Result<FieldResidual, ExprError> {
    let r = criterion_residuals(spec, v, points, params, ProlongationRoute::Printed)?;
    let max_abs = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean_abs = r.iter().map(|v| v.abs()).sum::<f64>() / r.len().max(1) as f64;
    Ok(FieldResidual {
        label: v.label.clone(),
        max_abs,
        mean_abs,
        points: r.len(),
    })
}

/// Random constants `c_i ∈ [-2, 2]`.
pub fn random_constants(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

/// Integrate the Lie equations `dt/dε = τ, dx/dε = ξ, du/dε = η` from
/// `(t, x, u)` to parameter `epsilon`.
pub fn flow(
    v: &VectorField,
    point: (f64, f64, f64),
    epsilon: f64,
    params: &EvalEnv,
    tol: f64,
) -> Result<(f64, f64, f64), SymmetryError> {
    let slots = [Symbol::new("t").unwrap(), Symbol::new("x").unwrap(), Symbol::jet(0, 0)];
    let tau = compile(&v.tau, &slots, params)?;
    let xi = compile(&v.xi, &slots, params)?;
    let eta = compile(&v.eta, &slots, params)?;
    let y0 = [point.0, point.1, point.2];
    let mut left = None;
    let rhs = |_e: f64, y: &[f64], dy: &mut [f64]| -> Result<(), OdeError> {
        dy[0] = tau.eval(y)?;
        dy[1] = xi.eval(y)?;
        dy[2] = eta.eval(y)?;
        Ok(())
    };
    let res = dopri5(rhs, 0.0, &y0, epsilon, &StepControl::new(tol), |e, y| {
        if y[0] <= 0.0 || y[1] <= 0.0 {
            left = Some(e);
            return Ok(Next::Stop);
        }
        Ok(Next::Continue(f64::INFINITY))
    });
    let y = match res {
        Ok((y, _)) => y,
        Err(OdeError::Eval(ExprError::Domain { .. })) => return Err(SymmetryError::LeftDomain(f64::NAN)),
        Err(e) => return Err(e.into()),
    };
    if let Some(e) = left {
        return Err(SymmetryError::LeftDomain(e));
    }
    Ok((y[0], y[1], y[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EvalEnv {
        EvalEnv::new().with("alpha", 0.7).with("beta", 0.6).with("a", 1.5).with("b", 0.8)
    }

    #[test]
    fn unit_constants_give_basis() {
        let z = ZeroTest::default();
        for id in EquationId::ALL {
            let fam = family(id);
            for (i, (k, sign)) in fam.unit_map.iter().enumerate() {
                let want = fam.basis[*k].scale(&Expr::int(*sign));
                assert!(fields_equal(&fam.unit(i), &want, &z).unwrap(), "{id} c{}", i + 1);
            }
        }
    }

    #[test]
    fn basis_fields_are_symmetries() {
        let pts = JetPoint::sample(30, crate::jet::JET_SEED);
        for (alpha, beta) in [(1.0, 1.0), (0.5, 0.5), (0.9, 0.3)] {
            for id in EquationId::ALL {
                let spec = EquationSpec::new(id, alpha, beta).with_ab(1.5, 0.8);
                let fam = family(id);
                for v in &fam.basis {
                    let r = field_residual(&spec, v, &pts, &EvalEnv::new()).unwrap();
                    assert!(r.max_abs < 1e-8, "{id} {} {alpha} {beta}: {}", v.label, r.max_abs);
                }
                let c = random_constants(fam.constants, 3);
                let r = field_residual(&spec, &fam.specialize(&c), &pts, &EvalEnv::new()).unwrap();
                assert!(r.max_abs < 1e-8, "{id} family: {}", r.max_abs);
                for v in fam.negative_controls() {
                    let r = field_residual(&spec, &v, &pts, &EvalEnv::new()).unwrap();
                    assert!(r.max_abs > 1e-3, "{id} {}: {}", v.label, r.max_abs);
                }
            }
        }
    }

    #[test]
    fn kdv_brackets() {
        let t = structure_constants(&family(EquationId::Kdv).basis, &params(), 1).unwrap();
        assert_eq!(t.constants[0][2], vec![0.0, 6.0, 0.0, 0.0]);
        assert_eq!(t.constants[0][3], vec![-1.5, 0.0, 0.0, 0.0]);
        assert!(t.is_antisymmetric());
        assert_eq!(t.brackets[0][2], "6*V2");
    }

    #[test]
    fn stated_brackets_hold() {
        for id in EquationId::ALL {
            for c in check_expected_brackets(id, &ZeroTest::default()).unwrap() {
                assert!(c.holds, "{id} {c:?}");
            }
        }
    }

    #[test]
    fn jacobi() {
        for id in EquationId::ALL {
            assert!(jacobi_failures(&family(id).basis, &ZeroTest::default()).unwrap().is_empty());
        }
    }

    #[test]
    fn rationals() {
        assert_eq!(rationalize(-1.5, 100, 1e-12).unwrap(), Rational::new(BigInt::from(-3), BigInt::from(2)));
        assert_eq!(rationalize(2.0 / 3.0, 100, 1e-12).unwrap(), Rational::new(BigInt::from(2), BigInt::from(3)));
        assert!(rationalize(std::f64::consts::PI, 100, 1e-12).is_none());
    }

    #[test]
    fn v1_flow_closed_form() {
        let v = family(EquationId::Kdv).basis[0].clone();
        let p = params();
        let (t, x, u) = flow(&v, (1.2, 0.7, 0.3), 0.8, &p, 1e-12).unwrap();
        let exact = (1.2f64.powf(0.6) + 0.6 * 0.8).powf(1.0 / 0.6);
        assert!((t - exact).abs() < 1e-9);
        assert_eq!((x, u), (0.7, 0.3));
    }

    #[test]
    fn scaling_flow_closed_form() {
        let v = family(EquationId::Kdv).basis[3].clone();
        let p = params();
        let e = 0.37;
        let (t, x, u) = flow(&v, (1.2, 0.7, 0.3), e, &p, 1e-12).unwrap();
        assert!((t - 1.2 * (-1.5 * e / 0.6f64).exp()).abs() < 1e-9);
        assert!((x - 0.7 * (-0.5 * e / 0.7f64).exp()).abs() < 1e-9);
        assert!((u - 0.3 * e.exp()).abs() < 1e-9);
    }

    #[test]
    fn flow_group_property() {
        let v = family(EquationId::Burgers).basis[4].clone();
        let p = params();
        let start = (1.0, 1.1, 0.4);
        let once = flow(&v, start, 0.3, &p, 1e-12).unwrap();
        let twice = flow(&v, flow(&v, start, 0.1, &p, 1e-12).unwrap(), 0.2, &p, 1e-12).unwrap();
        assert!((once.0 - twice.0).abs() < 1e-8);
        assert!((once.1 - twice.1).abs() < 1e-8);
        assert!((once.2 - twice.2).abs() < 1e-8);
        assert_eq!(flow(&v, start, 0.0, &p, 1e-12).unwrap(), start);
    }

    #[test]
    fn flow_leaving_domain_is_an_error() {
        let v = field("back", "0", "-1", "0");
        assert!(matches!(
            flow(&v, (0.5, 1.0, 0.0), 1.0, &params(), 1e-10),
            Err(SymmetryError::LeftDomain(_))
        ));
    }
}
