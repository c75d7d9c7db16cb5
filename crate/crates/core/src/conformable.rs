//! Conformable fractional derivative and integral.
//!
//! `D^α f(t) = lim_{ε→0} [f(t + ε t^{1-α}) - f(t)] / ε` and
//! `I^α f(t) = ∫_0^t f(τ) τ^{α-1} dτ`, both symbolic and numeric, plus a
//! harness that checks the calculus rules numerically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{compile, diff, EvalEnv, Expr, ExprError, Symbol};
use crate::quad::{gauss_kronrod, QuadError};

#[derive(Debug, Error, PartialEq)]
pub enum ConfError {
    #[error("conformable derivative needs t > 0, got {0}")]
    NonPositive(f64),
    #[error("order must lie in (0, 1], got {0}")]
    BadOrder(f64),
    #[error("function evaluation failed at {at}")]
    Evaluation { at: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfCalcConfig {
    pub eps0: f64,
    pub richardson_levels: usize,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
}

impl Default for ConfCalcConfig {
    fn default() -> Self {
        ConfCalcConfig {
            eps0: 1e-6,
            richardson_levels: 2,
            quad_abs_tol: 1e-10,
            quad_rel_tol: 1e-8,
        }
    }
}

fn check_order(alpha: f64) -> Result<(), ConfError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(ConfError::BadOrder(alpha))
    }
}

/// `v^(1-α) · ∂e/∂v`, simplified.
pub fn conf_diff_symbolic(e: &Expr, v: &Symbol, order: &Expr) -> Expr {
    Expr::symbol(v).pow(1 - order) * diff(e, v)
}

/// Richardson extrapolation of a quotient whose error expands in powers of ε.
fn richardson(q: impl Fn(f64) -> Result<f64, ConfError>, cfg: &ConfCalcConfig) -> Result<f64, ConfError> {
    let levels = cfg.richardson_levels;
    let mut table: Vec<f64> = (0..=levels)
        .map(|k| q(cfg.eps0 / f64::powi(2.0, k as i32)))
        .collect::<Result<_, _>>()?;
    for level in 1..=levels {
        let factor = f64::powi(2.0, level as i32);
        for k in (level..=levels).rev() {
            table[k] = (factor * table[k] - table[k - 1]) / (factor - 1.0);
        }
    }
    Ok(table[levels])
}

/// The limit quotient with the increment `ε t^{1-α}`, extrapolated in ε.
pub fn conf_diff_numeric<F>(f: F, t: f64, alpha: f64, cfg: &ConfCalcConfig) -> Result<f64, ConfError>
where
    F: Fn(f64) -> Option<f64>,
{
    check_order(alpha)?;
    if !(t > 0.0) {
        return Err(ConfError::NonPositive(t));
    }
    let ft = f(t).ok_or(ConfError::Evaluation { at: t })?;
    let scale = t.powf(1.0 - alpha);
    richardson(
        |eps| {
            let at = t + eps * scale;
            let fa = f(at).ok_or(ConfError::Evaluation { at })?;
            Ok((fa - ft) / eps)
        },
        cfg,
    )
}

/// Same limit for a function known through its increments
/// `inc(t, h) = f(t + h) - f(t)`. Used when `f` is itself an integral, where
/// differencing two large values would lose most digits.
pub fn conf_diff_increment<F>(inc: F, t: f64, alpha: f64, cfg: &ConfCalcConfig) -> Result<f64, ConfError>
where
    F: Fn(f64, f64) -> Result<f64, ConfError>,
{
    check_order(alpha)?;
    if !(t > 0.0) {
        return Err(ConfError::NonPositive(t));
    }
    let scale = t.powf(1.0 - alpha);
    richardson(|eps| Ok(inc(t, eps * scale)? / eps), cfg)
}

/// `∫_0^t f(τ) τ^{α-1} dτ`, computed as `(1/α) ∫_0^{t^α} f(σ^{1/α}) dσ`.
pub fn conf_integrate_numeric<F>(f: F, t: f64, alpha: f64, cfg: &ConfCalcConfig) -> Result<f64, ConfError>
where
    F: Fn(f64) -> f64,
{
    check_order(alpha)?;
    if !(t > 0.0) {
        return Err(ConfError::NonPositive(t));
    }
    let inv = 1.0 / alpha;
    let q = gauss_kronrod(
        |sigma| f(sigma.powf(inv)),
        0.0,
        t.powf(alpha),
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?;
    Ok(q / alpha)
}

/// `∫_a^b f(τ) τ^{α-1} dτ` for `0 < a < b`, without the substitution.
pub fn conf_integrate_between<F>(f: F, a: f64, b: f64, alpha: f64, cfg: &ConfCalcConfig) -> Result<f64, ConfError>
where
    F: Fn(f64) -> f64,
{
    Ok(gauss_kronrod(
        |tau| f(tau) * tau.powf(alpha - 1.0),
        a,
        b,
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
    )?)
}

/// A corpus function: closed form and its classical derivative.
#[derive(Clone, Debug)]
pub struct CorpusFn {
    pub name: String,
    pub expr: Expr,
    value: crate::expr::CompiledExpr,
    deriv: crate::expr::CompiledExpr,
    /// Open interval on which the function is defined.
    pub domain: (f64, f64),
}

impl CorpusFn {
    pub fn new(name: &str, text: &str, domain: (f64, f64)) -> Result<Self, ExprError> {
        let expr = crate::expr::simplify(&crate::expr::parse(text)?);
        let t = Symbol::new("t")?;
        let env = EvalEnv::new();
        let value = compile(&expr, std::slice::from_ref(&t), &env)?;
        let deriv = compile(&diff(&expr, &t), std::slice::from_ref(&t), &env)?;
        Ok(CorpusFn {
            name: name.to_string(),
            expr,
            value,
            deriv,
            domain,
        })
    }

    pub fn defined_at(&self, t: f64) -> bool {
        t > self.domain.0 && t < self.domain.1
    }

    pub fn value(&self, t: f64) -> Option<f64> {
        if !self.defined_at(t) {
            return None;
        }
        self.value.eval(&[t]).ok()
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        if !self.defined_at(t) {
            return None;
        }
        self.deriv.eval(&[t]).ok()
    }
}

/// sin, cos, exp, 1+t², ln(1+t), sqrt(1+t).
pub fn default_corpus() -> Vec<CorpusFn> {
    let inf = f64::INFINITY;
    [
        ("sin", "sin(t)", (-inf, inf)),
        ("cos", "cos(t)", (-inf, inf)),
        ("exp", "exp(t)", (-inf, inf)),
        ("one_plus_square", "1 + t^2", (-inf, inf)),
        ("log1p", "ln(1 + t)", (-1.0, inf)),
        ("sqrt1p", "sqrt(1 + t)", (-1.0, inf)),
    ]
    .into_iter()
    .map(|(n, text, d)| CorpusFn::new(n, text, d).expect("corpus expressions are valid"))
    .collect()
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Linearity,
    PowerRule,
    Constant,
    Product,
    Quotient,
    ClassicalDerivative,
    DerivativeOfIntegral,
    IntegralOfDerivative,
    ChainRule,
    ChainRulePowerWeighted,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::Linearity,
        Rule::PowerRule,
        Rule::Constant,
        Rule::Product,
        Rule::Quotient,
        Rule::ClassicalDerivative,
        Rule::DerivativeOfIntegral,
        Rule::IntegralOfDerivative,
        Rule::ChainRule,
        Rule::ChainRulePowerWeighted,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleReport {
    pub rule: Rule,
    pub alpha: f64,
    pub max_residual: f64,
    pub points_checked: usize,
    pub skipped: usize,
    pub pass: bool,
}

pub const RULE_TOLERANCE: f64 = 1e-6;

/// Scaled residual `|lhs - rhs| / (1 + |rhs|)`.
fn residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / (1.0 + rhs.abs())
}

struct Acc {
    max: f64,
    checked: usize,
    skipped: usize,
}

impl Acc {
    fn new() -> Self {
        Acc {
            max: 0.0,
            checked: 0,
            skipped: 0,
        }
    }

    fn push(&mut self, r: Option<f64>) {
        match r {
            Some(r) => {
                // NaN must not be swallowed by max
                self.max = if r.is_nan() { f64::INFINITY } else { self.max.max(r) };
                self.checked += 1;
            }
            None => self.skipped += 1,
        }
    }

    fn report(self, rule: Rule, alpha: f64) -> RuleReport {
        RuleReport {
            rule,
            alpha,
            max_residual: self.max,
            points_checked: self.checked,
            skipped: self.skipped,
            pass: self.checked > 0 && self.max < RULE_TOLERANCE,
        }
    }
}

const LIN_A: f64 = 1.5;
const LIN_B: f64 = -0.7;
const POWERS: [f64; 4] = [-1.5, 0.5, 2.0, 3.3];
const CONSTANT: f64 = 4.2;
const QUOTIENT_MIN_DENOM: f64 = 0.1;

/// Check every rule on all ordered corpus pairs at the given points.
pub fn check_rules(
    alpha: f64,
    corpus: &[CorpusFn],
    points: &[f64],
    cfg: &ConfCalcConfig,
) -> Result<Vec<RuleReport>, ConfError> {
    check_order(alpha)?;
    let d = |f: &dyn Fn(f64) -> Option<f64>, t: f64| conf_diff_numeric(f, t, alpha, cfg).ok();
    let mut out = Vec::new();
    for rule in Rule::ALL {
        let mut acc = Acc::new();
        match rule {
            Rule::Linearity => {
                for f in corpus {
                    for g in corpus {
                        for &t in points {
                            let comb = |s: f64| Some(LIN_A * f.value(s)? + LIN_B * g.value(s)?);
                            let r = (|| {
                                let lhs = d(&comb, t)?;
                                let rhs = LIN_A * d(&|s| f.value(s), t)? + LIN_B * d(&|s| g.value(s), t)?;
                                Some(residual(lhs, rhs))
                            })();
                            acc.push(r);
                        }
                    }
                }
            }
            Rule::PowerRule => {
                for p in POWERS {
                    for &t in points {
                        let lhs = d(&|s: f64| Some(s.powf(p)), t);
                        acc.push(lhs.map(|lhs| residual(lhs, p * t.powf(p - alpha))));
                    }
                }
            }
            Rule::Constant => {
                for &t in points {
                    acc.push(d(&|_| Some(CONSTANT), t).map(|lhs| residual(lhs, 0.0)));
                }
            }
            Rule::Product => {
                for f in corpus {
                    for g in corpus {
                        for &t in points {
                            let r = (|| {
                                let lhs = d(&|s| Some(f.value(s)? * g.value(s)?), t)?;
                                let rhs = f.value(t)? * d(&|s| g.value(s), t)?
                                    + g.value(t)? * d(&|s| f.value(s), t)?;
                                Some(residual(lhs, rhs))
                            })();
                            acc.push(r);
                        }
                    }
                }
            }
            Rule::Quotient => {
                for f in corpus {
                    for g in corpus {
                        for &t in points {
                            let r = (|| {
                                let gt = g.value(t)?;
                                if gt.abs() < QUOTIENT_MIN_DENOM {
                                    return None;
                                }
                                let lhs = d(&|s| Some(f.value(s)? / g.value(s)?), t)?;
                                let rhs = (gt * d(&|s| f.value(s), t)? - f.value(t)? * d(&|s| g.value(s), t)?)
                                    / (gt * gt);
                                Some(residual(lhs, rhs))
                            })();
                            acc.push(r);
                        }
                    }
                }
            }
            Rule::ClassicalDerivative => {
                for f in corpus {
                    for &t in points {
                        let r = (|| {
                            let lhs = d(&|s| f.value(s), t)?;
                            Some(residual(lhs, t.powf(1.0 - alpha) * f.derivative(t)?))
                        })();
                        acc.push(r);
                    }
                }
            }
            Rule::DerivativeOfIntegral => {
                for f in corpus {
                    let fv = |s: f64| f.value(s).unwrap_or(f64::NAN);
                    for &t in points {
                        let lhs = conf_diff_increment(
                            |t, h| conf_integrate_between(fv, t, t + h, alpha, cfg),
                            t,
                            alpha,
                            cfg,
                        )?;
                        acc.push(f.value(t).map(|rhs| residual(lhs, rhs)));
                    }
                }
            }
            Rule::IntegralOfDerivative => {
                for f in corpus {
                    let df = |s: f64| {
                        conf_diff_numeric(|r| f.value(r), s, alpha, cfg).unwrap_or(f64::NAN)
                    };
                    for &t in points {
                        let lhs = conf_integrate_numeric(df, t, alpha, cfg)?;
                        let r = (|| Some(residual(lhs, f.value(t)? - f.value(0.0)?)))();
                        acc.push(r);
                    }
                }
            }
            Rule::ChainRule => {
                for f in corpus {
                    for g in corpus {
                        for &t in points {
                            let r = (|| {
                                let gt = g.value(t)?;
                                // f differentiable at g(t), and on a neighbourhood for the difference quotient
                                if !f.defined_at(gt) || !f.defined_at(gt - 1e-3) || !f.defined_at(gt + 1e-3) {
                                    return None;
                                }
                                let lhs = d(&|s| f.value(g.value(s)?), t)?;
                                let rhs = f.derivative(gt)? * d(&|s| g.value(s), t)?;
                                Some(residual(lhs, rhs))
                            })();
                            acc.push(r);
                        }
                    }
                }
            }
            Rule::ChainRulePowerWeighted => {
                for f in corpus {
                    for g in corpus {
                        for &t in points {
                            let r = (|| {
                                let gt = g.value(t)?;
                                // needs g(t) > 0 and f α-differentiable there
                                if gt <= 1e-3 || !f.defined_at(gt) || !f.defined_at(gt + 1e-3) {
                                    return None;
                                }
                                let lhs = d(&|s| f.value(g.value(s)?), t)?;
                                let rhs = d(&|s| f.value(s), gt)? * d(&|s| g.value(s), t)? * gt.powf(alpha - 1.0);
                                Some(residual(lhs, rhs))
                            })();
                            acc.push(r);
                        }
                    }
                }
            }
        }
        out.push(acc.report(rule, alpha));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, simplify};

    fn s(text: &str) -> Expr {
        simplify(&parse(text).unwrap())
    }

    fn sym(n: &str) -> Symbol {
        Symbol::new(n).unwrap()
    }

    #[test]
    fn symbolic_power_rule() {
        let d = conf_diff_symbolic(&s("t^p"), &sym("t"), &s("alpha"));
        assert_eq!(d, s("p*t^(p-alpha)"));
        assert!(conf_diff_symbolic(&s("c1"), &sym("t"), &s("alpha")).is_zero());
        assert_eq!(conf_diff_symbolic(&s("sqrt(t)"), &sym("t"), &s("1/2")), s("1/2"));
    }

    #[test]
    fn numeric_examples() {
        let cfg = ConfCalcConfig::default();
        let v = conf_diff_numeric(|t: f64| Some(t.sqrt()), 2.0, 0.5, &cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-8, "{v}");
        let v = conf_diff_numeric(|t: f64| Some(t.sin()), 1.0, 1.0, &cfg).unwrap();
        assert!((v - 1f64.cos()).abs() < 1e-8);
        let v = conf_diff_numeric(|t: f64| Some(t.exp()), 2.0, 0.7, &cfg).unwrap();
        let want = 2f64.powf(0.3) * 2f64.exp();
        assert!((v - want).abs() < 1e-6 * want);
    }

    #[test]
    fn integral_of_power() {
        let cfg = ConfCalcConfig::default();
        for (p, alpha, t) in [(2.0, 0.5, 1.7), (0.0, 0.3, 2.0), (1.5, 1.0, 0.4)] {
            let v = conf_integrate_numeric(|s: f64| s.powf(p), t, alpha, &cfg).unwrap();
            let want = t.powf(p + alpha) / (p + alpha);
            assert!((v - want).abs() < 1e-9 * (1.0 + want), "{p} {alpha} {v} {want}");
        }
        // α = 1 is the ordinary integral
        let v = conf_integrate_numeric(f64::cos, 1.2, 1.0, &cfg).unwrap();
        assert!((v - 1.2f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn integral_undoes_derivative_for_cos() {
        let cfg = ConfCalcConfig::default();
        let alpha = 0.6;
        let dcos = |s: f64| conf_diff_numeric(|r: f64| Some(r.cos()), s, alpha, &cfg).unwrap();
        let t = 1.3;
        let v = conf_integrate_numeric(dcos, t, alpha, &cfg).unwrap();
        assert!((v - (t.cos() - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let cfg = ConfCalcConfig::default();
        assert_eq!(conf_diff_numeric(|t: f64| Some(t), -1.0, 0.5, &cfg), Err(ConfError::NonPositive(-1.0)));
        assert_eq!(conf_diff_numeric(|t: f64| Some(t), 1.0, 1.5, &cfg), Err(ConfError::BadOrder(1.5)));
        assert!(matches!(
            conf_diff_numeric(|_| None, 1.0, 0.5, &cfg),
            Err(ConfError::Evaluation { .. })
        ));
    }

    #[test]
    fn quotient_by_one_is_identity() {
        let cfg = ConfCalcConfig::default();
        let f = |t: f64| Some(t.exp());
        let q = |t: f64| Some(t.exp() / 1.0);
        let a = conf_diff_numeric(f, 1.1, 0.4, &cfg).unwrap();
        let b = conf_diff_numeric(q, 1.1, 0.4, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rules_on_small_corpus() {
        let cfg = ConfCalcConfig::default();
        let corpus = default_corpus();
        let pts = [0.5, 1.0, 2.0];
        let reports = check_rules(0.4, &corpus, &pts, &cfg).unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }
}
