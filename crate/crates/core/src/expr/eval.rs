//! Numeric evaluation.
//!
//! [`eval`] walks the tree directly. For repeated evaluation, [`compile`]
//! resolves symbols to slot indices once; the compiled form can also be run
//! on truncated Taylor series (automatic differentiation in one variable).

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::{Expr, ExprError, Func, Node, Symbol};

/// Values for free symbols, keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalEnv {
    values: BTreeMap<String, f64>,
}

impl EvalEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn remove(&mut self, name: &str) {
        self.values.remove(name);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// `other` wins on conflicts.
    pub fn merged(&self, other: &EvalEnv) -> EvalEnv {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

fn domain(e: &Expr, reason: &str) -> ExprError {
    ExprError::Domain {
        expr: e.to_string(),
        reason: reason.to_string(),
    }
}

fn real_pow(base: f64, exp: f64, exp_is_integer: bool, src: &Expr) -> Result<f64, ExprError> {
    if base == 0.0 && exp < 0.0 {
        return Err(domain(src, "division by zero"));
    }
    if base < 0.0 && !exp_is_integer {
        return Err(domain(src, "negative base with non-integer exponent"));
    }
    Ok(if exp_is_integer && exp.abs() < 2f64.powi(31) {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    })
}

fn apply_func(f: Func, a: f64, src: &Expr) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Exp => a.exp(),
        Func::Ln => {
            if a <= 0.0 {
                return Err(domain(src, "logarithm of a non-positive number"));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(domain(src, "square root of a negative number"));
            }
            a.sqrt()
        }
    })
}

fn finite(v: f64, src: &Expr) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(src, "non-finite value"))
    }
}

/// Evaluate `e` with every free symbol bound in `env`.
pub fn eval(e: &Expr, env: &EvalEnv) -> Result<f64, ExprError> {
    let v = match e.node() {
        Node::Num(r) => r.to_f64().unwrap_or(f64::NAN),
        Node::Sym(s) => env
            .get(s.name())
            .ok_or_else(|| ExprError::Unbound(s.name().to_string()))?,
        Node::Add(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += eval(t, env)?;
            }
            acc
        }
        Node::Mul(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= eval(f, env)?;
            }
            acc
        }
        Node::Div(a, b) => {
            let d = eval(b, env)?;
            if d == 0.0 {
                return Err(domain(e, "division by zero"));
            }
            eval(a, env)? / d
        }
        Node::Pow(b, x) => {
            let base = eval(b, env)?;
            let exp = eval(x, env)?;
            real_pow(base, exp, exp.fract() == 0.0, e)?
        }
        Node::Neg(a) => -eval(a, env)?,
        Node::Func(f, a) => apply_func(*f, eval(a, env)?, e)?,
    };
    finite(v, e)
}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Slot(usize),
    Add(Vec<Op>),
    Mul(Vec<Op>),
    Div(Box<Op>, Box<Op>, Expr),
    /// Constant exponent; the flag marks integer exponents.
    PowConst(Box<Op>, f64, bool, Expr),
    Pow(Box<Op>, Box<Op>, Expr),
    Neg(Box<Op>),
    Func(Func, Box<Op>, Expr),
}

/// An expression with symbols resolved to argument slots and the remaining
/// symbols folded to constants.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    op: Op,
    slots: Vec<Symbol>,
    source: Expr,
}

/// Compile `e` for evaluation with arguments in the order of `slots`.
/// Free symbols that are not slots must be bound in `fixed`.
pub fn compile(e: &Expr, slots: &[Symbol], fixed: &EvalEnv) -> Result<CompiledExpr, ExprError> {
    let index: BTreeMap<&Symbol, usize> = slots.iter().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(CompiledExpr {
        op: lower(e, &index, fixed)?,
        slots: slots.to_vec(),
        source: e.clone(),
    })
}

fn lower(e: &Expr, index: &BTreeMap<&Symbol, usize>, fixed: &EvalEnv) -> Result<Op, ExprError> {
    Ok(match e.node() {
        Node::Num(r) => Op::Const(r.to_f64().unwrap_or(f64::NAN)),
        Node::Sym(s) => match index.get(s) {
            Some(&i) => Op::Slot(i),
            None => Op::Const(
                fixed
                    .get(s.name())
                    .ok_or_else(|| ExprError::Unbound(s.name().to_string()))?,
            ),
        },
        Node::Add(ts) => Op::Add(ts.iter().map(|t| lower(t, index, fixed)).collect::<Result<_, _>>()?),
        Node::Mul(fs) => Op::Mul(fs.iter().map(|f| lower(f, index, fixed)).collect::<Result<_, _>>()?),
        Node::Div(a, b) => Op::Div(
            Box::new(lower(a, index, fixed)?),
            Box::new(lower(b, index, fixed)?),
            e.clone(),
        ),
        Node::Pow(b, x) => {
            let base = Box::new(lower(b, index, fixed)?);
            match lower(x, index, fixed)? {
                Op::Const(k) => {
                    Op::PowConst(base, k, k.fract() == 0.0, e.clone())
                }
                other => Op::Pow(base, Box::new(other), e.clone()),
            }
        }
        Node::Neg(a) => Op::Neg(Box::new(lower(a, index, fixed)?)),
        Node::Func(f, a) => Op::Func(*f, Box::new(lower(a, index, fixed)?), e.clone()),
    })
}

fn run(op: &Op, args: &[f64]) -> Result<f64, ExprError> {
    Ok(match op {
        Op::Const(c) => *c,
        Op::Slot(i) => args[*i],
        Op::Add(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += run(t, args)?;
            }
            acc
        }
        Op::Mul(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= run(f, args)?;
            }
            acc
        }
        Op::Div(a, b, src) => {
            let d = run(b, args)?;
            if d == 0.0 {
                return Err(domain(src, "division by zero"));
            }
            run(a, args)? / d
        }
        Op::PowConst(b, k, integer, src) => real_pow(run(b, args)?, *k, *integer, src)?,
        Op::Pow(b, x, src) => {
            let k = run(x, args)?;
            real_pow(run(b, args)?, k, k.fract() == 0.0, src)?
        }
        Op::Neg(a) => -run(a, args)?,
        Op::Func(f, a, src) => apply_func(*f, run(a, args)?, src)?,
    })
}

impl CompiledExpr {
    pub fn slots(&self) -> &[Symbol] {
        &self.slots
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        assert_eq!(args.len(), self.slots.len(), "argument count");
        finite(run(&self.op, args)?, &self.source)
    }

    /// Evaluate on truncated Taylor series. Every argument holds the
    /// coefficients `c_0..c_n` of a series in a common variable; all must have
    /// the same length. Returns the coefficients of the result.
    pub fn eval_series(&self, args: &[Vec<f64>]) -> Result<Vec<f64>, ExprError> {
        assert_eq!(args.len(), self.slots.len(), "argument count");
        let n = args.first().map(Vec::len).unwrap_or(1);
        let out = series(&self.op, args, n)?;
        for v in &out {
            finite(*v, &self.source)?;
        }
        Ok(out)
    }
}

fn series_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum())
        .collect()
}

fn series_div(a: &[f64], b: &[f64], src: &Expr) -> Result<Vec<f64>, ExprError> {
    if b[0] == 0.0 {
        return Err(domain(src, "division by zero"));
    }
    let n = a.len();
    let mut c = vec![0.0; n];
    for k in 0..n {
        let mut s = a[k];
        for j in 1..=k {
            s -= b[j] * c[k - j];
        }
        c[k] = s / b[0];
    }
    Ok(c)
}

fn series_exp(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut y = vec![0.0; n];
    y[0] = a[0].exp();
    for k in 1..n {
        let s: f64 = (1..=k).map(|j| j as f64 * a[j] * y[k - j]).sum();
        y[k] = s / k as f64;
    }
    y
}

fn series_ln(a: &[f64], src: &Expr) -> Result<Vec<f64>, ExprError> {
    if a[0] <= 0.0 {
        return Err(domain(src, "logarithm of a non-positive number"));
    }
    let n = a.len();
    let mut y = vec![0.0; n];
    y[0] = a[0].ln();
    for k in 1..n {
        let s: f64 = (1..k).map(|j| j as f64 * y[j] * a[k - j]).sum();
        y[k] = (a[k] - s / k as f64) / a[0];
    }
    Ok(y)
}

fn series_sin_cos(a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for k in 1..n {
        let mut ss = 0.0;
        let mut cc = 0.0;
        for j in 1..=k {
            ss += j as f64 * a[j] * c[k - j];
            cc += j as f64 * a[j] * s[k - j];
        }
        s[k] = ss / k as f64;
        c[k] = -cc / k as f64;
    }
    (s, c)
}

fn series_powi(a: &[f64], k: i64, src: &Expr) -> Result<Vec<f64>, ExprError> {
    let n = a.len();
    let mut result = vec![0.0; n];
    result[0] = 1.0;
    let mut base = a.to_vec();
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result = series_mul(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = series_mul(&base, &base);
        }
    }
    if k < 0 {
        let mut one = vec![0.0; n];
        one[0] = 1.0;
        return series_div(&one, &result, src);
    }
    Ok(result)
}

fn series_powf(a: &[f64], p: f64, src: &Expr) -> Result<Vec<f64>, ExprError> {
    if a[0] <= 0.0 {
        if a[0] == 0.0 && p > 0.0 && a.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; a.len()]);
        }
        return Err(domain(src, "non-positive base with non-integer exponent"));
    }
    let n = a.len();
    let mut y = vec![0.0; n];
    y[0] = a[0].powf(p);
    for k in 1..n {
        let s: f64 = (1..=k)
            .map(|j| (p * j as f64 - (k - j) as f64) * a[j] * y[k - j])
            .sum();
        y[k] = s / (k as f64 * a[0]);
    }
    Ok(y)
}

fn series(op: &Op, args: &[Vec<f64>], n: usize) -> Result<Vec<f64>, ExprError> {
    Ok(match op {
        Op::Const(c) => {
            let mut v = vec![0.0; n];
            v[0] = *c;
            v
        }
        Op::Slot(i) => args[*i][..n].to_vec(),
        Op::Add(ts) => {
            let mut acc = vec![0.0; n];
            for t in ts {
                for (a, b) in acc.iter_mut().zip(series(t, args, n)?) {
                    *a += b;
                }
            }
            acc
        }
        Op::Mul(fs) => {
            let mut acc: Option<Vec<f64>> = None;
            for f in fs {
                let v = series(f, args, n)?;
                acc = Some(match acc {
                    None => v,
                    Some(a) => series_mul(&a, &v),
                });
            }
            acc.unwrap_or_else(|| {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                v
            })
        }
        Op::Div(a, b, src) => series_div(&series(a, args, n)?, &series(b, args, n)?, src)?,
        Op::PowConst(b, k, integer, src) => {
            let base = series(b, args, n)?;
            if *integer && k.abs() <= 64.0 {
                series_powi(&base, *k as i64, src)?
            } else {
                series_powf(&base, *k, src)?
            }
        }
        Op::Pow(b, x, src) => {
            let base = series(b, args, n)?;
            let exp = series(x, args, n)?;
            series_exp(&series_mul(&exp, &series_ln(&base, src)?))
        }
        Op::Neg(a) => series(a, args, n)?.into_iter().map(|v| -v).collect(),
        Op::Func(f, a, src) => {
            let a = series(a, args, n)?;
            match f {
                Func::Exp => series_exp(&a),
                Func::Ln => series_ln(&a, src)?,
                Func::Sin => series_sin_cos(&a).0,
                Func::Cos => series_sin_cos(&a).1,
                Func::Sqrt => series_powf(&a, 0.5, src)?,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, simplify};

    fn s(text: &str) -> Expr {
        simplify(&parse(text).unwrap())
    }

    #[test]
    fn plain_values() {
        let env = EvalEnv::new().with("t", 1.0);
        assert_eq!(eval(&s("2*t^1.7"), &env).unwrap(), 2.0);
        let env = EvalEnv::new().with("p", 2.0).with("alpha", 0.3).with("t", 1.0);
        assert!((eval(&s("p*t^(p-alpha)"), &env).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_culprit() {
        let env = EvalEnv::new().with("x", -1.0).with("alpha", 0.5);
        match eval(&s("u + x^alpha"), &env.clone().with("u", 0.0)) {
            Err(ExprError::Domain { expr, .. }) => assert_eq!(expr, "x^alpha"),
            other => panic!("{other:?}"),
        }
        assert_eq!(eval(&s("u"), &env), Err(ExprError::Unbound("u".into())));
        let zero = EvalEnv::new().with("x", 0.0);
        assert!(matches!(eval(&s("1/x"), &zero), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn compiled_matches_tree_walk() {
        let e = s("sin(t)*x^(1-alpha) + exp(u)/(1+t^2) - ln(x)*sqrt(t)");
        let slots: Vec<Symbol> = ["t", "x", "u"].iter().map(|n| Symbol::new(n).unwrap()).collect();
        let fixed = EvalEnv::new().with("alpha", 0.4);
        let c = compile(&e, &slots, &fixed).unwrap();
        let env = fixed.clone().with("t", 1.3).with("x", 0.7).with("u", -0.2);
        assert!((c.eval(&[1.3, 0.7, -0.2]).unwrap() - eval(&e, &env).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn series_give_derivatives() {
        // f(t) = t^2.5 * exp(sin t) / (1 + t); coefficients around t0 = 0.8
        let e = s("t^2.5*exp(sin(t))/(1+t) + t^(1/3)*ln(t) + t^t");
        let slot = [Symbol::new("t").unwrap()];
        let c = compile(&e, &slot, &EvalEnv::new()).unwrap();
        let t0 = 0.8;
        let mut arg = vec![0.0; 6];
        arg[0] = t0;
        arg[1] = 1.0;
        let coeffs = c.eval_series(&[arg]).unwrap();
        let f = |t: f64| c.eval(&[t]).unwrap();
        let h = 1e-3;
        let d1 = (f(t0 + h) - f(t0 - h)) / (2.0 * h);
        let d2 = (f(t0 + h) - 2.0 * f(t0) + f(t0 - h)) / (h * h);
        assert!((coeffs[0] - f(t0)).abs() < 1e-14);
        assert!((coeffs[1] - d1).abs() < 1e-6);
        assert!((2.0 * coeffs[2] - d2).abs() < 1e-4);
    }
}
