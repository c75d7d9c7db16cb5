//! The four fractional evolution equations and their classical equivalents.
//!
//! Each equation has the form
//! `D_t^β u + coef · u^k · D_x^α u + disp · D_x^{nα} u = 0`
//! with sequential conformable x-derivatives. For differentiable `u` each
//! conformable derivative is `v^{1-order}` times the classical one, which turns
//! the equation into the equivalent form returned by
//! [`EquationSpec::equivalent_form`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::expr::{parse, simplify, EvalEnv, Expr, Symbol};
use crate::jet::{total_derivative, Dir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationId {
    Kdv,
    Mkdv,
    Burgers,
    Mburgers,
}

impl EquationId {
    pub const ALL: [EquationId; 4] = [
        EquationId::Kdv,
        EquationId::Mkdv,
        EquationId::Burgers,
        EquationId::Mburgers,
    ];

    pub fn key(self) -> &'static str {
        match self {
            EquationId::Kdv => "kdv",
            EquationId::Mkdv => "mkdv",
            EquationId::Burgers => "burgers",
            EquationId::Mburgers => "mburgers",
        }
    }

    /// Whether the coefficients `a`, `b` are free parameters.
    pub fn has_ab(self) -> bool {
        matches!(self, EquationId::Burgers | EquationId::Mburgers)
    }
}

impl fmt::Display for EquationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for EquationId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        EquationId::ALL
            .into_iter()
            .find(|id| id.key() == s)
            .ok_or_else(|| format!("unknown equation `{s}` (expected kdv, mkdv, burgers or mburgers)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    pub id: EquationId,
    pub alpha: f64,
    pub beta: f64,
    /// Only meaningful for the Burgers family.
    pub a: f64,
    pub b: f64,
}

/// Symbolic shape of an equation.
#[derive(Clone, Debug)]
pub struct Shape {
    pub coef: Expr,
    pub power: i64,
    pub order: usize,
    pub disp: Expr,
}

impl EquationSpec {
    pub fn new(id: EquationId, alpha: f64, beta: f64) -> Self {
        EquationSpec {
            id,
            alpha,
            beta,
            a: 1.0,
            b: 1.0,
        }
    }

    pub fn with_ab(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if self.id.has_ab() && (self.a == 0.0 || self.b == 0.0) {
            return Err("a and b must be nonzero".into());
        }
        Ok(())
    }

    /// Parameter values for evaluation.
    pub fn env(&self) -> EvalEnv {
        let env = EvalEnv::new().with("alpha", self.alpha).with("beta", self.beta);
        if self.id.has_ab() {
            env.with("a", self.a).with("b", self.b)
        } else {
            env
        }
    }

    pub fn shape(&self) -> Shape {
        shape(self.id)
    }

    pub fn equivalent_form(&self) -> Expr {
        equivalent_form(self.id)
    }

    /// The jet coordinate eliminated on solutions: `u_xxx` or `u_xx`.
    pub fn highest(&self) -> Symbol {
        Symbol::jet(self.shape().order, 0)
    }

    /// The highest x-derivative expressed through lower ones on solutions.
    pub fn solved_highest(&self) -> Expr {
        solve_for(&self.equivalent_form(), &self.highest())
    }
}

pub fn shape(id: EquationId) -> Shape {
    let (coef, power, order, disp) = match id {
        EquationId::Kdv => (Expr::int(6), 1, 3, Expr::one()),
        EquationId::Mkdv => (Expr::int(-6), 2, 3, Expr::one()),
        EquationId::Burgers => (Expr::sym("a"), 1, 2, Expr::sym("b")),
        EquationId::Mburgers => (Expr::sym("a"), 2, 2, Expr::sym("b")),
    };
    Shape {
        coef,
        power,
        order,
        disp,
    }
}

fn p(text: &str) -> Expr {
    simplify(&parse(text).expect("built-in expression"))
}

/// The classical equivalent forms, written out term by term.
pub fn equivalent_form(id: EquationId) -> Expr {
    p(match id {
        EquationId::Kdv => {
            "t^(1-beta)*u_t + 6*x^(1-alpha)*u*u_x + (1-alpha)*(1-2*alpha)*x^(1-3*alpha)*u_x \
             + 3*(1-alpha)*x^(2-3*alpha)*u_xx + x^(3-3*alpha)*u_xxx"
        }
        EquationId::Mkdv => {
            "t^(1-beta)*u_t - 6*x^(1-alpha)*u^2*u_x + (1-alpha)*(1-2*alpha)*x^(1-3*alpha)*u_x \
             + 3*(1-alpha)*x^(2-3*alpha)*u_xx + x^(3-3*alpha)*u_xxx"
        }
        EquationId::Burgers => {
            "t^(1-beta)*u_t + a*x^(1-alpha)*u*u_x + b*(1-alpha)*x^(1-2*alpha)*u_x + b*x^(2-2*alpha)*u_xx"
        }
        EquationId::Mburgers => {
            "t^(1-beta)*u_t + a*x^(1-alpha)*u^2*u_x + b*(1-alpha)*x^(1-2*alpha)*u_x + b*x^(2-2*alpha)*u_xx"
        }
    })
}

/// `x^{1-α} D_x` applied `n` times to `u`: the sequential conformable
/// x-derivative of order `nα` as a function on jet space.
pub fn sequential_x_derivative(n: usize) -> Expr {
    let scale = p("x^(1-alpha)");
    let mut q = Expr::sym("u");
    for _ in 0..n {
        q = &scale * total_derivative(&q, Dir::X);
    }
    q
}

/// `t^{1-β} u_t`.
pub fn time_derivative() -> Expr {
    p("t^(1-beta)*u_t")
}

/// The fractional equation rewritten with classical derivatives, built by
/// composing the conformable operators rather than copied from a table.
pub fn fractional_form(id: EquationId) -> Expr {
    let s = shape(id);
    time_derivative()
        + s.coef * Expr::sym("u").powi(s.power) * sequential_x_derivative(1)
        + s.disp * sequential_x_derivative(s.order)
}

/// Solve `e = 0` for a symbol it contains linearly.
pub fn solve_for(e: &Expr, v: &Symbol) -> Expr {
    let c = crate::expr::diff(e, v);
    assert!(!c.contains(v), "{v} does not enter linearly");
    let rest = crate::expr::substitute(e, &[(v.name(), Expr::zero())]);
    -(rest / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ZeroTest;

    #[test]
    fn equivalent_forms_match_operator_composition() {
        let z = ZeroTest::default();
        for id in EquationId::ALL {
            let diff = equivalent_form(id) - fractional_form(id);
            assert!(z.is_zero(&diff), "{id}: {diff}");
        }
    }

    #[test]
    fn elimination_removes_highest_derivative() {
        for id in EquationId::ALL {
            let spec = EquationSpec::new(id, 0.7, 0.6);
            let h = spec.highest();
            let sol = spec.solved_highest();
            assert!(!sol.contains(&h));
            let back = spec.equivalent_form().substitute(&[(h, sol)].into_iter().collect());
            assert!(ZeroTest::default().is_zero(&back), "{id}");
        }
    }

    #[test]
    fn ids_parse() {
        assert_eq!("mkdv".parse::<EquationId>(), Ok(EquationId::Mkdv));
        assert!("heat".parse::<EquationId>().is_err());
    }
}
