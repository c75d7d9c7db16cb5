//! Immutable symbolic expressions: parsing, printing, canonical simplification,
//! classical differentiation, substitution and numeric evaluation.
//!
//! Expressions are reference counted and never mutated, so they can be shared
//! freely between threads. Every rewriting operation returns a new tree.

mod diff;
mod eval;
mod parse;
mod print;
mod simplify;
mod symbol;
mod zero;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use diff::diff;
pub use eval::{compile, eval, CompiledExpr, EvalEnv};
pub use parse::parse;
pub use simplify::simplify;
pub use symbol::{Symbol, SymbolKind};
pub use zero::{ZeroTest, ZeroVerdict};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("zero test could not find valid sample points for `{0}`")]
    NoValidSamples(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(Rational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Neg(Expr),
    Func(Func, Expr),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn int(n: i64) -> Self {
        Self::num(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        Self::num(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn num(r: Rational) -> Self {
        Expr::from_node(Node::Num(r))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    /// Symbol leaf. Panics on names outside the alphabet; use [`Symbol::new`]
    /// for untrusted input.
    pub fn sym(name: &str) -> Self {
        Expr::from_node(Node::Sym(
            Symbol::new(name).unwrap_or_else(|_| panic!("`{name}` is not in the alphabet")),
        ))
    }

    pub fn symbol(s: &Symbol) -> Self {
        Expr::from_node(Node::Sym(s.clone()))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.node() {
            Node::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    pub fn is_integer(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_integer())
    }

    pub fn is_negative_number(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_negative())
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => vec![],
            Node::Add(v) | Node::Mul(v) => v.iter().collect(),
            Node::Div(a, b) | Node::Pow(a, b) => vec![a, b],
            Node::Neg(a) | Node::Func(_, a) => vec![a],
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        if let Node::Sym(s) = self.node() {
            out.insert(s.clone());
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        match self.node() {
            Node::Sym(t) => t == s,
            _ => self.children().into_iter().any(|c| c.contains(s)),
        }
    }

    /// Canonical power (see [`simplify`]); both arguments are assumed canonical.
    pub fn pow(&self, exponent: impl Into<Expr>) -> Expr {
        simplify::pow(self.clone(), exponent.into())
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Expr::int(n))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        simplify::func(f, arg)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        simplify::add(terms.into_iter().collect())
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        simplify::mul(factors.into_iter().collect())
    }

    /// Simultaneous replacement of symbols followed by simplification.
    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        simplify(&self.replace(bindings))
    }

    fn replace(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        match self.node() {
            Node::Num(_) => self.clone(),
            Node::Sym(s) => bindings.get(s).cloned().unwrap_or_else(|| self.clone()),
            Node::Add(v) => Expr::from_node(Node::Add(v.iter().map(|c| c.replace(bindings)).collect())),
            Node::Mul(v) => Expr::from_node(Node::Mul(v.iter().map(|c| c.replace(bindings)).collect())),
            Node::Div(a, b) => Expr::from_node(Node::Div(a.replace(bindings), b.replace(bindings))),
            Node::Pow(a, b) => Expr::from_node(Node::Pow(a.replace(bindings), b.replace(bindings))),
            Node::Neg(a) => Expr::from_node(Node::Neg(a.replace(bindings))),
            Node::Func(f, a) => Expr::from_node(Node::Func(*f, a.replace(bindings))),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }
}

/// Convenience: substitute with string keys.
pub fn substitute(e: &Expr, bindings: &[(&str, Expr)]) -> Expr {
    let map = bindings
        .iter()
        .map(|(k, v)| (Symbol::new(k).expect("binding name in alphabet"), v.clone()))
        .collect();
    e.substitute(&map)
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<&Expr> for Expr {
    fn from(e: &Expr) -> Self {
        e.clone()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_string(self))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl ops::$trait<i64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, Expr::int(rhs))
            }
        }
        impl ops::$trait<i64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: i64) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), Expr::int(rhs))
            }
        }
        impl ops::$trait<Expr> for i64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::int(self), rhs)
            }
        }
        impl ops::$trait<&Expr> for i64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::int(self), rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| simplify::add(vec![a, b]));
binop!(Sub, sub, |a, b| simplify::add(vec![
    a,
    simplify::mul(vec![Expr::int(-1), b])
]));
binop!(Mul, mul, |a, b| simplify::mul(vec![a, b]));
binop!(Div, div, |a, b| simplify::mul(vec![
    a,
    simplify::pow(b, Expr::int(-1))
]));

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        simplify::mul(vec![Expr::int(-1), self])
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        simplify::mul(vec![Expr::int(-1), self.clone()])
    }
}
