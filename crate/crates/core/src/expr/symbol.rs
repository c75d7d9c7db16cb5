//! The fixed symbol alphabet.
//!
//! Identifiers fall into four groups:
//!
//! * independent and similarity variables: `t`, `x`, `zeta`, `omega`, `s`, `z`;
//! * the dependent variable `u` and its jet coordinates `u_x`, `u_xt`, ... (any
//!   number of `x` letters followed by any number of `t` letters);
//! * reduced unknowns `Psi`, `Phi`, `W`, `Theta` and their derivative symbols
//!   `Psi_1`, `Psi_2`, ... (k-th derivative with respect to the reduced variable);
//! * parameters `alpha`, `beta`, `a`, `b`, `gamma`, `mu`, `sigma`, `c1`..`c5`,
//!   `epsilon`, `p`.

use std::fmt;
use std::sync::Arc;

use super::ExprError;

const PLAIN_VARIABLES: &[&str] = &["t", "x", "u", "zeta", "omega", "s", "z"];
const UNKNOWNS: &[&str] = &["Psi", "Phi", "W", "Theta"];
const PARAMETERS: &[&str] = &[
    "alpha", "beta", "a", "b", "gamma", "mu", "sigma", "c1", "c2", "c3", "c4", "c5", "epsilon",
    "p",
];

/// Variables that only take strictly positive values in this toolkit.
/// Power-of-power and power-of-product rewrites rely on this.
const POSITIVE: &[&str] = &["t", "x", "zeta", "omega", "s", "alpha", "beta"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Variable,
    Jet { nx: usize, nt: usize },
    Unknown { derivative: usize },
    Parameter,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Result<Self, ExprError> {
        if classify(name).is_some() {
            Ok(Symbol(Arc::from(name)))
        } else {
            Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                pos: 0,
            })
        }
    }

    /// Jet coordinate `u_{x^nx t^nt}`; `(0, 0)` is `u` itself.
    pub fn jet(nx: usize, nt: usize) -> Self {
        if nx == 0 && nt == 0 {
            return Symbol(Arc::from("u"));
        }
        let mut name = String::from("u_");
        name.extend(std::iter::repeat('x').take(nx));
        name.extend(std::iter::repeat('t').take(nt));
        Symbol(Arc::from(name.as_str()))
    }

    /// `k`-th derivative symbol of a reduced unknown (`k = 0` is the unknown itself).
    pub fn unknown(base: &str, k: usize) -> Self {
        debug_assert!(UNKNOWNS.contains(&base));
        if k == 0 {
            Symbol(Arc::from(base))
        } else {
            Symbol(Arc::from(format!("{base}_{k}").as_str()))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> SymbolKind {
        classify(&self.0).expect("symbols are validated at construction")
    }

    pub fn is_parameter(&self) -> bool {
        matches!(self.kind(), SymbolKind::Parameter)
    }

    pub fn is_positive(&self) -> bool {
        POSITIVE.contains(&&*self.0)
    }

    pub fn jet_orders(&self) -> Option<(usize, usize)> {
        match self.kind() {
            SymbolKind::Jet { nx, nt } => Some((nx, nt)),
            _ => None,
        }
    }

    /// For `Psi_k`-style symbols: `(base, k)`.
    pub fn unknown_parts(&self) -> Option<(&str, usize)> {
        match self.kind() {
            SymbolKind::Unknown { derivative } => {
                let base = self.0.split('_').next().unwrap_or(&self.0);
                Some((base, derivative))
            }
            _ => None,
        }
    }
}

fn classify(name: &str) -> Option<SymbolKind> {
    if name == "u" {
        return Some(SymbolKind::Jet { nx: 0, nt: 0 });
    }
    if PLAIN_VARIABLES.contains(&name) {
        return Some(SymbolKind::Variable);
    }
    if PARAMETERS.contains(&name) {
        return Some(SymbolKind::Parameter);
    }
    if UNKNOWNS.contains(&name) {
        return Some(SymbolKind::Unknown { derivative: 0 });
    }
    if let Some(rest) = name.strip_prefix("u_") {
        let nx = rest.chars().take_while(|&c| c == 'x').count();
        let nt = rest[nx..].chars().take_while(|&c| c == 't').count();
        if nx + nt == rest.len() && !rest.is_empty() {
            return Some(SymbolKind::Jet { nx, nt });
        }
        return None;
    }
    if let Some((base, k)) = name.split_once('_') {
        let digits = !k.is_empty() && k.bytes().all(|c| c.is_ascii_digit());
        if UNKNOWNS.contains(&base) && digits && !k.starts_with('0') {
            if let Ok(k) = k.parse::<usize>() {
                return Some(SymbolKind::Unknown { derivative: k });
            }
        }
    }
    None
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
