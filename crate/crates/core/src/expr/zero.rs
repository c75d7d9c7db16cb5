//! Zero recognition: literal zero after simplification, otherwise a seeded
//! random-sampling test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compile, simplify, EvalEnv, Expr, ExprError, Symbol, SymbolKind};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ZeroVerdict {
    /// Simplified to the literal 0.
    Symbolic,
    /// Vanished numerically at every sample.
    Numeric { max_abs: f64, samples: usize },
    NonZero { max_abs: f64 },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroVerdict::NonZero { .. })
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            ZeroVerdict::Symbolic => 0.0,
            ZeroVerdict::Numeric { max_abs, .. } | ZeroVerdict::NonZero { max_abs } => *max_abs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Symbols held at fixed values instead of being sampled.
    pub fixed: EvalEnv,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest {
            samples: 100,
            tol: 1e-9,
            seed: DEFAULT_SEED,
            fixed: EvalEnv::new(),
        }
    }
}

/// Sampling range for a free symbol.
pub fn sample_range(s: &Symbol) -> (f64, f64) {
    match s.kind() {
        SymbolKind::Parameter => match s.name() {
            "alpha" | "beta" => (0.2, 1.0),
            _ => (0.5, 2.0),
        },
        _ if s.is_positive() => (0.2, 3.0),
        _ => (-2.0, 2.0),
    }
}

impl ZeroTest {
    pub fn with_fixed(mut self, fixed: EvalEnv) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn check(&self, e: &Expr) -> Result<ZeroVerdict, ExprError> {
        let e = simplify(e);
        if e.is_zero() {
            return Ok(ZeroVerdict::Symbolic);
        }
        let free: Vec<Symbol> = e
            .free_symbols()
            .into_iter()
            .filter(|s| self.fixed.get(s.name()).is_none())
            .collect();
        let f = compile(&e, &free, &self.fixed)?;
        let ranges: Vec<(f64, f64)> = free.iter().map(sample_range).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut args = vec![0.0; free.len()];
        let mut valid = 0;
        let mut attempts = 0;
        let mut max_abs: f64 = 0.0;
        while valid < self.samples {
            attempts += 1;
            if attempts > 20 * self.samples.max(1) {
                return Err(ExprError::NoValidSamples(e.to_string()));
            }
            for (a, (lo, hi)) in args.iter_mut().zip(&ranges) {
                *a = rng.gen_range(*lo..*hi);
            }
            match f.eval(&args) {
                Ok(v) => {
                    valid += 1;
                    max_abs = max_abs.max(v.abs());
                }
                Err(ExprError::Domain { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        Ok(if max_abs < self.tol {
            ZeroVerdict::Numeric {
                max_abs,
                samples: valid,
            }
        } else {
            ZeroVerdict::NonZero { max_abs }
        })
    }

    pub fn is_zero(&self, e: &Expr) -> bool {
        self.check(e).map(|v| v.is_zero()).unwrap_or(false)
    }
}
