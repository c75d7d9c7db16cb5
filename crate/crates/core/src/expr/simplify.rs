//! Canonical simplification.
//!
//! Canonical trees contain no `Div` or `Neg` nodes. Sums and products are
//! flattened and sorted under the derived total order on [`Node`]; a product
//! carries at most one rational coefficient, in front; like terms and like
//! bases are merged. A rational coefficient multiplying a single sum is
//! distributed over it. Sums are otherwise never expanded.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use super::{Expr, Func, Node, Rational};

pub fn simplify(e: &Expr) -> Expr {
    match e.node() {
        Node::Num(_) | Node::Sym(_) => e.clone(),
        Node::Add(ts) => add(ts.iter().map(simplify).collect()),
        Node::Mul(fs) => mul(fs.iter().map(simplify).collect()),
        Node::Div(a, b) => mul(vec![simplify(a), pow(simplify(b), Expr::int(-1))]),
        Node::Pow(b, x) => pow(simplify(b), simplify(x)),
        Node::Neg(a) => mul(vec![Expr::int(-1), simplify(a)]),
        Node::Func(f, a) => func(*f, simplify(a)),
    }
}

fn split_coefficient(e: &Expr) -> (Rational, Expr) {
    match e.node() {
        Node::Num(r) => (r.clone(), Expr::one()),
        Node::Mul(fs) => match fs[0].node() {
            Node::Num(r) => {
                let rest = if fs.len() == 2 {
                    fs[1].clone()
                } else {
                    Expr::from_node(Node::Mul(fs[1..].to_vec()))
                };
                (r.clone(), rest)
            }
            _ => (Rational::one(), e.clone()),
        },
        _ => (Rational::one(), e.clone()),
    }
}

fn with_coefficient(c: Rational, rest: Expr) -> Expr {
    if rest.is_one() {
        return Expr::num(c);
    }
    if c.is_one() {
        return rest;
    }
    let mut fs = vec![Expr::num(c)];
    match rest.node() {
        Node::Mul(inner) => fs.extend(inner.iter().cloned()),
        _ => fs.push(rest),
    }
    Expr::from_node(Node::Mul(fs))
}

pub fn add(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t.node() {
            Node::Add(inner) => flat.extend(inner.iter().cloned()),
            _ => flat.push(t),
        }
    }
    let mut constant = Rational::zero();
    let mut groups: BTreeMap<Expr, Rational> = BTreeMap::new();
    for t in flat {
        if let Node::Num(r) = t.node() {
            constant += r;
            continue;
        }
        let (c, rest) = split_coefficient(&t);
        *groups.entry(rest).or_insert_with(Rational::zero) += c;
    }
    let mut out: Vec<Expr> = groups
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(rest, c)| with_coefficient(c, rest))
        .collect();
    if !constant.is_zero() {
        out.push(Expr::num(constant));
    }
    out.sort();
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::from_node(Node::Add(out)),
    }
}

pub fn mul(factors: Vec<Expr>) -> Expr {
    let mut pending = factors;
    let mut coeff = Rational::one();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
        let mut stack = pending;
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Mul(inner) => stack.extend(inner.iter().cloned()),
                Node::Num(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= r;
                }
                Node::Add(_) => {
                    let (c, a) = content(&f);
                    coeff *= c;
                    bases.entry(a).or_default().push(Expr::one());
                }
                Node::Pow(b, x) => match (b.node(), x.as_num().and_then(|n| n.to_integer().to_i32())) {
                    (Node::Add(_), Some(n)) if x.is_integer() => {
                        let (c, a) = content(b);
                        coeff *= Pow::pow(&c, n);
                        bases.entry(a).or_default().push(x.clone());
                    }
                    _ => bases.entry(b.clone()).or_default().push(x.clone()),
                },
                _ => bases.entry(f).or_default().push(Expr::one()),
            }
        }
        let mut out = Vec::new();
        let mut again = Vec::new();
        for (base, exps) in bases {
            let exponent = if exps.len() == 1 {
                exps.into_iter().next().unwrap()
            } else {
                add(exps)
            };
            let p = pow(base, exponent);
            if let Node::Pow(b, _) = p.node() {
                if b.is_zero() {
                    // a division by zero makes the whole product undefined
                    return Expr::from_node(Node::Pow(Expr::zero(), Expr::int(-1)));
                }
            }
            match p.node() {
                Node::Num(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= r;
                }
                Node::Mul(_) if rounds < 8 => again.push(p),
                _ => out.push(p),
            }
        }
        if again.is_empty() {
            return finish_product(coeff, out);
        }
        again.extend(out);
        pending = again;
    }
}

/// Splits a sum into `c * A` where the term of `A` with the smallest
/// non-numeric part has coefficient 1.
fn content(sum: &Expr) -> (Rational, Expr) {
    let Node::Add(ts) = sum.node() else {
        return (Rational::one(), sum.clone());
    };
    let parts: Vec<(Rational, Expr)> = ts.iter().map(split_coefficient).collect();
    let c = parts.iter().min_by(|a, b| a.1.cmp(&b.1)).unwrap().0.clone();
    if c.is_one() {
        return (c, sum.clone());
    }
    let inv = c.recip();
    let scaled = parts.into_iter().map(|(k, r)| with_coefficient(k * &inv, r)).collect();
    (c, add(scaled))
}

fn finish_product(coeff: Rational, mut out: Vec<Expr>) -> Expr {
    if coeff.is_zero() {
        return Expr::zero();
    }
    out.sort();
    if out.is_empty() {
        return Expr::num(coeff);
    }
    if out.len() == 1 {
        if coeff.is_one() {
            return out.pop().unwrap();
        }
        if let Node::Add(terms) = out[0].node() {
            return add(
                terms
                    .iter()
                    .map(|t| {
                        let (c, rest) = split_coefficient(t);
                        with_coefficient(c * &coeff, rest)
                    })
                    .collect(),
            );
        }
    }
    if !coeff.is_one() {
        out.insert(0, Expr::num(coeff));
    }
    Expr::from_node(Node::Mul(out))
}

pub fn is_positive(e: &Expr) -> bool {
    match e.node() {
        Node::Num(r) => r.is_positive(),
        Node::Sym(s) => s.is_positive(),
        Node::Pow(b, _) => is_positive(b),
        Node::Mul(fs) | Node::Add(fs) => fs.iter().all(is_positive),
        Node::Func(Func::Exp, _) => true,
        Node::Func(Func::Sqrt, a) => is_positive(a),
        _ => false,
    }
}

fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.nth_root(k);
    if Pow::pow(&r, k) == *n {
        Some(r)
    } else {
        None
    }
}

fn rational_power(base: &Rational, exp: &Rational) -> Option<Rational> {
    let num = exp.numer().to_i32()?;
    let den = exp.denom().to_u32()?;
    if num.unsigned_abs() > 64 {
        return None;
    }
    let root = if den == 1 {
        base.clone()
    } else {
        if !base.is_positive() {
            return None;
        }
        Rational::new(exact_root(base.numer(), den)?, exact_root(base.denom(), den)?)
    };
    if root.is_zero() && num < 0 {
        return None;
    }
    Some(Pow::pow(&root, num))
}

pub fn pow(base: Expr, exponent: Expr) -> Expr {
    if exponent.is_zero() {
        return Expr::one();
    }
    if exponent.is_one() {
        return base;
    }
    match base.node() {
        Node::Num(r) => {
            if r.is_one() {
                return base;
            }
            if r.is_zero() {
                match exponent.as_num() {
                    Some(x) if x.is_positive() => return Expr::zero(),
                    Some(_) => return Expr::from_node(Node::Pow(base, Expr::int(-1))),
                    None => {}
                }
            } else if let Some(x) = exponent.as_num() {
                if let Some(v) = rational_power(r, x) {
                    return Expr::num(v);
                }
            }
        }
        Node::Pow(b0, e0) => {
            if exponent.is_integer() || is_positive(b0) {
                return pow(b0.clone(), mul(vec![e0.clone(), exponent]));
            }
        }
        Node::Add(_) if exponent.is_integer() => {
            let (c, a) = content(&base);
            let n = exponent.as_num().and_then(|n| n.to_integer().to_i32());
            if let (false, Some(n)) = (c.is_one(), n) {
                let scale = Expr::num(Pow::pow(&c, n));
                return mul(vec![scale, Expr::from_node(Node::Pow(a, exponent))]);
            }
        }
        Node::Mul(fs) => {
            if exponent.is_integer() {
                return mul(fs.iter().map(|f| pow(f.clone(), exponent.clone())).collect());
            }
            let (pos, rest): (Vec<Expr>, Vec<Expr>) = fs.iter().cloned().partition(is_positive);
            if !pos.is_empty() {
                let mut parts: Vec<Expr> =
                    pos.into_iter().map(|f| pow(f, exponent.clone())).collect();
                if !rest.is_empty() {
                    let rest = if rest.len() == 1 {
                        rest.into_iter().next().unwrap()
                    } else {
                        Expr::from_node(Node::Mul(rest))
                    };
                    parts.push(Expr::from_node(Node::Pow(rest, exponent)));
                }
                return mul(parts);
            }
        }
        _ => {}
    }
    Expr::from_node(Node::Pow(base, exponent))
}

pub fn func(f: Func, arg: Expr) -> Expr {
    match (f, arg.node()) {
        (Func::Sqrt, _) => return pow(arg, Expr::rat(1, 2)),
        (Func::Exp, Node::Num(r)) if r.is_zero() => return Expr::one(),
        (Func::Ln, Node::Num(r)) if r.is_one() => return Expr::zero(),
        (Func::Ln, Node::Func(Func::Exp, inner)) => return inner.clone(),
        (Func::Sin, Node::Num(r)) if r.is_zero() => return Expr::zero(),
        (Func::Cos, Node::Num(r)) if r.is_zero() => return Expr::one(),
        _ => {}
    }
    Expr::from_node(Node::Func(f, arg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn s(text: &str) -> Expr {
        simplify(&parse(text).unwrap())
    }

    #[test]
    fn identity_elements() {
        assert_eq!(s("u + 0*x"), Expr::sym("u"));
        assert_eq!(s("1*u*1"), Expr::sym("u"));
        assert_eq!(s("u^1"), Expr::sym("u"));
        assert_eq!(s("x^0"), Expr::one());
    }

    #[test]
    fn exponent_addition() {
        assert_eq!(s("t^(1-beta)*t^beta"), Expr::sym("t"));
        assert_eq!(s("x^(1-alpha)*x^(-alpha)*x^(2*alpha)"), Expr::sym("x"));
    }

    #[test]
    fn cancellation() {
        assert!(s("(2*W - omega^alpha/alpha) - 2*W + omega^alpha/alpha").is_zero());
        assert!(s("-(a - b) + a - b").is_zero());
    }

    #[test]
    fn numeric_folding() {
        assert_eq!(s("2^3/4"), Expr::int(2));
        assert_eq!(s("4^(1/2)"), Expr::int(2));
        assert_eq!(s("(8/27)^(2/3)"), Expr::rat(4, 9));
        assert_eq!(s("2^(1/2)*2^(1/2)"), Expr::int(2));
        // no exact root: left alone
        assert_eq!(s("3^(1/2)").to_string(), "3^0.5");
    }

    #[test]
    fn power_rules_respect_sign() {
        // t is positive, u is not
        assert_eq!(s("(t^2)^(1/2)"), Expr::sym("t"));
        assert_ne!(s("(u^2)^(1/2)"), Expr::sym("u"));
        assert_eq!(s("((alpha*s)^(1/alpha))^alpha/alpha"), Expr::sym("s"));
    }

    #[test]
    fn idempotent_on_samples() {
        for text in [
            "x^(1-alpha)*(-(1-alpha)*x^(-alpha)*u_x) + (1-alpha)*x^(1-alpha)*x^(-alpha)*u_x",
            "6*t^beta*x^(1-alpha)/beta",
            "(1-alpha)*(1-2*alpha)*(1-3*alpha)*x^(-3*alpha)*u_x",
            "-(c1*t^beta/beta - c2)*u + c1*x^alpha/(a*alpha)",
        ] {
            let once = s(text);
            assert_eq!(simplify(&once), once, "{text}");
        }
    }
}
