//! Infix printer. Output parses back to a tree that prints identically.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{Expr, Node, Rational};

const SUM: u8 = 1;
const PROD: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

pub fn to_string(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

/// Decimal expansion if the denominator is of the form 2^a 5^b.
fn decimal_digits(r: &Rational) -> Option<String> {
    let mut d = r.denom().clone();
    let mut places = 0usize;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut n2, mut n5) = (0usize, 0usize);
    while d.is_even() {
        d /= &two;
        n2 += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        n5 += 1;
    }
    if !d.is_one() {
        return None;
    }
    places = places.max(n2).max(n5);
    let scaled = r.abs() * Rational::from_integer(num_traits::pow(BigInt::from(10), places));
    let digits = scaled.to_integer().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = digits.split_at(digits.len() - places);
    let body = if places == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    };
    Some(if r.is_negative() { format!("-{body}") } else { body })
}

fn num_prec(r: &Rational) -> u8 {
    if decimal_digits(r).is_some() {
        if r.is_negative() {
            UNARY
        } else {
            ATOM
        }
    } else {
        PROD
    }
}

fn write_num(r: &Rational, out: &mut String) {
    match decimal_digits(r) {
        Some(s) => out.push_str(&s),
        None => {
            out.push_str(&r.numer().to_string());
            out.push('/');
            out.push_str(&r.denom().to_string());
        }
    }
}

fn negative_exponent(e: &Expr) -> Option<(Expr, Rational)> {
    if let Node::Pow(b, x) = e.node() {
        if let Some(r) = x.as_num() {
            if r.is_negative() {
                return Some((b.clone(), -r.clone()));
            }
        }
    }
    None
}

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Num(r) => num_prec(r),
        Node::Sym(_) | Node::Func(..) => ATOM,
        Node::Add(_) => SUM,
        Node::Mul(_) | Node::Div(..) => PROD,
        Node::Neg(_) => UNARY,
        Node::Pow(..) => {
            if negative_exponent(e).is_some() {
                PROD
            } else {
                POW
            }
        }
    }
}

fn write_at(e: &Expr, min: u8, out: &mut String) {
    if prec(e) < min {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

/// For a sum term printed after " - ": the positive counterpart.
fn negated(t: &Expr) -> Option<Expr> {
    match t.node() {
        Node::Neg(a) => Some(a.clone()),
        Node::Num(r) if r.is_negative() => Some(Expr::num(-r.clone())),
        Node::Mul(fs) => match fs[0].node() {
            Node::Num(r) if r.is_negative() => {
                let c = -r.clone();
                let mut rest = Vec::with_capacity(fs.len());
                if !c.is_one() {
                    rest.push(Expr::num(c));
                }
                rest.extend(fs[1..].iter().cloned());
                Some(if rest.len() == 1 {
                    rest.pop().unwrap()
                } else {
                    Expr::from_node(Node::Mul(rest))
                })
            }
            _ => None,
        },
        _ => None,
    }
}

fn write_power(base: &Expr, exp: &Expr, out: &mut String) {
    write_at(base, ATOM, out);
    out.push('^');
    write_at(exp, POW, out);
}

fn write_product(fs: &[Expr], out: &mut String) {
    let mut numer: Vec<String> = Vec::new();
    let mut denom: Vec<(String, u8)> = Vec::new();
    let mut sign = "";
    let mut rest = fs;
    if let Node::Num(r) = fs[0].node() {
        if !r.is_integer() || r == &-Rational::one() {
            // split p/q into the numerator and denominator lists
            if r.is_negative() {
                sign = "-";
            }
            let p = r.numer().abs();
            if !p.is_one() {
                numer.push(p.to_string());
            }
            if !r.denom().is_one() {
                denom.push((r.denom().to_string(), ATOM));
            }
            rest = &fs[1..];
        }
    }
    let first_slot = numer.is_empty();
    for (i, f) in rest.iter().enumerate() {
        if let Some((b, k)) = negative_exponent(f) {
            let mut s = String::new();
            if k.is_one() {
                write(&b, &mut s);
                denom.push((s, prec(&b)));
            } else {
                write_power(&b, &Expr::num(k), &mut s);
                denom.push((s, POW));
            }
            continue;
        }
        let mut s = String::new();
        // only the leading factor may be a product-level or unary expression
        let min = if first_slot && i == 0 && sign.is_empty() {
            PROD
        } else {
            POW
        };
        write_at(f, min, &mut s);
        numer.push(s);
    }
    out.push_str(sign);
    if numer.is_empty() {
        out.push('1');
    } else {
        out.push_str(&numer.join("*"));
    }
    if !denom.is_empty() {
        out.push('/');
        let parts: Vec<String> = denom
            .into_iter()
            .map(|(s, p)| if p >= POW { s } else { format!("({s})") })
            .collect();
        if parts.len() == 1 {
            out.push_str(&parts[0]);
        } else {
            out.push('(');
            out.push_str(&parts.join("*"));
            out.push(')');
        }
    }
}

fn write(e: &Expr, out: &mut String) {
    match e.node() {
        Node::Num(r) => write_num(r, out),
        Node::Sym(s) => out.push_str(s.name()),
        Node::Func(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write(a, out);
            out.push(')');
        }
        Node::Add(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_at(t, PROD, out);
                    continue;
                }
                match negated(t) {
                    Some(pos) => {
                        out.push_str(" - ");
                        write_at(&pos, PROD, out);
                    }
                    None => {
                        out.push_str(" + ");
                        write_at(t, PROD, out);
                    }
                }
            }
        }
        Node::Mul(fs) => write_product(fs, out),
        Node::Div(a, b) => {
            write_at(a, PROD, out);
            out.push('/');
            write_at(b, POW, out);
        }
        Node::Pow(b, x) => match negative_exponent(e) {
            Some((b, k)) => {
                out.push_str("1/");
                if k.is_one() {
                    write_at(&b, POW, out);
                } else {
                    write_power(&b, &Expr::num(k), out);
                }
            }
            None => write_power(b, x, out),
        },
        Node::Neg(a) => {
            out.push('-');
            write_at(a, UNARY, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, simplify};

    #[test]
    fn raw_round_trip() {
        for text in [
            "u_xxx + 6*u*u_x",
            "t^(1-beta)",
            "-u + 3",
            "x^(1 - alpha)*(-(1 - alpha)*x^(-alpha)*u_x)",
            "-6*c3*t^beta/beta",
            "(a + b)/(c1*c2)",
            "2^-1",
            "sqrt(1 + t^2)",
            "1.25*x",
            "--u",
        ] {
            let once = to_string(&parse(text).unwrap());
            let twice = to_string(&parse(&once).unwrap());
            assert_eq!(once, twice, "{text}");
        }
    }

    #[test]
    fn canonical_forms_print_readably() {
        let p = |s: &str| simplify(&parse(s).unwrap()).to_string();
        assert_eq!(p("6*u*u_x + u_xxx"), "u_xxx + 6*u*u_x");
        assert_eq!(p("x/(2*alpha)"), "x/(2*alpha)");
        assert_eq!(p("-3*t/(2*beta)"), "-3*t/(2*beta)");
        assert_eq!(p("a - b"), "a - b");
        assert_eq!(p("t^(-1)"), "1/t");
        assert_eq!(p("1/3"), "1/3");
        assert_eq!(p("x*(1/3)"), "x/3");
        assert_eq!(p("0.5*x"), "x/2");
    }
}
