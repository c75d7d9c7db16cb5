//! Classical partial differentiation. Every symbol other than `v` is held
//! fixed, jet coordinates included.

use super::{simplify, Expr, Func, Node, Symbol};

pub fn diff(e: &Expr, v: &Symbol) -> Expr {
    simplify(&d(&simplify(e), v))
}

fn d(e: &Expr, v: &Symbol) -> Expr {
    if !e.contains(v) {
        return Expr::zero();
    }
    match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Sym(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(ts) => Expr::sum(ts.iter().map(|t| d(t, v))),
        Node::Mul(fs) => Expr::sum((0..fs.len()).filter(|&i| fs[i].contains(v)).map(|i| {
            let mut parts: Vec<Expr> = fs.clone();
            parts[i] = d(&fs[i], v);
            Expr::product(parts)
        })),
        Node::Div(a, b) => d(&(a / b), v),
        Node::Neg(a) => -d(a, v),
        Node::Pow(b, x) => {
            if !x.contains(v) {
                // x * b^(x-1) * b'
                Expr::product([x.clone(), b.pow(x - 1), d(b, v)])
            } else {
                // b^x * (x' ln b + x b'/b)
                let lnb = Expr::apply(Func::Ln, b.clone());
                e * (d(x, v) * lnb + x * d(b, v) / b)
            }
        }
        Node::Func(f, a) => {
            let inner = d(a, v);
            let outer = match f {
                Func::Sin => Expr::apply(Func::Cos, a.clone()),
                Func::Cos => -Expr::apply(Func::Sin, a.clone()),
                Func::Exp => e.clone(),
                Func::Ln => a.recip(),
                Func::Sqrt => Expr::rat(1, 2) * a.pow(Expr::rat(-1, 2)),
            };
            outer * inner
        }
    }
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
    fn power_rule() {
        assert_eq!(diff(&s("t^p"), &sym("t")), s("p*t^(p-1)"));
        assert_eq!(diff(&s("x^(1-alpha)"), &sym("x")), s("(1-alpha)*x^(-alpha)"));
    }

    #[test]
    fn jet_symbols_are_independent() {
        assert_eq!(diff(&s("6*u*u_x"), &sym("u")), s("6*u_x"));
        assert_eq!(diff(&s("6*u*u_x"), &sym("u_x")), s("6*u"));
        assert!(diff(&s("u_xx"), &sym("u_x")).is_zero());
    }

    #[test]
    fn elementary_functions() {
        assert_eq!(diff(&s("sin(t^2)"), &sym("t")), s("2*t*cos(t^2)"));
        assert_eq!(diff(&s("ln(1+t)"), &sym("t")), s("1/(1+t)"));
        assert_eq!(diff(&s("exp(2*t)"), &sym("t")), s("2*exp(2*t)"));
    }
}
