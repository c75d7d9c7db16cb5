//! Recursive-descent parser for the expression grammar (see `docs/grammar.md`).
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! The parser returns the raw tree (with `Div` and `Neg` nodes); printing it
//! gives back the input up to whitespace and redundant parentheses.

use num_bigint::BigInt;
use num_traits::Num;

use super::{Expr, ExprError, Func, Node, Rational, Symbol};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(Rational),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lit = &text[start..i];
            out.push((Tok::Number(decimal(lit, start)?), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ExprError::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

fn decimal(lit: &str, pos: usize) -> Result<Rational, ExprError> {
    let bad = || ExprError::Syntax {
        pos,
        msg: format!("malformed number `{lit}`"),
    };
    let (int, frac) = match lit.split_once('.') {
        Some((i, f)) => (i, f),
        None => (lit, ""),
    };
    if (int.is_empty() && frac.is_empty()) || frac.contains('.') {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let numer = BigInt::from_str_radix(&digits, 10).map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10u32), frac.len());
    Ok(Rational::new(numer, denom))
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.len)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                pos: self.offset(),
                msg: format!("expected `{c}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let first = self.term()?;
        let mut terms = vec![first];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                let t = self.term()?;
                terms.push(Expr::from_node(Node::Neg(t)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::from_node(Node::Add(terms))
        })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        // factors of the product currently being accumulated
        let mut run: Vec<Expr> = Vec::new();
        loop {
            if self.eat('*') {
                if run.is_empty() {
                    run.push(acc.clone());
                }
                run.push(self.unary()?);
                acc = Expr::from_node(Node::Mul(run.clone()));
            } else if self.eat('/') {
                let d = self.unary()?;
                acc = Expr::from_node(Node::Div(acc, d));
                run.clear();
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Expr::from_node(Node::Neg(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::from_node(Node::Pow(base, exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let pos = self.offset();
        match self.peek().cloned() {
            Some(Tok::Number(r)) => {
                self.pos += 1;
                Ok(Expr::num(r))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::from_node(Node::Func(f, arg)));
                }
                let sym = Symbol::new(&name)
                    .map_err(|_| ExprError::UnknownIdentifier { name, pos })?;
                Ok(Expr::from_node(Node::Sym(sym)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Op(c)) => Err(ExprError::Syntax {
                pos,
                msg: format!("unexpected `{c}`"),
            }),
            None => Err(ExprError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parse an expression. The returned tree is not simplified.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(ExprError::Syntax {
            pos: p.offset(),
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_with_symbolic_exponent() {
        let e = parse("t^(1-beta)").unwrap();
        match e.node() {
            Node::Pow(b, x) => {
                assert_eq!(b, &Expr::sym("t"));
                assert_eq!(x.to_string(), "1 - beta");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_product() {
        let e = parse("6*u*u_x").unwrap();
        match e.node() {
            Node::Mul(fs) => {
                assert_eq!(fs.len(), 3);
                assert_eq!(fs[0], Expr::int(6));
                assert_eq!(fs[2], Expr::sym("u_x"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("1.7").unwrap(), Expr::rat(17, 10));
        assert_eq!(parse(".5").unwrap(), Expr::rat(1, 2));
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse("u + foo").unwrap_err(),
            ExprError::UnknownIdentifier {
                name: "foo".into(),
                pos: 4
            }
        );
        match parse("u + (x").unwrap_err() {
            ExprError::Syntax { pos, .. } => assert_eq!(pos, 6),
            e => panic!("{e}"),
        }
        assert!(matches!(parse("2 $ 3"), Err(ExprError::Syntax { pos: 2, .. })));
        assert!(matches!(parse("1.2.3"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("u u"), Err(ExprError::Syntax { .. })));
    }
}
