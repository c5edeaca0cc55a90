use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};

use super::{ExprError, Func, Node, Rat, ScalarExpr};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rat),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part = &src[start..i];
                let mut frac = "";
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac = &src[fs..i];
                }
                if int_part.is_empty() && frac.is_empty() {
                    return Err(ExprError::Syntax {
                        pos: start,
                        message: "malformed number".into(),
                    });
                }
                let digits = format!("{int_part}{frac}");
                let n: BigInt = digits.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    message: "malformed number".into(),
                })?;
                let d = BigInt::from(10).pow(frac.len() as u32);
                out.push((Tok::Num(Rat::new(n, d)), start));
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ExprError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    names: &'a [String],
}

/// Parses `src` against the coordinate names of a chart.
///
/// Grammar: `expr := term (('+'|'-') term)*`, `term := factor (('*'|'/') factor)*`,
/// `factor := '-' factor | base ('^' ['-'] integer)?`,
/// `base := number | name | func '(' expr ')' | '(' expr ')'`.
pub fn parse(src: &str, names: &[String]) -> Result<ScalarExpr, ExprError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
        end: src.len(),
        names,
    };
    let e = p.expr()?;
    if let Some((t, pos)) = p.toks.get(p.at) {
        return Err(ExprError::Syntax {
            pos: *pos,
            message: format!("unexpected token {t:?}"),
        });
    }
    Ok(e)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn err<T>(&self, message: &str) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), ExprError> {
        if self.peek() == Some(&t) {
            self.at += 1;
            Ok(())
        } else {
            self.err(&format!("expected {t:?}"))
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    terms.push(self.term()?.negated());
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            ScalarExpr::new(Node::Sum(terms))
        })
    }

    fn term(&mut self) -> Result<ScalarExpr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.at += 1;
                    let rhs = self.factor()?;
                    acc = product(acc, rhs);
                }
                Some(Tok::Slash) => {
                    self.at += 1;
                    let pos = self.pos();
                    let rhs = self.factor()?;
                    acc = match (acc.node(), rhs.node()) {
                        (Node::Num(a), Node::Num(b)) => {
                            if b.is_zero() {
                                return Err(ExprError::Syntax {
                                    pos,
                                    message: "division by zero".into(),
                                });
                            }
                            ScalarExpr::num(a / b)
                        }
                        _ => ScalarExpr::new(Node::Quotient(acc, rhs)),
                    };
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<ScalarExpr, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            return Ok(self.factor()?.negated());
        }
        let base = self.base()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.at += 1;
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            true
        } else {
            false
        };
        let e = match self.peek() {
            Some(Tok::Num(c)) if c.is_integer() => c.to_integer(),
            _ => return self.err("exponent must be an integer literal"),
        };
        let e: i32 = match i32::try_from(e) {
            Ok(e) => e,
            Err(_) => return self.err("exponent out of range"),
        };
        self.at += 1;
        let e = if neg { -e } else { e };
        if self.peek() == Some(&Tok::Caret) {
            return self.err("chained exponents need parentheses");
        }
        Ok(match base.node() {
            Node::Num(c) if !(c.is_zero() && e < 0) => ScalarExpr::num(rat_pow(c, e)),
            _ => ScalarExpr::new(Node::Pow(base, e)),
        })
    }

    fn base(&mut self) -> Result<ScalarExpr, ExprError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(c)) => {
                self.at += 1;
                Ok(ScalarExpr::num(c))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(ScalarExpr::coord(i));
                }
                match Func::from_name(&name) {
                    Some(f) if self.peek() == Some(&Tok::LParen) => {
                        self.at += 1;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(ScalarExpr::new(Node::Apply(f, arg)))
                    }
                    _ => Err(ExprError::UnknownIdentifier { name, pos }),
                }
            }
            Some(_) => self.err("expected a number, name or `(`"),
            None => self.err("unexpected end of input"),
        }
    }
}

fn rat_pow(c: &Rat, e: i32) -> Rat {
    let mut r = Rat::one();
    for _ in 0..e.unsigned_abs() {
        r *= c;
    }
    if e < 0 {
        r.recip()
    } else {
        r
    }
}

fn product(a: ScalarExpr, b: ScalarExpr) -> ScalarExpr {
    if let (Node::Num(x), Node::Num(y)) = (a.node(), b.node()) {
        return ScalarExpr::num(x * y);
    }
    let mut fs = match a.node() {
        Node::Product(fs) => fs.clone(),
        _ => vec![a],
    };
    fs.push(b);
    ScalarExpr::new(Node::Product(fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::int;

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse("x1 + * x2", &names()) {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(x1", &names()), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse("x1 $", &names()), Err(ExprError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn decimals_are_exact() {
        let e = parse("0.25", &names()).unwrap();
        assert_eq!(e.node(), &Node::Num(Rat::new(1.into(), 4.into())));
    }

    #[test]
    fn unary_minus_and_powers() {
        let e = parse("-x1^2", &names()).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), -9.0);
        let e = parse("2^-1", &names()).unwrap();
        assert_eq!(e.node(), &Node::Num(Rat::new(1.into(), 2.into())));
        let e = parse("x1^-2", &names()).unwrap();
        assert_eq!(e.eval(&[2.0, 0.0]).unwrap(), 0.25);
        assert_eq!(parse("--3", &names()).unwrap().node(), &Node::Num(int(3)));
    }

    #[test]
    fn function_names_need_call_syntax() {
        assert!(matches!(
            parse("sin", &names()),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(parse("exp(x1) * log(1 + x2^2)", &names()).is_ok());
    }
}
