//! Recursive-descent parser for the first-integral grammar.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?            exponent must fold to an integer
//! atom  := number | 'x'<index> | ('exp' | 'log') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are integers or decimals. A minus sign applied directly to a
//! numeric literal, and a quotient of two numeric literals, are folded into a
//! single rational constant; this is how `p/q` literals and negative
//! constants are written.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::Expr;
use crate::error::{Error, Result};
use crate::scalar::Rational;

const MAX_EXPONENT: i64 = 4096;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((start, Tok::Plus)),
            b'-' => out.push((start, Tok::Minus)),
            b'*' => out.push((start, Tok::Star)),
            b'/' => out.push((start, Tok::Slash)),
            b'^' => out.push((start, Tok::Caret)),
            b'(' => out.push((start, Tok::LParen)),
            b')' => out.push((start, Tok::RParen)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part = &text[start..i];
                let mut frac_part = "";
                if i < bytes.len() && bytes[i] == b'.' {
                    let fs = i + 1;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac_part = &text[fs..i];
                }
                if int_part.is_empty() && frac_part.is_empty() {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: "lone '.'".into(),
                    });
                }
                let digits = format!("{int_part}{frac_part}");
                let num: BigInt = digits.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: "bad number".into(),
                })?;
                let den = BigInt::from(10u8).pow(frac_part.len() as u32);
                out.push((start, Tok::Num(Rational::new(num, den))));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character {:?}", text[start..].chars().next().unwrap()),
                })
            }
        }
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    arity: usize,
}

/// A parsed node plus whether it is a bare numeric literal (eligible for
/// literal folding).
type Node = (Expr, bool);

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(Error::Syntax {
                pos: self.pos(),
                msg: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let first = self.term()?;
        let mut terms = vec![first];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    let (t, lit) = self.term()?;
                    let negated = match t {
                        Expr::Const(c) if lit => Expr::Const(-c),
                        other => Expr::Neg(Box::new(other)),
                    };
                    terms.push((negated, false));
                }
                _ => break,
            }
        }
        if terms.len() == 1 {
            return Ok(terms.pop().unwrap());
        }
        Ok((Expr::Sum(terms.into_iter().map(|(e, _)| e).collect()), false))
    }

    fn term(&mut self) -> Result<Node> {
        let (first, mut lit) = self.unary()?;
        let mut factors = vec![first];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let (f, _) = self.unary()?;
                    factors.push(f);
                    lit = false;
                }
                Tok::Slash => {
                    self.bump();
                    let (den, den_lit) = self.unary()?;
                    let num = if factors.len() == 1 {
                        factors.pop().unwrap()
                    } else {
                        Expr::Product(std::mem::take(&mut factors))
                    };
                    let folded = match (&num, &den) {
                        (Expr::Const(a), Expr::Const(b)) if lit && den_lit && !b.is_zero() => {
                            Some(Expr::Const(a / b))
                        }
                        _ => None,
                    };
                    match folded {
                        Some(c) => factors.push(c),
                        None => {
                            factors.push(Expr::Quotient(Box::new(num), Box::new(den)));
                            lit = false;
                        }
                    }
                }
                _ => break,
            }
        }
        if factors.len() == 1 {
            return Ok((factors.pop().unwrap(), lit));
        }
        Ok((Expr::Product(factors), false))
    }

    fn unary(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let (inner, lit) = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) if lit => (Expr::Const(-c), true),
                other => (Expr::Neg(Box::new(other)), false),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let (base, lit) = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok((base, lit));
        }
        self.bump();
        let exp_pos = self.pos();
        let (exponent, _) = self.unary()?;
        let k = exponent
            .const_value()
            .filter(|v| v.is_integer())
            .and_then(|v| v.to_integer().to_i64())
            .ok_or(Error::NonIntegerExponent { pos: exp_pos })?;
        if k.abs() > MAX_EXPONENT {
            return Err(Error::Syntax {
                pos: exp_pos,
                msg: format!("exponent {k} exceeds {MAX_EXPONENT}"),
            });
        }
        Ok((Expr::Pow(Box::new(base), k), false))
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(q) => Ok((Expr::Const(q), true)),
            Tok::LParen => {
                let (e, _) = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok((e, false))
            }
            Tok::Ident(name) => self.ident(pos, name),
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn ident(&mut self, pos: usize, name: String) -> Result<Node> {
        if name == "exp" || name == "log" {
            if *self.peek() != Tok::LParen {
                return Err(Error::Syntax {
                    pos: self.pos(),
                    msg: format!("expected '(' after {name}"),
                });
            }
            self.bump();
            let (arg, _) = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            let node = if name == "exp" {
                Expr::Exp(Box::new(arg))
            } else {
                Expr::Log(Box::new(arg))
            };
            return Ok((node, false));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index = digits.parse::<usize>().unwrap_or(usize::MAX);
                if index == 0 || index > self.arity {
                    return Err(Error::VariableOutOfRange {
                        pos,
                        index,
                        arity: self.arity,
                    });
                }
                return Ok((Expr::Var(index), false));
            }
        }
        Err(Error::UnknownIdentifier { pos, name })
    }
}

/// Parses `text` as an expression in the variables `x1..x<arity>`.
pub fn parse(text: &str, arity: usize) -> Result<Expr> {
    if arity < 1 {
        return Err(Error::Domain("arity must be at least 1".into()));
    }
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, arity };
    let (e, _) = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}
