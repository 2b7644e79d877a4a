//! Expression trees for first integrals.
//!
//! Trees are immutable values. The parser keeps the written structure (no
//! folding beyond numeric literals); the builder functions (`Expr::sum`,
//! `Expr::product`, ...) fold constants and flatten nested sums/products,
//! which is all the simplification this crate does.

mod diff;
mod eval;
mod parse;
pub mod poly;
mod taylor;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::scalar::Rational;

pub use diff::{diff, gradient, vars_used};
pub use eval::{eval, eval_mode, magnitude_bound, Value};
pub use parse::parse;
pub use poly::TruncatedPoly;
pub use taylor::taylor;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    /// `x_j`, with `j >= 1`.
    Var(usize),
    Const(Rational),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn var(j: usize) -> Expr {
        assert!(j >= 1, "variables are numbered from 1");
        Expr::Var(j)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Rational::from_integer(BigInt::from(v)))
    }

    pub fn constant(q: Rational) -> Expr {
        Expr::Const(q)
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    /// Folding sum: flattens nested sums and merges constants.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        let mut acc = Rational::zero();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t {
                Expr::Sum(inner) => stack.extend(inner.into_iter().rev()),
                Expr::Const(c) => acc += c,
                other => out.push(other),
            }
        }
        if !acc.is_zero() {
            out.push(Expr::Const(acc));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Sum(out),
        }
    }

    /// Folding product: flattens nested products, multiplies constants,
    /// absorbs zero and drops unit factors.
    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        let mut acc = Rational::one();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f {
                Expr::Product(inner) => stack.extend(inner.into_iter().rev()),
                Expr::Const(c) => acc *= c,
                Expr::Neg(inner) => {
                    acc = -acc;
                    stack.push(*inner);
                }
                other => out.push(other),
            }
        }
        if acc.is_zero() {
            return Expr::zero();
        }
        let body = match out.len() {
            0 => return Expr::Const(acc),
            1 => out.pop().unwrap(),
            _ => Expr::Product(out),
        };
        if acc.is_one() {
            body
        } else if (-acc.clone()).is_one() {
            Expr::neg(body)
        } else {
            let mut v = vec![Expr::Const(acc)];
            match body {
                Expr::Product(rest) => v.extend(rest),
                b => v.push(b),
            }
            Expr::Product(v)
        }
    }

    pub fn quotient(num: Expr, den: Expr) -> Expr {
        match (&num, &den) {
            (_, Expr::Const(d)) if d.is_one() => num,
            (_, Expr::Const(d)) if (-d.clone()).is_one() => Expr::neg(num),
            (Expr::Const(n), Expr::Const(d)) if !d.is_zero() => Expr::Const(n / d),
            (Expr::Const(n), _) if n.is_zero() => Expr::zero(),
            _ => Expr::Quotient(Box::new(num), Box::new(den)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(base: Expr, k: i64) -> Expr {
        match (&base, k) {
            (_, 0) => Expr::one(),
            (_, 1) => base,
            (Expr::Const(c), k) if k > 0 || !c.is_zero() => {
                let mag = k.unsigned_abs() as u32;
                let p = Rational::new(c.numer().pow(mag), c.denom().pow(mag));
                Expr::Const(if k > 0 { p } else { p.recip() })
            }
            _ => Expr::Pow(Box::new(base), k),
        }
    }

    pub fn exp(e: Expr) -> Expr {
        if e.is_zero() {
            return Expr::one();
        }
        Expr::Exp(Box::new(e))
    }

    pub fn log(e: Expr) -> Expr {
        if e.is_one() {
            return Expr::zero();
        }
        Expr::Log(Box::new(e))
    }

    /// Largest variable index appearing in the tree (0 for constants).
    pub fn arity(&self) -> usize {
        self.syntactic_vars().into_iter().max().unwrap_or(0)
    }

    /// Variables that occur anywhere in the tree. See [`vars_used`] for the
    /// set the expression actually depends on.
    pub fn syntactic_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(j) = e {
                out.insert(*j);
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Var(_) | Expr::Const(_) => {}
            Expr::Sum(v) | Expr::Product(v) => v.iter().for_each(|c| c.visit(f)),
            Expr::Quotient(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) => a.visit(f),
        }
    }

    /// True when the tree has no `exp`/`log` nodes, so exact evaluation applies.
    pub fn is_rational(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |e| {
            if matches!(e, Expr::Exp(_) | Expr::Log(_)) {
                ok = false;
            }
        });
        ok
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Replaces every `x_j` by `f(j)`, rebuilding with the folding constructors.
    pub fn substitute(&self, f: &impl Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Var(j) => f(*j),
            Expr::Const(_) => self.clone(),
            Expr::Sum(v) => Expr::sum(v.iter().map(|c| c.substitute(f))),
            Expr::Product(v) => Expr::product(v.iter().map(|c| c.substitute(f))),
            Expr::Quotient(a, b) => Expr::quotient(a.substitute(f), b.substitute(f)),
            Expr::Neg(a) => Expr::neg(a.substitute(f)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(f), *k),
            Expr::Exp(a) => Expr::exp(a.substitute(f)),
            Expr::Log(a) => Expr::log(a.substitute(f)),
        }
    }

    /// Renames variables without any folding, so structure is preserved.
    pub fn rename_vars(&self, f: &impl Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Var(j) => Expr::Var(f(*j)),
            Expr::Const(_) => self.clone(),
            Expr::Sum(v) => Expr::Sum(v.iter().map(|c| c.rename_vars(f)).collect()),
            Expr::Product(v) => Expr::Product(v.iter().map(|c| c.rename_vars(f)).collect()),
            Expr::Quotient(a, b) => {
                Expr::Quotient(Box::new(a.rename_vars(f)), Box::new(b.rename_vars(f)))
            }
            Expr::Neg(a) => Expr::Neg(Box::new(a.rename_vars(f))),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.rename_vars(f)), *k),
            Expr::Exp(a) => Expr::Exp(Box::new(a.rename_vars(f))),
            Expr::Log(a) => Expr::Log(Box::new(a.rename_vars(f))),
        }
    }

    /// Value of a variable-free, transcendental-free tree.
    pub fn const_value(&self) -> Option<Rational> {
        match self {
            Expr::Var(_) | Expr::Exp(_) | Expr::Log(_) => None,
            Expr::Const(c) => Some(c.clone()),
            Expr::Sum(v) => v
                .iter()
                .try_fold(Rational::zero(), |acc, c| Some(acc + c.const_value()?)),
            Expr::Product(v) => v
                .iter()
                .try_fold(Rational::one(), |acc, c| Some(acc * c.const_value()?)),
            Expr::Quotient(a, b) => {
                let d = b.const_value()?;
                if d.is_zero() {
                    return None;
                }
                Some(a.const_value()? / d)
            }
            Expr::Neg(a) => Some(-a.const_value()?),
            Expr::Pow(a, k) => {
                let b = a.const_value()?;
                if b.is_zero() && *k < 0 {
                    return None;
                }
                let mag = k.unsigned_abs().to_u32()?;
                let p = Rational::new(b.numer().pow(mag), b.denom().pow(mag));
                Some(if *k >= 0 { p } else { p.recip() })
            }
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum([self, Expr::neg(rhs)])
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::quotient(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Printing. The output re-parses to a structurally equal tree; the context
// rules below mirror the literal folding done by the parser.

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Top,
    SumTerm,
    SubOperand,
    NegOperand,
    FactorFirst,
    FactorRest,
    QuotNum,
    QuotDen { num_is_const: bool },
    PowBase,
}

fn is_integer_literal(c: &Rational) -> bool {
    c.is_integer() && !c.is_negative()
}

fn needs_parens(e: &Expr, slot: Slot) -> bool {
    use Expr::*;
    match slot {
        Slot::Top => false,
        Slot::SumTerm => matches!(e, Sum(_)),
        Slot::SubOperand => matches!(e, Sum(_) | Neg(_) | Const(_)),
        Slot::NegOperand => matches!(e, Sum(_) | Product(_) | Quotient(..) | Neg(_) | Const(_)),
        Slot::FactorFirst => matches!(e, Sum(_) | Product(_)),
        Slot::FactorRest => match e {
            Sum(_) | Product(_) | Quotient(..) => true,
            Const(c) => !c.is_integer(),
            _ => false,
        },
        Slot::QuotNum => matches!(e, Sum(_)),
        Slot::QuotDen { num_is_const } => match e {
            Sum(_) | Product(_) | Quotient(..) => true,
            Const(c) => num_is_const || !is_integer_literal(c),
            _ => false,
        },
        Slot::PowBase => match e {
            Var(_) | Exp(_) | Log(_) => false,
            Const(c) => !is_integer_literal(c),
            _ => true,
        },
    }
}

fn write_slot(e: &Expr, slot: Slot, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if needs_parens(e, slot) {
        write!(f, "(")?;
        write_expr(e, f)?;
        write!(f, ")")
    } else {
        write_expr(e, f)
    }
}

fn write_const(c: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.is_integer() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        Expr::Var(j) => write!(f, "x{j}"),
        Expr::Const(c) => write_const(c, f),
        Expr::Sum(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    write_slot(t, Slot::SumTerm, f)?;
                    continue;
                }
                match t {
                    Expr::Neg(inner) => {
                        write!(f, " - ")?;
                        write_slot(inner, Slot::SubOperand, f)?;
                    }
                    Expr::Const(c) if c.is_negative() => {
                        write!(f, " - ")?;
                        write_const(&-c.clone(), f)?;
                    }
                    _ => {
                        write!(f, " + ")?;
                        write_slot(t, Slot::SumTerm, f)?;
                    }
                }
            }
            Ok(())
        }
        Expr::Product(factors) => {
            for (i, x) in factors.iter().enumerate() {
                if i == 0 {
                    write_slot(x, Slot::FactorFirst, f)?;
                } else {
                    write!(f, "*")?;
                    write_slot(x, Slot::FactorRest, f)?;
                }
            }
            Ok(())
        }
        Expr::Quotient(n, d) => {
            write_slot(n, Slot::QuotNum, f)?;
            write!(f, "/")?;
            let num_is_const = matches!(**n, Expr::Const(_));
            write_slot(d, Slot::QuotDen { num_is_const }, f)
        }
        Expr::Neg(inner) => {
            write!(f, "-")?;
            write_slot(inner, Slot::NegOperand, f)
        }
        Expr::Pow(b, k) => {
            write_slot(b, Slot::PowBase, f)?;
            write!(f, "^{k}")
        }
        Expr::Exp(a) => {
            write!(f, "exp(")?;
            write_slot(a, Slot::Top, f)?;
            write!(f, ")")
        }
        Expr::Log(a) => {
            write!(f, "log(")?;
            write_slot(a, Slot::Top, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}
