use super::poly::TruncatedPoly;
use super::Expr;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Taylor expansion of `e` in `x - p`, keeping total degrees `<= cap`.
///
/// Computed by structural recursion with truncated arithmetic; quotients,
/// negative powers, `exp` and `log` go through one-variable series composed
/// with the non-constant part of their argument.
pub fn taylor<S: Scalar>(e: &Expr, p: &[S], cap: u32) -> Result<TruncatedPoly<S>> {
    let n = p.len();
    Ok(match e {
        Expr::Var(j) => {
            let at = p.get(j - 1).cloned().ok_or(Error::PointTooShort { got: n, need: *j })?;
            TruncatedPoly::variable(n, cap, *j, at)
        }
        Expr::Const(c) => TruncatedPoly::constant(n, cap, S::from_rational(c)),
        Expr::Sum(terms) => {
            let mut acc = TruncatedPoly::zero(n, cap);
            for t in terms {
                acc = acc.add(&taylor(t, p, cap)?);
            }
            acc
        }
        Expr::Product(factors) => {
            let mut acc = TruncatedPoly::constant(n, cap, S::one());
            for f in factors {
                acc = acc.mul(&taylor(f, p, cap)?);
            }
            acc
        }
        Expr::Quotient(num, den) => {
            let d = taylor(den, p, cap)?;
            taylor(num, p, cap)?.mul(&reciprocal(&d)?)
        }
        Expr::Neg(a) => taylor(a, p, cap)?.neg(),
        Expr::Pow(a, k) => {
            let b = taylor(a, p, cap)?;
            if *k >= 0 {
                b.powi(*k as u32)
            } else {
                reciprocal(&b)?.powi(k.unsigned_abs() as u32)
            }
        }
        Expr::Exp(a) => {
            if S::EXACT {
                return Err(Error::Transcendental);
            }
            let b = taylor(a, p, cap)?;
            let c0 = b.constant_term();
            let e0 = c0.exp().ok_or(Error::Transcendental)?;
            let mut series = Vec::with_capacity(cap as usize + 1);
            let mut term = e0;
            for k in 0..=cap {
                series.push(term.clone());
                term = term / S::from_i64(k as i64 + 1);
            }
            TruncatedPoly::compose_series(&series, &b.without_constant())
        }
        Expr::Log(a) => {
            if S::EXACT {
                return Err(Error::Transcendental);
            }
            let b = taylor(a, p, cap)?;
            let c0 = b.constant_term();
            let l0 = c0
                .ln()
                .ok_or_else(|| Error::Singular(format!("log of non-positive value at {e}")))?;
            let mut series = vec![l0];
            let inv = S::one() / c0;
            let mut pw = S::one();
            for k in 1..=cap {
                pw = pw * inv.clone();
                let sign = if k % 2 == 1 { S::one() } else { -S::one() };
                series.push(sign * pw.clone() / S::from_i64(k as i64));
            }
            TruncatedPoly::compose_series(&series, &b.without_constant())
        }
    })
}

fn reciprocal<S: Scalar>(d: &TruncatedPoly<S>) -> Result<TruncatedPoly<S>> {
    let c0 = d.constant_term();
    if c0.is_zero() {
        return Err(Error::Singular("denominator vanishes at the base point".into()));
    }
    // 1/(c0 + D) = sum_k (-1)^k D^k / c0^(k+1)
    let inv = S::one() / c0;
    let mut series = Vec::with_capacity(d.cap() as usize + 1);
    let mut term = inv.clone();
    for _ in 0..=d.cap() {
        series.push(term.clone());
        term = -(term * inv.clone());
    }
    Ok(TruncatedPoly::compose_series(&series, &d.without_constant()))
}
