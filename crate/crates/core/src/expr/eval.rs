use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::Expr;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar, ScalarMode};
use crate::with_scalar;

/// Evaluates `e` at `point` (coordinate `j` is `point[j-1]`).
pub fn eval<S: Scalar>(e: &Expr, point: &[S]) -> Result<S> {
    match e {
        Expr::Var(j) => point.get(j - 1).cloned().ok_or(Error::PointTooShort {
            got: point.len(),
            need: *j,
        }),
        Expr::Const(c) => Ok(S::from_rational(c)),
        Expr::Sum(terms) => {
            let mut acc = S::zero();
            for t in terms {
                acc = acc + eval(t, point)?;
            }
            Ok(acc)
        }
        Expr::Product(factors) => {
            let mut acc = S::one();
            for f in factors {
                acc = acc * eval(f, point)?;
            }
            Ok(acc)
        }
        Expr::Quotient(n, d) => {
            let den = eval(d, point)?;
            if den.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(eval(n, point)? / den)
        }
        Expr::Neg(a) => Ok(-eval(a, point)?),
        Expr::Pow(a, k) => {
            let b = eval(a, point)?;
            pow_int(b, *k)
        }
        Expr::Exp(a) => {
            if S::EXACT {
                return Err(Error::Transcendental);
            }
            eval(a, point)?.exp().ok_or(Error::Transcendental)
        }
        Expr::Log(a) => {
            if S::EXACT {
                return Err(Error::Transcendental);
            }
            eval(a, point)?.ln().ok_or(Error::LogDomain)
        }
    }
}

pub(crate) fn pow_int<S: Scalar>(b: S, k: i64) -> Result<S> {
    if k >= 0 {
        return Ok(b.powi(k as u32));
    }
    if b.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(S::one() / b.powi(k.unsigned_abs() as u32))
}

/// Value together with a bound on the magnitudes that were combined to
/// produce it. Rounding error in float mode is roughly `eps * bound`, which
/// is what zero tests compare against.
pub(crate) fn eval_with_bound<S: Scalar>(e: &Expr, point: &[S]) -> Result<(S, S)> {
    Ok(match e {
        Expr::Var(_) | Expr::Const(_) => {
            let v = eval(e, point)?;
            let b = v.abs();
            (v, b)
        }
        Expr::Sum(terms) => {
            let mut v = S::zero();
            let mut b = S::zero();
            for t in terms {
                let (tv, tb) = eval_with_bound(t, point)?;
                v = v + tv;
                b = b + tb;
            }
            (v, b)
        }
        Expr::Product(factors) => {
            let mut v = S::one();
            let mut b = S::one();
            for f in factors {
                let (fv, fb) = eval_with_bound(f, point)?;
                v = v * fv;
                b = b * fb;
            }
            (v, b)
        }
        Expr::Quotient(n, d) => {
            let (nv, nb) = eval_with_bound(n, point)?;
            let (dv, db) = eval_with_bound(d, point)?;
            if dv.is_zero() {
                return Err(Error::DivisionByZero);
            }
            let ad = dv.abs();
            let b = nb / ad.clone() + nv.abs() * db / (ad.clone() * ad);
            (nv / dv, b)
        }
        Expr::Neg(a) => {
            let (v, b) = eval_with_bound(a, point)?;
            (-v, b)
        }
        Expr::Pow(a, k) => {
            let (v, b) = eval_with_bound(a, point)?;
            let m = k.unsigned_abs() as u32;
            let bound = if *k >= 0 {
                b.powi(m)
            } else {
                if v.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                b.powi(m) / v.abs().powi(2 * m)
            };
            (pow_int(v, *k)?, bound)
        }
        Expr::Exp(a) => {
            let (v, b) = eval_with_bound(a, point)?;
            let ev = v.exp().ok_or(Error::Transcendental)?;
            let scale = if b > S::one() { b } else { S::one() };
            (ev.clone(), ev * scale)
        }
        Expr::Log(a) => {
            let (v, b) = eval_with_bound(a, point)?;
            let lv = v.ln().ok_or(Error::LogDomain)?;
            let bound = lv.abs() + b / v.abs();
            (lv, bound)
        }
    })
}

/// Public wrapper used by zero tests outside this module.
pub fn magnitude_bound<S: Scalar>(e: &Expr, point: &[S]) -> Result<S> {
    Ok(eval_with_bound(e, point)?.1)
}

/// A value in one of the supported scalar models, for mode-dynamic callers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Value {
    Exact { value: String },
    Float { bits: u32, value: String, approx: f64 },
}

impl Value {
    pub fn approx(&self) -> f64 {
        match self {
            Value::Exact { value } => {
                let q: Rational = value.parse().unwrap_or_else(|_| Rational::zero());
                Scalar::to_f64(&q)
            }
            Value::Float { approx, .. } => *approx,
        }
    }
}

/// Evaluates at a rational point in the requested scalar model.
pub fn eval_mode(e: &Expr, point: &[Rational], mode: ScalarMode) -> Result<Value> {
    with_scalar!(mode, S => {
        let p: Vec<S> = point.iter().map(S::from_rational).collect();
        let v = eval::<S>(e, &p)?;
        Ok(match S::PRECISION {
            None => Value::Exact { value: v.to_report_string() },
            Some(bits) => Value::Float { bits, value: v.to_report_string(), approx: v.to_f64() },
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::scalar::{Mp128, Precision};

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn exact_product() {
        let e = parse("x1*x2*x3", 3).unwrap();
        assert_eq!(eval(&e, &[q(1), q(2), q(3)]).unwrap(), q(6));
    }

    #[test]
    fn pole_is_an_error() {
        let e = parse("(x1-1)/(x1+1)", 1).unwrap();
        assert_eq!(eval(&e, &[q(-1)]), Err(Error::DivisionByZero));
        assert_eq!(eval(&parse("x1^-2", 1).unwrap(), &[q(0)]), Err(Error::DivisionByZero));
    }

    #[test]
    fn float_exp_at_origin() {
        let e = parse("exp(x1)+exp(x2)", 2).unwrap();
        let v: Mp128 = eval(&e, &[Mp128::zero(), Mp128::zero()]).unwrap();
        let err = (v - Mp128::from_i64(2)).log2_abs();
        assert!(err < -100.0);
        let dynamic = eval_mode(&e, &[q(0), q(0)], ScalarMode::Float(Precision::P128)).unwrap();
        assert_eq!(dynamic.approx(), 2.0);
    }

    #[test]
    fn exact_mode_rejects_transcendentals() {
        let e = parse("exp(x1)", 1).unwrap();
        assert_eq!(eval(&e, &[q(0)]), Err(Error::Transcendental));
        assert_eq!(eval_mode(&e, &[q(0)], ScalarMode::Exact), Err(Error::Transcendental));
    }

    #[test]
    fn log_domain() {
        let e = parse("log(x1)", 1).unwrap();
        assert_eq!(eval(&e, &[Mp128::from_i64(-2)]), Err(Error::LogDomain));
    }

    #[test]
    fn short_point() {
        let e = parse("x1+x2", 2).unwrap();
        assert!(matches!(eval(&e, &[q(1)]), Err(Error::PointTooShort { got: 1, need: 2 })));
    }
}
