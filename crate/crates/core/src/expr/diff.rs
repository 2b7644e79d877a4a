use std::collections::BTreeSet;

use num_traits::Zero;

use super::eval::eval_with_bound;
use super::{eval, Expr};
use crate::sampler::GenericPointSampler;
use crate::scalar::{Mp128, Rational, Scalar};

/// Partial derivative with respect to `x_j`, built with the folding constructors.
pub fn diff(e: &Expr, j: usize) -> Expr {
    match e {
        Expr::Var(i) => {
            if *i == j {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Const(_) => Expr::zero(),
        Expr::Sum(terms) => Expr::sum(terms.iter().map(|t| diff(t, j))),
        Expr::Product(factors) => Expr::sum((0..factors.len()).map(|i| {
            let di = diff(&factors[i], j);
            if di.is_zero() {
                return Expr::zero();
            }
            Expr::product(
                factors
                    .iter()
                    .enumerate()
                    .map(|(k, f)| if k == i { di.clone() } else { f.clone() }),
            )
        })),
        Expr::Quotient(n, d) => {
            let dn = diff(n, j);
            let dd = diff(d, j);
            if dd.is_zero() {
                return Expr::quotient(dn, (**d).clone());
            }
            let top = Expr::sum([
                Expr::product([dn, (**d).clone()]),
                Expr::neg(Expr::product([(**n).clone(), dd])),
            ]);
            Expr::quotient(top, Expr::pow((**d).clone(), 2))
        }
        Expr::Neg(a) => Expr::neg(diff(a, j)),
        Expr::Pow(a, k) => {
            let da = diff(a, j);
            if da.is_zero() || *k == 0 {
                return Expr::zero();
            }
            Expr::product([Expr::int(*k), Expr::pow((**a).clone(), k - 1), da])
        }
        Expr::Exp(a) => {
            let da = diff(a, j);
            if da.is_zero() {
                return Expr::zero();
            }
            Expr::product([Expr::exp((**a).clone()), da])
        }
        Expr::Log(a) => {
            let da = diff(a, j);
            if da.is_zero() {
                return Expr::zero();
            }
            Expr::quotient(da, (**a).clone())
        }
    }
}

/// Symbolic gradient with respect to `x_1..x_n`.
pub fn gradient(e: &Expr, n: usize) -> Vec<Expr> {
    (1..=n).map(|j| diff(e, j)).collect()
}

const ZERO_TEST_POINTS: usize = 8;
const ZERO_TEST_ATTEMPTS: usize = 64;
const ZERO_TEST_SEED: u64 = 0x7a65_726f;

/// Variables the expression depends on: `x_j` is reported when the folded
/// derivative is non-constant-zero and it does not vanish at every one of
/// eight seeded random rational points.
pub fn vars_used(e: &Expr) -> BTreeSet<usize> {
    let arity = e.arity();
    let mut out = BTreeSet::new();
    for j in e.syntactic_vars() {
        let d = diff(e, j);
        if d.is_zero() {
            continue;
        }
        if !identically_zero(&d, arity) {
            out.insert(j);
        }
    }
    out
}

fn identically_zero(d: &Expr, arity: usize) -> bool {
    let mut sampler = GenericPointSampler::new(ZERO_TEST_SEED);
    let mut evaluated = 0;
    for _ in 0..ZERO_TEST_ATTEMPTS {
        if evaluated == ZERO_TEST_POINTS {
            break;
        }
        let p = sampler.next_point(arity);
        let zero = if d.is_rational() {
            match eval::<Rational>(d, &p) {
                Ok(v) => v.is_zero(),
                Err(_) => continue,
            }
        } else {
            let pf: Vec<Mp128> = p.iter().map(Mp128::from_rational).collect();
            match eval_with_bound(d, &pf) {
                Ok((v, bound)) => {
                    let tol = -(Mp128::PRECISION.unwrap() as f64) / 2.0;
                    v.is_zero() || v.log2_abs() <= bound.log2_abs() + tol
                }
                Err(_) => continue,
            }
        };
        if !zero {
            return false;
        }
        evaluated += 1;
    }
    evaluated > 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(s: &str, n: usize) -> Expr {
        parse(s, n).unwrap()
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(diff(&p("x1+x2", 2), 1), Expr::one());
        assert_eq!(
            diff(&p("x1^2+x2^2+x3^2", 3), 1),
            Expr::product([Expr::int(2), Expr::var(1)])
        );
        assert_eq!(diff(&p("exp(x1)+exp(x2)", 2), 2), Expr::exp(Expr::var(2)));
        assert_eq!(diff(&p("x1+x2-x2", 2), 2), Expr::zero());
    }

    #[test]
    fn quotient_and_log_rules() {
        let e = p("x1/x2", 2);
        let d = diff(&e, 2);
        let v = eval::<Rational>(&d, &[Rational::from_integer(3.into()), Rational::from_integer(2.into())])
            .unwrap();
        assert_eq!(v, Rational::new((-3).into(), 4.into()));
        let l = diff(&p("log(x1*x2)", 2), 1);
        let pf = [Mp128::from_i64(4), Mp128::from_i64(7)];
        let v = eval(&l, &pf).unwrap();
        assert!((v.to_f64() - 0.25).abs() < 1e-30);
    }

    #[test]
    fn used_variables() {
        assert_eq!(vars_used(&p("x1+x2", 2)), [1, 2].into());
        assert_eq!(vars_used(&p("x1+x2-x2", 2)), [1].into());
        assert_eq!(vars_used(&p("(x1-x3)/(x2-x3)", 3)), [1, 2, 3].into());
        // cancellation that folding cannot see
        assert_eq!(vars_used(&p("x1*x2 - x2*x1 + x3", 3)), [3].into());
        assert_eq!(vars_used(&p("exp(x1)*x2 - x2*exp(x1) + x1", 2)), [1].into());
        assert_eq!(vars_used(&p("log(exp(x2)) - x2 + x1", 2)), [1].into());
    }
}
