//! Integer combinatorics: binomials, monomial counts, the ordinary-web rank
//! bound and the exact-support recursion.
//!
//! Everything is computed in arbitrary-size integers.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial coefficient with `binom(p, q) = 0` whenever `q < 0` or `q > p`.
pub fn binom(p: i64, q: i64) -> Result<BigInt> {
    if p < 0 {
        return Err(Error::Domain(format!("binom: negative top argument {p}")));
    }
    Ok(binom_unchecked(p as u64, q))
}

fn binom_unchecked(p: u64, q: i64) -> BigInt {
    if q < 0 || q as u64 > p {
        return BigInt::zero();
    }
    let q = (q as u64).min(p - q as u64);
    let mut acc = BigInt::one();
    for i in 0..q {
        acc = acc * BigInt::from(p - i) / BigInt::from(i + 1);
    }
    acc
}

/// Dimension of the space of degree-`h` homogeneous polynomials in `n` variables.
pub fn c(n: i64, h: i64) -> Result<BigInt> {
    if n < 1 || h < 0 {
        return Err(Error::Domain(format!("c({n},{h}) needs n >= 1, h >= 0")));
    }
    binom(n + h - 1, h)
}

pub(crate) fn c_usize(n: usize, h: usize) -> usize {
    c(n as i64, h as i64)
        .ok()
        .and_then(|v| v.to_usize())
        .expect("monomial count fits in usize")
}

fn check_nd(n: i64, d: &BigInt) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension n = {n} must be at least 2")));
    }
    if *d < BigInt::from(n) {
        return Err(Error::Domain(format!("web size d = {d} is below n = {n}")));
    }
    Ok(())
}

/// The unique `k0 >= 1` with `c(n,k0) <= d < c(n,k0+1)`.
pub fn k0_of(n: i64, d: &BigInt) -> Result<i64> {
    check_nd(n, d)?;
    let mut k = 1;
    while c(n, k + 1)? <= *d {
        k += 1;
    }
    Ok(k)
}

/// Closed form `k0*d - c(n+1,k0) + 1` of the ordinary-web rank bound.
fn pi_prime_closed(n: i64, d: &BigInt, k0: i64) -> Result<BigInt> {
    Ok(BigInt::from(k0) * d - c(n + 1, k0)? + 1)
}

/// Summed form `sum_{h=1}^{k0} (d - c(n,h))`.
fn pi_prime_sum(n: i64, d: &BigInt, k0: i64) -> Result<BigInt> {
    let mut acc = BigInt::zero();
    for h in 1..=k0 {
        acc += d - c(n, h)?;
    }
    Ok(acc)
}

/// Maximal rank of ordinary `d`-webs of codimension one in dimension `n`.
///
/// Both the closed and summed forms are evaluated; a disagreement is an
/// internal error.
pub fn pi_prime(n: i64, d: &BigInt) -> Result<BigInt> {
    let k0 = k0_of(n, d)?;
    let closed = pi_prime_closed(n, d, k0)?;
    let summed = pi_prime_sum(n, d, k0)?;
    if closed != summed {
        return Err(Error::Internal(format!(
            "pi'({n},{d}): closed form {closed} != summed form {summed}"
        )));
    }
    Ok(closed)
}

/// `pi'(n, c(n,k0))`, the rank of a maximal-rank calibrated web.
pub fn rho(n: i64, k0: i64) -> Result<BigInt> {
    if n < 2 || k0 < 2 {
        return Err(Error::Domain(format!("rho({n},{k0}) needs n >= 2, k0 >= 2")));
    }
    pi_prime(n, &c(n, k0)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingTable {
    pub k0: i64,
    #[serde(with = "decimal_map")]
    pub rho_values: BTreeMap<i64, BigInt>,
    #[serde(rename = "N_values", with = "decimal_map")]
    pub n_values: BTreeMap<i64, BigInt>,
}

impl CountingTable {
    pub fn rho(&self, n: i64) -> Option<&BigInt> {
        self.rho_values.get(&n)
    }

    /// `N(h,k0)`: the dimension of relations using exactly `h` given variables.
    pub fn n_value(&self, h: i64) -> Option<&BigInt> {
        self.n_values.get(&h)
    }
}

/// Runs the recursion `N(2)=rho(2)`, `N(n) = rho(n) - sum_{h<n} N(h) binom(n,h)`.
pub fn n_table(k0: i64, n_max: i64) -> Result<CountingTable> {
    if n_max < 2 {
        return Err(Error::Domain(format!("n_max = {n_max} must be at least 2")));
    }
    let mut rho_values = BTreeMap::new();
    let mut n_values: BTreeMap<i64, BigInt> = BTreeMap::new();
    for n in 2..=n_max {
        let r = rho(n, k0)?;
        let mut value = r.clone();
        for (h, nh) in n_values.iter() {
            value -= nh * binom(n, *h)?;
        }
        rho_values.insert(n, r);
        n_values.insert(n, value);
    }
    Ok(CountingTable {
        k0,
        rho_values,
        n_values,
    })
}

/// Applies the exact-support recursion to measured ranks `r(h)`, `h = 2, 3, ...`.
pub fn support_recursion(ranks: &BTreeMap<i64, BigInt>) -> Result<BTreeMap<i64, BigInt>> {
    let mut out: BTreeMap<i64, BigInt> = BTreeMap::new();
    for (&h, r) in ranks {
        let mut value = r.clone();
        for (&j, nj) in out.iter() {
            value -= nj * binom(h, j)?;
        }
        out.insert(h, value);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "identity", rename_all = "snake_case")]
pub enum Counterexample {
    /// `c(n,h)` differs from its exact-support decomposition.
    MonomialSplit {
        n: i64,
        h: i64,
        #[serde(with = "decimal")]
        lhs: BigInt,
        #[serde(with = "decimal")]
        rhs: BigInt,
    },
    /// `rho(n,k0)` differs from `sum_h N(h,k0) binom(n,h)`.
    RankSplit {
        k0: i64,
        n: i64,
        #[serde(with = "decimal")]
        lhs: BigInt,
        #[serde(with = "decimal")]
        rhs: BigInt,
    },
    /// `N(h,k0)` is non-zero for some `h > k0`.
    NonzeroTail {
        k0: i64,
        h: i64,
        #[serde(with = "decimal")]
        value: BigInt,
    },
}

/// Big integers as decimal strings, so JSON consumers never lose digits.
pub(crate) mod decimal {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

pub(crate) mod decimal_map {
    use std::collections::BTreeMap;

    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<i64, BigInt>, s: S) -> Result<S::Ok, S::Error> {
        let strings: BTreeMap<i64, String> = m.iter().map(|(k, v)| (*k, v.to_string())).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<i64, BigInt>, D::Error> {
        BTreeMap::<i64, String>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| Ok((k, v.parse().map_err(D::Error::custom)?)))
            .collect()
    }
}

/// Checks the monomial-support identity for `n <= n_max`, `h <= h_max`, and the
/// rank decomposition (with vanishing tail of `N`) for `n <= n_max`.
pub fn verify_identities(k0: i64, n_max: i64, h_max: i64) -> Result<Option<Counterexample>> {
    for n in 1..=n_max {
        for h in 1..=h_max {
            let lhs = c(n, h)?;
            let mut rhs = BigInt::zero();
            for k in 1..=h {
                rhs += binom(h - 1, k - 1)? * binom(n, k)?;
            }
            if lhs != rhs {
                return Ok(Some(Counterexample::MonomialSplit { n, h, lhs, rhs }));
            }
        }
    }
    if n_max < 2 {
        return Ok(None);
    }
    let table = n_table(k0, n_max)?;
    for (&h, value) in table.n_values.iter() {
        if h > k0 && !value.is_zero() {
            return Ok(Some(Counterexample::NonzeroTail {
                k0,
                h,
                value: value.clone(),
            }));
        }
    }
    for n in 2..=n_max {
        let lhs = rho(n, k0)?;
        let mut rhs = BigInt::zero();
        for h in 2..=k0.min(n_max) {
            rhs += &table.n_values[&h] * binom(n, h)?;
        }
        if lhs != rhs {
            return Ok(Some(Counterexample::RankSplit { k0, n, lhs, rhs }));
        }
    }
    Ok(None)
}

pub(crate) fn to_usize(v: &BigInt) -> Result<usize> {
    v.to_usize()
        .ok_or_else(|| Error::Domain(format!("{v} does not fit a machine index")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn binomial_convention() {
        assert_eq!(binom(4, 2).unwrap(), b(6));
        assert_eq!(binom(3, 5).unwrap(), b(0));
        assert_eq!(binom(3, -1).unwrap(), b(0));
        assert_eq!(binom(5, 0).unwrap(), b(1));
        assert!(matches!(binom(-1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(c(2, 3).unwrap(), b(4));
        assert_eq!(c(3, 3).unwrap(), b(10));
        for n in 1..6 {
            assert_eq!(c(n, 0).unwrap(), b(1));
        }
        assert!(c(0, 1).is_err());
        assert!(c(2, -1).is_err());
    }

    #[test]
    fn k0_half_open_interval() {
        assert_eq!(k0_of(2, &b(4)).unwrap(), 3);
        assert_eq!(k0_of(2, &b(5)).unwrap(), 4);
        assert_eq!(k0_of(3, &b(10)).unwrap(), 3);
        // left endpoint of the next interval belongs to it
        assert_eq!(k0_of(3, &b(15)).unwrap(), 4);
        assert_eq!(k0_of(3, &b(14)).unwrap(), 3);
        assert!(k0_of(3, &b(2)).is_err());
        assert!(k0_of(1, &b(4)).is_err());
    }

    #[test]
    fn pi_prime_values() {
        assert_eq!(pi_prime(2, &b(4)).unwrap(), b(3));
        assert_eq!(pi_prime(2, &b(5)).unwrap(), b(6));
        assert_eq!(pi_prime(3, &b(10)).unwrap(), b(11));
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(3, 3).unwrap(), b(11));
        assert_eq!(rho(4, 4).unwrap(), b(71));
        assert_eq!(rho(5, 4).unwrap(), b(155));
        assert_eq!(rho(10, 4).unwrap(), b(1860));
        assert!(rho(1, 3).is_err());
        assert!(rho(3, 1).is_err());
    }

    #[test]
    fn n_tables() {
        let t3 = n_table(3, 3).unwrap();
        assert_eq!(t3.n_value(2), Some(&b(3)));
        assert_eq!(t3.n_value(3), Some(&b(2)));
        let t4 = n_table(4, 6).unwrap();
        assert_eq!(t4.n_value(2), Some(&b(6)));
        assert_eq!(t4.n_value(3), Some(&b(8)));
        assert_eq!(t4.n_value(4), Some(&b(3)));
        assert_eq!(t4.n_value(5), Some(&b(0)));
        assert_eq!(t4.n_value(6), Some(&b(0)));
        assert_eq!(t4.rho(2), t4.n_value(2));
    }

    #[test]
    fn identities_hold() {
        assert_eq!(verify_identities(3, 12, 12).unwrap(), None);
        // c(3,3) through its support split
        let split = binom(2, 0).unwrap() * 3 + binom(2, 1).unwrap() * 3 + binom(2, 2).unwrap();
        assert_eq!(split, b(10));
        let t4 = n_table(4, 5).unwrap();
        let five = &t4.n_values[&2] * 10 + &t4.n_values[&3] * 10 + &t4.n_values[&4] * 5;
        assert_eq!(five, b(155));
    }

    #[test]
    fn recursion_on_measured_ranks() {
        let ranks: BTreeMap<i64, BigInt> = [(2, b(3)), (3, b(11))].into_iter().collect();
        let out = support_recursion(&ranks).unwrap();
        assert_eq!(out[&2], b(3));
        assert_eq!(out[&3], b(2));
    }

    #[test]
    fn large_arguments_stay_exact() {
        let v = c(64, 64).unwrap();
        assert_eq!(v, binom(127, 64).unwrap());
        assert!(v.bits() > 64);
        assert!(to_usize(&v).is_err());
    }
}
