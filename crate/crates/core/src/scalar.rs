//! Scalar models used throughout the crate.
//!
//! Every numeric routine is generic over [`Scalar`]. Three families of
//! implementations are provided: exact rationals ([`Rational`]), machine
//! doubles (`f64`, only used for quick checks) and extended-precision binary
//! floats ([`MpFloat`]) with a compile-time mantissa width.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, Exponent, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as BigSign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

/// Field operations plus the handful of extras the pipelines need.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Whether arithmetic is free of rounding.
    const EXACT: bool;
    /// Mantissa width in bits; `None` for exact scalars.
    const PRECISION: Option<u32>;

    fn from_rational(q: &Rational) -> Self;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(v)))
    }

    /// The exact value, when the model is exact.
    fn to_rational(&self) -> Option<Rational>;

    /// `None` when the model cannot represent the result (exact scalars).
    fn exp(&self) -> Option<Self>;

    /// `None` for non-positive arguments and for exact scalars.
    fn ln(&self) -> Option<Self>;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Approximate `log2 |x|`; negative infinity at zero.
    fn log2_abs(&self) -> f64;

    fn to_f64(&self) -> f64;

    /// Text form used in reports (`p/q` for rationals).
    fn to_report_string(&self) -> String;

    fn powi(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `self += a * b`.
    fn add_product(&mut self, a: &Self, b: &Self) {
        *self = self.clone() + a.clone() * b.clone();
    }

    /// Rescales a kernel vector to keep entries bounded. Only the direction
    /// of the vector is meaningful to callers.
    fn normalize_direction(v: &mut [Self]);
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const PRECISION: Option<u32> = None;

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn exp(&self) -> Option<Self> {
        None
    }

    fn ln(&self) -> Option<Self> {
        None
    }

    fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        log2_bigint(self.numer()) - log2_bigint(self.denom())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| self.log2_abs().exp2() * sign_f64(self))
    }

    fn to_report_string(&self) -> String {
        self.to_string()
    }

    fn add_product(&mut self, a: &Self, b: &Self) {
        // kernel coordinates are integers; skip the gcd work of general ratios
        if self.is_integer() && a.is_integer() && b.is_integer() {
            let n = self.numer() + a.numer() * b.numer();
            *self = Rational::from_integer(n);
        } else {
            *self = &*self + a * b;
        }
    }

    fn normalize_direction(v: &mut [Self]) {
        let mut lcm = BigInt::one();
        for x in v.iter() {
            lcm = lcm.lcm(x.denom());
        }
        let mut gcd = BigInt::zero();
        for x in v.iter() {
            let scaled = x.numer() * (&lcm / x.denom());
            gcd = gcd.gcd(&scaled);
        }
        if gcd.is_zero() {
            return;
        }
        for x in v.iter_mut() {
            let scaled = x.numer() * (&lcm / x.denom()) / &gcd;
            *x = Rational::from_integer(scaled);
        }
    }
}

fn sign_f64(q: &Rational) -> f64 {
    if q.is_negative() {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn log2_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return n.abs().to_f64().unwrap_or(0.0).log2();
    }
    let shift = bits - 60;
    let top = (n.abs() >> shift).to_f64().unwrap_or(1.0);
    top.log2() + shift as f64
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const PRECISION: Option<u32> = Some(53);

    fn from_rational(q: &Rational) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<Rational> {
        None
    }

    fn exp(&self) -> Option<Self> {
        Some(f64::exp(*self))
    }

    fn ln(&self) -> Option<Self> {
        (*self > 0.0).then(|| f64::ln(*self))
    }

    fn log2_abs(&self) -> f64 {
        f64::abs(*self).log2()
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_report_string(&self) -> String {
        format!("{self:e}")
    }

    fn normalize_direction(v: &mut [Self]) {
        let m = v.iter().fold(0.0f64, |m, x| m.max(f64::abs(*x)));
        if m > 0.0 {
            v.iter_mut().for_each(|x| *x /= m);
        }
    }
}

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

/// Binary floating point with a `BITS`-bit mantissa.
#[derive(Clone)]
pub struct MpFloat<const BITS: usize>(BigFloat);

pub type Mp128 = MpFloat<128>;
pub type Mp256 = MpFloat<256>;
pub type Mp512 = MpFloat<512>;

impl<const BITS: usize> MpFloat<BITS> {
    pub fn from_f64(v: f64) -> Self {
        MpFloat(BigFloat::from_f64(v, BITS))
    }

    pub fn is_nan(&self) -> bool {
        self.0.is_nan()
    }

    pub fn inner(&self) -> &BigFloat {
        &self.0
    }

    fn from_bigint(n: &BigInt) -> BigFloat {
        let (sign, words) = n.to_u64_digits();
        if words.is_empty() {
            return BigFloat::new(BITS);
        }
        let sign = if sign == BigSign::Minus { Sign::Neg } else { Sign::Pos };
        BigFloat::from_words(&words, sign, (words.len() * 64) as Exponent)
    }
}

impl<const BITS: usize> fmt::Debug for MpFloat<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const BITS: usize> fmt::Display for MpFloat<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const BITS: usize> PartialEq for MpFloat<BITS> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<const BITS: usize> PartialOrd for MpFloat<BITS> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl<const BITS: usize> Add for MpFloat<BITS> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        MpFloat(self.0.add(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Sub for MpFloat<BITS> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        MpFloat(self.0.sub(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Mul for MpFloat<BITS> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        MpFloat(self.0.mul(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Div for MpFloat<BITS> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        MpFloat(self.0.div(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Neg for MpFloat<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        MpFloat(self.0.neg())
    }
}

impl<const BITS: usize> Zero for MpFloat<BITS> {
    fn zero() -> Self {
        MpFloat(BigFloat::new(BITS))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl<const BITS: usize> One for MpFloat<BITS> {
    fn one() -> Self {
        MpFloat(BigFloat::from_word(1, BITS))
    }
}

impl<const BITS: usize> Scalar for MpFloat<BITS> {
    const EXACT: bool = false;
    const PRECISION: Option<u32> = Some(BITS as u32);

    fn from_rational(q: &Rational) -> Self {
        let n = Self::from_bigint(q.numer());
        let d = Self::from_bigint(q.denom());
        MpFloat(n.div(&d, BITS, RM))
    }

    fn to_rational(&self) -> Option<Rational> {
        None
    }

    fn exp(&self) -> Option<Self> {
        let v = CONSTS.with(|cc| self.0.exp(BITS, RM, &mut cc.borrow_mut()));
        (!v.is_nan() && !v.is_inf()).then_some(MpFloat(v))
    }

    fn ln(&self) -> Option<Self> {
        if !self.0.is_positive() || self.0.is_zero() {
            return None;
        }
        let v = CONSTS.with(|cc| self.0.ln(BITS, RM, &mut cc.borrow_mut()));
        (!v.is_nan()).then_some(MpFloat(v))
    }

    fn abs(&self) -> Self {
        MpFloat(self.0.abs())
    }

    fn log2_abs(&self) -> f64 {
        match self.0.as_raw_parts() {
            Some((m, _, _, e, _)) if !self.0.is_zero() => {
                let top = *m.last().unwrap_or(&0);
                e as f64 + (top as f64 / 18446744073709551616.0).log2()
            }
            Some(_) => f64::NEG_INFINITY,
            None => f64::NAN,
        }
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let Some((m, _, _, e, _)) = self.0.as_raw_parts() else {
            return f64::NAN;
        };
        let frac = *m.last().unwrap_or(&0) as f64 / 18446744073709551616.0;
        let mag = frac * (e as f64).exp2();
        if self.0.is_negative() {
            -mag
        } else {
            mag
        }
    }

    fn to_report_string(&self) -> String {
        self.0.to_string()
    }

    fn normalize_direction(v: &mut [Self]) {
        let mut m = Self::zero();
        for x in v.iter() {
            let a = x.abs();
            if a > m {
                m = a;
            }
        }
        if !m.is_zero() {
            for x in v.iter_mut() {
                *x = x.clone() / m.clone();
            }
        }
    }
}

/// Precision tiers for float mode; escalation walks up this ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Precision {
    P128,
    P256,
    P512,
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::P128 => 128,
            Precision::P256 => 256,
            Precision::P512 => 512,
        }
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            128 => Some(Precision::P128),
            256 => Some(Precision::P256),
            512 => Some(Precision::P512),
            _ => None,
        }
    }

    pub fn next(self) -> Option<Self> {
        match self {
            Precision::P128 => Some(Precision::P256),
            Precision::P256 => Some(Precision::P512),
            Precision::P512 => None,
        }
    }

    /// The ladder starting at `self`.
    pub fn ladder(self) -> impl Iterator<Item = Precision> {
        std::iter::successors(Some(self), |p| p.next())
    }
}

/// Which scalar model a computation runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    Exact,
    Float(Precision),
}

impl fmt::Display for ScalarMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarMode::Exact => write!(f, "exact"),
            ScalarMode::Float(p) => write!(f, "float{}", p.bits()),
        }
    }
}

/// Runs `$body` with the type alias `$S` bound to the scalar type for `$mode`.
#[macro_export]
macro_rules! with_scalar {
    ($mode:expr, $S:ident => $body:expr) => {
        match $mode {
            $crate::scalar::ScalarMode::Exact => {
                type $S = $crate::scalar::Rational;
                $body
            }
            $crate::scalar::ScalarMode::Float($crate::scalar::Precision::P128) => {
                type $S = $crate::scalar::Mp128;
                $body
            }
            $crate::scalar::ScalarMode::Float($crate::scalar::Precision::P256) => {
                type $S = $crate::scalar::Mp256;
                $body
            }
            $crate::scalar::ScalarMode::Float($crate::scalar::Precision::P512) => {
                type $S = $crate::scalar::Mp512;
                $body
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn mp_from_rational_matches_f64() {
        let x = Mp128::from_rational(&q(-7, 3));
        assert!((x.to_f64() + 7.0 / 3.0).abs() < 1e-15);
        let big = Mp256::from_rational(&Rational::from_integer(BigInt::from(3u8).pow(100)));
        assert!((big.log2_abs() - 100.0 * 3f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn mp_exp_ln_roundtrip() {
        let x = Mp128::from_rational(&q(5, 4));
        let y = x.exp().unwrap().ln().unwrap();
        assert!((x - y).log2_abs() < -120.0);
        assert!(Mp128::from_i64(-1).ln().is_none());
        assert!(Mp128::zero().ln().is_none());
    }

    #[test]
    fn rational_normalize_gives_primitive_integers() {
        let mut v = vec![q(1, 2), q(-3, 4), Rational::zero()];
        Rational::normalize_direction(&mut v);
        assert_eq!(v, vec![q(2, 1), q(-3, 1), Rational::zero()]);
    }

    #[test]
    fn powi_by_squaring() {
        assert_eq!(q(2, 3).powi(5), q(32, 243));
        assert_eq!(Mp128::from_i64(3).powi(0), Mp128::one());
    }

    #[test]
    fn log2_of_large_rationals() {
        let x = Rational::new(BigInt::from(2).pow(200), BigInt::from(3));
        assert!((x.log2_abs() - (200.0 - 3f64.log2())).abs() < 1e-9);
        assert_eq!(Rational::zero().log2_abs(), f64::NEG_INFINITY);
    }
}
