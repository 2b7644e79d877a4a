//! Sparse multivariate polynomials truncated at a total-degree cap.

use std::collections::BTreeMap;

use crate::jets::MultiIndex;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPoly<S> {
    nvars: usize,
    cap: u32,
    terms: BTreeMap<MultiIndex, S>,
}

impl<S: Scalar> TruncatedPoly<S> {
    pub fn zero(nvars: usize, cap: u32) -> Self {
        TruncatedPoly {
            nvars,
            cap,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, cap: u32, c: S) -> Self {
        let mut p = Self::zero(nvars, cap);
        p.insert(MultiIndex::zero(nvars), c);
        p
    }

    /// `at + X_j`, the expansion of the coordinate `x_j` around `at`.
    pub fn variable(nvars: usize, cap: u32, j: usize, at: S) -> Self {
        let mut p = Self::constant(nvars, cap, at);
        if cap >= 1 {
            p.insert(MultiIndex::unit(nvars, j), S::one());
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    fn insert(&mut self, m: MultiIndex, c: S) {
        if c.is_zero() {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, c);
        }
    }

    fn accumulate(&mut self, m: MultiIndex, c: S) {
        if c.is_zero() {
            return;
        }
        let next = match self.terms.remove(&m) {
            Some(old) => old + c,
            None => c,
        };
        self.insert(m, next);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &MultiIndex) -> S {
        self.terms.get(m).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_term(&self) -> S {
        self.coefficient(&MultiIndex::zero(self.nvars))
    }

    pub fn without_constant(&self) -> Self {
        let mut p = self.clone();
        p.terms.remove(&MultiIndex::zero(self.nvars));
        p
    }

    /// Terms of total degree exactly `h`.
    pub fn homogeneous(&self, h: u32) -> impl Iterator<Item = (&MultiIndex, &S)> {
        self.terms.iter().filter(move |(m, _)| m.degree() == h)
    }

    pub fn truncate(&self, cap: u32) -> Self {
        TruncatedPoly {
            nvars: self.nvars,
            cap,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= cap)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.cap = self.cap.min(other.cap);
        for (m, c) in other.terms.iter() {
            out.accumulate(m.clone(), c.clone());
        }
        out.truncate(out.cap)
    }

    pub fn neg(&self) -> Self {
        TruncatedPoly {
            nvars: self.nvars,
            cap: self.cap,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &S) -> Self {
        let mut out = Self::zero(self.nvars, self.cap);
        for (m, c) in self.terms.iter() {
            out.insert(m.clone(), c.clone() * s.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cap = self.cap.min(other.cap);
        let mut out = Self::zero(self.nvars, cap);
        for (a, ca) in self.terms.iter() {
            let da = a.degree();
            if da > cap {
                continue;
            }
            for (b, cb) in other.terms.iter() {
                if da + b.degree() > cap {
                    continue;
                }
                out.accumulate(a.plus(b), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn powi(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::constant(self.nvars, self.cap, S::one());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `sum_k series[k] * inner^k`, for `inner` without constant term.
    /// Terms beyond the cap vanish, so only `series[0..=cap]` is read.
    pub fn compose_series(series: &[S], inner: &Self) -> Self {
        debug_assert!(inner.constant_term().is_zero());
        let top = (inner.cap as usize).min(series.len().saturating_sub(1));
        let mut acc = Self::constant(inner.nvars, inner.cap, series[top].clone());
        for k in (0..top).rev() {
            acc = acc.mul(inner);
            acc.accumulate(MultiIndex::zero(inner.nvars), series[k].clone());
        }
        acc
    }
}
