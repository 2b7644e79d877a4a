use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Rational;

pub const DEFAULT_MAX_RETRIES: usize = 32;
pub const DEFAULT_BOX: i64 = 3;
pub const DEFAULT_MAX_DENOMINATOR: i64 = 64;

/// Seeded source of rational sample points in a box.
///
/// Identical seeds give identical point sequences. Sub-jobs get their own
/// stream through [`GenericPointSampler::fork`], so the points a job sees do
/// not depend on how many points other jobs consumed.
#[derive(Clone, Debug)]
pub struct GenericPointSampler {
    seed: u64,
    bound: i64,
    max_denominator: i64,
    max_retries: usize,
    rng: ChaCha8Rng,
}

impl GenericPointSampler {
    pub fn new(seed: u64) -> Self {
        GenericPointSampler {
            seed,
            bound: DEFAULT_BOX,
            max_denominator: DEFAULT_MAX_DENOMINATOR,
            max_retries: DEFAULT_MAX_RETRIES,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Components in `[-bound, bound]` with denominators in `1..=max_denominator`.
    pub fn with_box(mut self, bound: i64, max_denominator: i64) -> Self {
        assert!(bound >= 1 && max_denominator >= 1);
        self.bound = bound;
        self.max_denominator = max_denominator;
        self
    }

    pub fn with_max_retries(mut self, max_retries: usize) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_retries(&self) -> usize {
        self.max_retries
    }

    /// Independent stream for the sub-job named `tag`.
    pub fn fork(&self, tag: &str) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let seed = splitmix(self.seed ^ splitmix(h));
        GenericPointSampler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ..self.clone()
        }
    }

    pub fn next_rational(&mut self) -> Rational {
        let den = self.rng.gen_range(1..=self.max_denominator);
        let num = self.rng.gen_range(-self.bound * den..=self.bound * den);
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn next_point(&mut self, dim: usize) -> Vec<Rational> {
        (0..dim).map(|_| self.next_rational()).collect()
    }

    /// Draws points until `accept` returns a value, at most `max_retries` times.
    pub fn find<T>(
        &mut self,
        dim: usize,
        mut accept: impl FnMut(&[Rational]) -> Option<T>,
    ) -> Option<(Vec<Rational>, T)> {
        for _ in 0..self.max_retries {
            let p = self.next_point(dim);
            if let Some(t) = accept(&p) {
                return Some((p, t));
            }
        }
        None
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    #[test]
    fn same_seed_same_points() {
        let mut a = GenericPointSampler::new(42);
        let mut b = GenericPointSampler::new(42);
        assert_eq!(a.next_point(5), b.next_point(5));
        let mut c = GenericPointSampler::new(43);
        assert_ne!(a.next_point(5), c.next_point(5));
    }

    #[test]
    fn points_stay_in_box() {
        let mut s = GenericPointSampler::new(1);
        for q in s.next_point(200) {
            assert!(q.abs() <= Rational::from_integer(3.into()));
            assert!(*q.denom() <= BigInt::from(64));
        }
    }

    #[test]
    fn forks_are_deterministic_and_distinct() {
        let s = GenericPointSampler::new(7);
        assert_eq!(s.fork("a").next_point(3), s.fork("a").next_point(3));
        assert_ne!(s.fork("a").next_point(3), s.fork("b").next_point(3));
    }

    #[test]
    fn find_gives_up() {
        let mut s = GenericPointSampler::new(0).with_max_retries(5);
        let mut calls = 0;
        assert!(s.find(2, |_| { calls += 1; None::<()> }).is_none());
        assert_eq!(calls, 5);
    }
}
