//! Common interface over permutations and ciphers, seen as keyed oracles.
//!
//! A permutation is the one-key case; its only valid key is 0.

use rand::Rng;

use crate::cipher::{self, Cipher, KeyedHitMiss, Triple};
use crate::error::{check_domain, Result};
use crate::perm::{self, Permutation};

pub trait KeyedOracle: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    fn block_size(&self) -> usize;
    fn key_count(&self) -> usize;
    fn forward(&self, key: usize, x: usize) -> usize;
    fn backward(&self, key: usize, y: usize) -> usize;
    fn reprogrammed(&self, key: usize, x: usize, y: usize) -> Result<Self>;
    fn hit_miss(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<Vec<KeyedHitMiss>>;
    fn is_good_for(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<bool>;
    /// Uniform sample of the same shape.
    fn random_like<R: Rng + ?Sized>(&self, rng: &mut R) -> Self;

    /// Fold of `(key, x, y)` reprogrammings in order.
    fn reprogrammed_seq(&self, triples: &[Triple]) -> Result<Self> {
        let mut out = self.clone();
        for t in triples {
            out = out.reprogrammed(t.key, t.x, t.y)?;
        }
        Ok(out)
    }
}

impl KeyedOracle for Permutation {
    fn block_size(&self) -> usize {
        self.n()
    }

    fn key_count(&self) -> usize {
        1
    }

    fn forward(&self, _key: usize, x: usize) -> usize {
        self.apply(x)
    }

    fn backward(&self, _key: usize, y: usize) -> usize {
        self.apply_inverse(y)
    }

    fn reprogrammed(&self, key: usize, x: usize, y: usize) -> Result<Self> {
        check_domain(key, 1)?;
        self.reprogram(x, y)
    }

    fn hit_miss(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<Vec<KeyedHitMiss>> {
        for &k in keys {
            check_domain(k, 1)?;
        }
        Ok(perm::hit_miss(self, star, xs)?
            .entries
            .into_iter()
            .map(|h| KeyedHitMiss { key: 0, x_hit: h.x_hit, x_miss: h.x_miss, y_hit: h.y_hit, y_miss: h.y_miss })
            .collect())
    }

    fn is_good_for(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<bool> {
        for &k in keys {
            check_domain(k, 1)?;
        }
        perm::in_g(self, star, xs)
    }

    fn random_like<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        Permutation::random(self.n(), rng)
    }
}

impl KeyedOracle for Cipher {
    fn block_size(&self) -> usize {
        self.n()
    }

    fn key_count(&self) -> usize {
        Cipher::key_count(self)
    }

    fn forward(&self, key: usize, x: usize) -> usize {
        self.encrypt(key, x)
    }

    fn backward(&self, key: usize, y: usize) -> usize {
        self.decrypt(key, y)
    }

    fn reprogrammed(&self, key: usize, x: usize, y: usize) -> Result<Self> {
        self.reprogram(Triple { key, x, y })
    }

    fn hit_miss(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<Vec<KeyedHitMiss>> {
        cipher::hit_miss(self, star, keys, xs)
    }

    fn is_good_for(&self, star: &Self, keys: &[usize], xs: &[usize]) -> Result<bool> {
        cipher::in_g(self, star, keys, xs)
    }

    fn random_like<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        Cipher::random(Cipher::key_count(self), self.n(), rng)
    }
}
