//! Keyed permutation families and their per-key reprogramming.

use std::collections::HashSet;

use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};
use crate::perm::{self, Permutation};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CipherFile", into = "CipherFile")]
pub struct Cipher {
    n: usize,
    perms: Vec<Permutation>,
}

#[derive(Serialize, Deserialize)]
struct CipherFile {
    key_count: usize,
    n: usize,
    perms: Vec<Vec<usize>>,
}

impl TryFrom<CipherFile> for Cipher {
    type Error = Error;

    fn try_from(file: CipherFile) -> Result<Self> {
        if file.perms.len() != file.key_count {
            return Err(Error::InvalidPermutation(format!(
                "{} tables for {} keys",
                file.perms.len(),
                file.key_count
            )));
        }
        let perms = file
            .perms
            .into_iter()
            .map(|t| {
                if t.len() != file.n {
                    return Err(Error::InvalidPermutation(format!("table of length {} for n = {}", t.len(), file.n)));
                }
                Permutation::from_table(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Cipher::new(file.n, perms)
    }
}

impl From<Cipher> for CipherFile {
    fn from(c: Cipher) -> Self {
        CipherFile {
            key_count: c.perms.len(),
            n: c.n,
            perms: c.perms.into_iter().map(|p| p.table().to_vec()).collect(),
        }
    }
}

impl Cipher {
    pub fn new(n: usize, perms: Vec<Permutation>) -> Result<Self> {
        if perms.is_empty() {
            return Err(Error::Parameter("a cipher needs at least one key".into()));
        }
        if let Some(p) = perms.iter().find(|p| p.n() != n) {
            return Err(Error::InvalidPermutation(format!("key table on {} elements, expected {n}", p.n())));
        }
        Ok(Cipher { n, perms })
    }

    pub fn single(pi: Permutation) -> Self {
        Cipher { n: pi.n(), perms: vec![pi] }
    }

    pub fn identity(key_count: usize, n: usize) -> Self {
        Cipher { n, perms: vec![Permutation::identity(n); key_count.max(1)] }
    }

    /// Ideal cipher sample: an independent uniform permutation per key.
    pub fn random<R: Rng + ?Sized>(key_count: usize, n: usize, rng: &mut R) -> Self {
        Cipher { n, perms: (0..key_count.max(1)).map(|_| Permutation::random(n, rng)).collect() }
    }

    /// Every cipher over `key_count` keys; key 0 varies slowest.
    pub fn all(key_count: usize, n: usize) -> Vec<Cipher> {
        let base = Permutation::all(n);
        let mut out = vec![Vec::new()];
        for _ in 0..key_count {
            let mut next = Vec::with_capacity(out.len() * base.len());
            for prefix in &out {
                for p in &base {
                    let mut v = prefix.clone();
                    v.push(p.clone());
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter().map(|perms| Cipher { n, perms }).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn key_count(&self) -> usize {
        self.perms.len()
    }

    pub fn key(&self, k: usize) -> &Permutation {
        &self.perms[k]
    }

    pub fn encrypt(&self, k: usize, x: usize) -> usize {
        self.perms[k].apply(x)
    }

    pub fn decrypt(&self, k: usize, y: usize) -> usize {
        self.perms[k].apply_inverse(y)
    }

    fn check(&self, t: &Triple) -> Result<()> {
        check_domain(t.key, self.key_count())?;
        check_domain(t.x, self.n)?;
        check_domain(t.y, self.n)
    }

    /// `E[x →_K y]`: only component `K` changes.
    pub fn reprogram(&self, t: Triple) -> Result<Cipher> {
        self.check(&t)?;
        let mut out = self.clone();
        out.perms[t.key].reprogram_in_place(t.x, t.y);
        Ok(out)
    }

    pub fn reprogram_seq(&self, triples: &[Triple]) -> Result<Cipher> {
        for t in triples {
            self.check(t)?;
        }
        let mut out = self.clone();
        for t in triples {
            out.perms[t.key].reprogram_in_place(t.x, t.y);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub key: usize,
    pub x: usize,
    pub y: usize,
}

impl Triple {
    pub fn new(key: usize, x: usize, y: usize) -> Self {
        Triple { key, x, y }
    }
}

pub fn is_good(e: &Cipher, triples: &[Triple]) -> bool {
    let mut xs = HashSet::new();
    let mut ys = HashSet::new();
    if !triples.iter().all(|t| xs.insert((t.key, t.x)) && ys.insert((t.key, t.y))) {
        return false;
    }
    let targets: HashSet<usize> = triples.iter().map(|t| t.y).collect();
    triples
        .iter()
        .all(|t| t.key < e.key_count() && t.x < e.n() && !targets.contains(&e.encrypt(t.key, t.x)))
}

pub fn star_triples(e_star: &Cipher, keys: &[usize], xs: &[usize]) -> Result<Vec<Triple>> {
    if keys.len() != xs.len() {
        return Err(Error::Precondition("key and target lists differ in length".into()));
    }
    keys.iter()
        .zip(xs)
        .map(|(&key, &x)| {
            check_domain(key, e_star.key_count())?;
            check_domain(x, e_star.n())?;
            Ok(Triple { key, x, y: e_star.encrypt(key, x) })
        })
        .collect()
}

pub fn in_g(e: &Cipher, e_star: &Cipher, keys: &[usize], xs: &[usize]) -> Result<bool> {
    let mut seen = HashSet::new();
    if !keys.iter().zip(xs).all(|p| seen.insert(p)) {
        return Err(Error::Precondition("targets contain a repeated (key, x)".into()));
    }
    if e.n() != e_star.n() || e.key_count() != e_star.key_count() {
        return Err(Error::Precondition("ciphers have different shapes".into()));
    }
    Ok(is_good(e, &star_triples(e_star, keys, xs)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedHitMiss {
    pub key: usize,
    pub x_hit: usize,
    pub x_miss: usize,
    pub y_hit: usize,
    pub y_miss: usize,
}

pub fn hit_miss(e: &Cipher, e_star: &Cipher, keys: &[usize], xs: &[usize]) -> Result<Vec<KeyedHitMiss>> {
    if !in_g(e, e_star, keys, xs)? {
        return Err(Error::Precondition("(E, E*) is not good for the targets".into()));
    }
    Ok(keys
        .iter()
        .zip(xs)
        .map(|(&key, &x)| {
            let y = e_star.encrypt(key, x);
            KeyedHitMiss { key, x_hit: x, x_miss: e.decrypt(key, y), y_hit: y, y_miss: e.encrypt(key, x) }
        })
        .collect())
}

pub fn bad_probability_bound(k: usize, n: usize) -> BigRational {
    perm::bad_probability_bound(k, n)
}
