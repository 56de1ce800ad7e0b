//! Permutations on `{0..n-1}` and their reprogramming algebra.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

/// A bijection with both lookup directions materialized.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PermutationFile", into = "PermutationFile")]
pub struct Permutation {
    fwd: Vec<usize>,
    inv: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PermutationFile {
    n: usize,
    fwd: Vec<usize>,
}

impl TryFrom<PermutationFile> for Permutation {
    type Error = Error;

    fn try_from(file: PermutationFile) -> Result<Self> {
        if file.fwd.len() != file.n {
            return Err(Error::InvalidPermutation(format!(
                "table has {} entries but n = {}",
                file.fwd.len(),
                file.n
            )));
        }
        Permutation::from_table(file.fwd)
    }
}

impl From<Permutation> for PermutationFile {
    fn from(p: Permutation) -> Self {
        PermutationFile { n: p.fwd.len(), fwd: p.fwd }
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let fwd: Vec<usize> = (0..n).collect();
        Permutation { inv: fwd.clone(), fwd }
    }

    pub fn from_table(fwd: Vec<usize>) -> Result<Self> {
        let n = fwd.len();
        let mut inv = vec![usize::MAX; n];
        for (x, &y) in fwd.iter().enumerate() {
            if y >= n {
                return Err(Error::InvalidPermutation(format!("image {y} of {x} out of range")));
            }
            if inv[y] != usize::MAX {
                return Err(Error::InvalidPermutation(format!("{y} has two preimages")));
            }
            inv[y] = x;
        }
        Ok(Permutation { fwd, inv })
    }

    /// Builds a permutation from disjoint cycles; unlisted points are fixed.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut fwd: Vec<usize> = (0..n).collect();
        for cycle in cycles {
            for (i, &a) in cycle.iter().enumerate() {
                check_domain(a, n)?;
                fwd[a] = cycle[(i + 1) % cycle.len()];
            }
        }
        Self::from_table(fwd)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut fwd: Vec<usize> = (0..n).collect();
        fwd.shuffle(rng);
        Self::from_table(fwd).expect("shuffle yields a bijection")
    }

    /// Every permutation of `{0..n-1}` in lexicographic order of the forward table.
    pub fn all(n: usize) -> Vec<Permutation> {
        Lexicographic::new(n).collect()
    }

    pub fn n(&self) -> usize {
        self.fwd.len()
    }

    pub fn table(&self) -> &[usize] {
        &self.fwd
    }

    pub fn inverse_table(&self) -> &[usize] {
        &self.inv
    }

    pub fn apply(&self, x: usize) -> usize {
        self.fwd[x]
    }

    pub fn apply_inverse(&self, y: usize) -> usize {
        self.inv[y]
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { fwd: self.inv.clone(), inv: self.fwd.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.fwd.iter().enumerate().all(|(x, &y)| x == y)
    }

    /// Lexicographic rank of the forward table among all `n!` permutations.
    pub fn rank(&self) -> usize {
        let n = self.n();
        let mut used = vec![false; n];
        let mut rank = 0usize;
        for (i, &v) in self.fwd.iter().enumerate() {
            let smaller = (0..v).filter(|&u| !used[u]).count();
            rank = rank * (n - i) + smaller;
            used[v] = true;
        }
        rank
    }

    /// `π[x→y]`: sends `x` to `y`, reroutes `π⁻¹(y)` to `π(x)`, fixes the rest.
    pub fn reprogram(&self, x: usize, y: usize) -> Result<Permutation> {
        let n = self.n();
        check_domain(x, n)?;
        check_domain(y, n)?;
        let mut out = self.clone();
        out.reprogram_in_place(x, y);
        Ok(out)
    }

    pub(crate) fn reprogram_in_place(&mut self, x: usize, y: usize) {
        let old_y = self.fwd[x];
        let old_x = self.inv[y];
        self.fwd[x] = y;
        self.fwd[old_x] = old_y;
        self.inv[y] = x;
        self.inv[old_y] = old_x;
    }

    /// Left-to-right fold of [`Permutation::reprogram`].
    pub fn reprogram_seq(&self, pairs: &[Pair]) -> Result<Permutation> {
        let n = self.n();
        for p in pairs {
            check_domain(p.x, n)?;
            check_domain(p.y, n)?;
        }
        let mut out = self.clone();
        for p in pairs {
            out.reprogram_in_place(p.x, p.y);
        }
        Ok(out)
    }
}

/// Lexicographic permutation iterator (next-permutation order).
pub struct Lexicographic {
    current: Option<Vec<usize>>,
}

impl Lexicographic {
    pub fn new(n: usize) -> Self {
        Lexicographic { current: Some((0..n).collect()) }
    }
}

impl Iterator for Lexicographic {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let cur = self.current.take()?;
        let out = Permutation::from_table(cur.clone()).expect("iterator keeps bijections");
        let mut next = cur;
        let n = next.len();
        if n >= 2 {
            let mut i = n - 1;
            while i > 0 && next[i - 1] >= next[i] {
                i -= 1;
            }
            if i > 0 {
                let mut j = n - 1;
                while next[j] <= next[i - 1] {
                    j -= 1;
                }
                next.swap(i - 1, j);
                next[i..].reverse();
                self.current = Some(next);
            }
        }
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub x: usize,
    pub y: usize,
}

impl Pair {
    pub fn new(x: usize, y: usize) -> Self {
        Pair { x, y }
    }
}

pub fn pairs(list: &[(usize, usize)]) -> Vec<Pair> {
    list.iter().map(|&(x, y)| Pair { x, y }).collect()
}

/// No repeated x entry and no repeated y entry.
pub fn is_disjoint(pairs: &[Pair]) -> bool {
    let mut xs = HashSet::new();
    let mut ys = HashSet::new();
    pairs.iter().all(|p| xs.insert(p.x) && ys.insert(p.y))
}

/// Disjoint, and `π(x_i) ≠ y_j` for every `i, j`.
pub fn is_good(pi: &Permutation, pairs: &[Pair]) -> bool {
    if !is_disjoint(pairs) {
        return false;
    }
    let ys: HashSet<usize> = pairs.iter().map(|p| p.y).collect();
    pairs.iter().all(|p| p.x < pi.n() && !ys.contains(&pi.apply(p.x)))
}

fn check_distinct(xs: &[usize]) -> Result<()> {
    let mut seen = HashSet::new();
    if xs.iter().all(|x| seen.insert(*x)) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("targets {xs:?} contain a repeated element")))
    }
}

pub fn star_pairs(pi_star: &Permutation, xs: &[usize]) -> Result<Vec<Pair>> {
    xs.iter()
        .map(|&x| {
            check_domain(x, pi_star.n())?;
            Ok(Pair { x, y: pi_star.apply(x) })
        })
        .collect()
}

/// Membership of `(π, π*)` in `G[x⃗*]`.
pub fn in_g(pi: &Permutation, pi_star: &Permutation, xs: &[usize]) -> Result<bool> {
    check_distinct(xs)?;
    if pi.n() != pi_star.n() {
        return Err(Error::Precondition("permutations have different domains".into()));
    }
    Ok(is_good(pi, &star_pairs(pi_star, xs)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitMiss {
    pub x_hit: usize,
    pub x_miss: usize,
    pub y_hit: usize,
    pub y_miss: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitMissSet {
    pub entries: Vec<HitMiss>,
}

pub fn hit_miss(pi: &Permutation, pi_star: &Permutation, xs: &[usize]) -> Result<HitMissSet> {
    if !in_g(pi, pi_star, xs)? {
        return Err(Error::Precondition("(pi, pi_star) is not good for the targets".into()));
    }
    let entries = xs
        .iter()
        .map(|&x| {
            let y = pi_star.apply(x);
            HitMiss { x_hit: x, x_miss: pi.apply_inverse(y), y_hit: y, y_miss: pi.apply(x) }
        })
        .collect();
    Ok(HitMissSet { entries })
}

/// Pointwise closed form of `π[x⃗→y⃗]` on a good tuple.
pub fn good_closed_form(pi: &Permutation, pairs: &[Pair]) -> Result<Permutation> {
    if !is_good(pi, pairs) {
        return Err(Error::Precondition("tuple is not good".into()));
    }
    let mut fwd = pi.table().to_vec();
    for p in pairs {
        fwd[pi.apply_inverse(p.y)] = pi.apply(p.x);
    }
    for p in pairs {
        fwd[p.x] = p.y;
    }
    Permutation::from_table(fwd)
}

pub fn bad_probability_bound(k: usize, n: usize) -> BigRational {
    BigRational::new(BigInt::from(k * k), BigInt::from(n.max(1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(t: &[usize]) -> Permutation {
        Permutation::from_table(t.to_vec()).unwrap()
    }

    #[test]
    fn reprogram_examples() {
        let id = Permutation::identity(4);
        assert_eq!(id.reprogram(0, 2).unwrap(), perm(&[2, 1, 0, 3]));
        let cyc = Permutation::from_cycles(4, &[&[0, 1, 2, 3]]).unwrap();
        assert_eq!(cyc.reprogram(0, 0).unwrap(), perm(&[0, 2, 3, 1]));
        assert_eq!(cyc.reprogram(2, cyc.apply(2)).unwrap(), cyc);
        assert!(matches!(id.reprogram(4, 0), Err(Error::Domain { value: 4, size: 4 })));
    }

    #[test]
    fn reprogram_seq_examples() {
        let id = Permutation::identity(4);
        let out = id.reprogram_seq(&pairs(&[(0, 1), (2, 3)])).unwrap();
        assert_eq!(out, perm(&[1, 0, 3, 2]));
        let a = id.reprogram_seq(&pairs(&[(0, 1), (1, 0)])).unwrap();
        let b = id.reprogram_seq(&pairs(&[(1, 0), (0, 1)])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, perm(&[1, 0, 2, 3]));
    }

    #[test]
    fn disjoint_and_good() {
        assert!(is_disjoint(&pairs(&[(0, 1), (2, 3)])));
        assert!(!is_disjoint(&pairs(&[(0, 1), (0, 3)])));
        assert!(!is_disjoint(&pairs(&[(0, 1), (2, 1)])));
        let id = Permutation::identity(4);
        assert!(is_good(&id, &pairs(&[(0, 1), (2, 3)])));
        assert!(!is_good(&id, &pairs(&[(0, 1), (1, 2)])));
        assert!(!is_good(&id, &pairs(&[(3, 3)])));
    }

    #[test]
    fn g_membership_and_hit_miss() {
        let id = Permutation::identity(4);
        let swap = Permutation::from_cycles(4, &[&[0, 1]]).unwrap();
        assert!(!in_g(&id, &id, &[0]).unwrap());
        assert!(in_g(&id, &swap, &[0]).unwrap());
        assert!(matches!(in_g(&id, &swap, &[1, 1]), Err(Error::Precondition(_))));

        let hm = hit_miss(&id, &swap, &[0]).unwrap().entries[0];
        assert_eq!(hm, HitMiss { x_hit: 0, x_miss: 1, y_hit: 1, y_miss: 0 });

        let cyc = Permutation::from_cycles(4, &[&[0, 1, 2, 3]]).unwrap();
        let s02 = Permutation::from_cycles(4, &[&[0, 2]]).unwrap();
        let hm = hit_miss(&cyc, &s02, &[0]).unwrap().entries[0];
        assert_eq!(hm, HitMiss { x_hit: 0, x_miss: 1, y_hit: 2, y_miss: 1 });
        assert!(hit_miss(&id, &id, &[0]).is_err());
    }

    #[test]
    fn bad_bound_values() {
        assert_eq!(bad_probability_bound(1, 16), BigRational::new(1.into(), 16.into()));
        assert_eq!(bad_probability_bound(2, 4), BigRational::from_integer(1.into()));
        let id = Permutation::identity(4);
        let bad = Permutation::all(4).iter().filter(|s| !in_g(&id, s, &[0]).unwrap()).count();
        assert_eq!(bad, 6);
    }

    #[test]
    fn enumeration_and_rank() {
        let all = Permutation::all(4);
        assert_eq!(all.len(), 24);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.rank(), i);
        }
        assert_eq!(Permutation::all(0).len(), 1);
    }

    #[test]
    fn json_round_trip_validates() {
        let p = Permutation::from_cycles(5, &[&[0, 3, 1]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":5,"fwd":[3,0,2,1,4]}"#);
        assert_eq!(serde_json::from_str::<Permutation>(&s).unwrap(), p);
        assert!(serde_json::from_str::<Permutation>(r#"{"n":3,"fwd":[0,0,1]}"#).is_err());
        assert!(serde_json::from_str::<Permutation>(r#"{"n":4,"fwd":[0,1,2]}"#).is_err());
    }
}
