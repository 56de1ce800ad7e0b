//! Sponge hashing over a permutation, Davies-Meyer and the PGV family over a
//! cipher, and the tail bounds used for them.
//!
//! Bitstrings are integers read most significant bit first, so the leftmost
//! bit of a string is its high bit. The sponge rate block is the top `r`
//! bits of the `(r+c)`-bit state.

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::cipher::Cipher;
use crate::error::{check_domain, Error, Result};
use crate::games::Relation;
use crate::perm::Permutation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpongeParams {
    pub r: usize,
    pub c: usize,
    pub m: usize,
    pub n: usize,
}

impl SpongeParams {
    pub fn new(r: usize, c: usize, m: usize, n: usize) -> Result<Self> {
        if r == 0 || n == 0 {
            return Err(Error::Parameter("sponge needs r >= 1 and n >= 1".into()));
        }
        if r + c > 24 || m > 40 || n > 40 {
            return Err(Error::Parameter(format!("sponge ({r},{c},{m},{n}) is beyond desk scale")));
        }
        Ok(SpongeParams { r, c, m, n })
    }

    /// Bound-only parameters; no size ceiling.
    pub fn symbolic(r: usize, c: usize, m: usize, n: usize) -> Self {
        SpongeParams { r, c, m, n }
    }

    pub fn absorb_blocks(&self) -> usize {
        (self.m + 1).div_ceil(self.r)
    }

    pub fn squeeze_blocks(&self) -> usize {
        self.n.div_ceil(self.r)
    }

    /// Number of permutation calls per evaluation.
    pub fn ell(&self) -> usize {
        self.absorb_blocks() + self.squeeze_blocks() - 1
    }

    pub fn state_size(&self) -> usize {
        1 << (self.r + self.c)
    }

    pub fn label(&self) -> String {
        format!("r={};c={};m={};n={}", self.r, self.c, self.m, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpongeTrace {
    pub padded: u64,
    /// State fed to each permutation call.
    pub calls: Vec<usize>,
    pub output: u64,
}

/// Pads with `1‖0*`, absorbs by xoring into the rate then permuting, and
/// squeezes with a permutation call between extractions.
pub fn sponge_trace(params: &SpongeParams, pi: &Permutation, x: u64) -> Result<SpongeTrace> {
    if pi.n() != params.state_size() {
        return Err(Error::Dimension(format!("permutation on {} points, state has {}", pi.n(), params.state_size())));
    }
    if params.m < 64 && x >> params.m != 0 {
        return Err(Error::Domain { value: x as usize, size: 1 << params.m });
    }
    let (r, c) = (params.r, params.c);
    let la = params.absorb_blocks();
    let ls = params.squeeze_blocks();
    let pad_len = la * r - params.m - 1;
    let padded = ((x << 1) | 1) << pad_len;
    let rate_mask = (1u64 << r) - 1;
    let mut calls = Vec::with_capacity(params.ell());
    let mut s = 0usize;
    for i in 0..la {
        let block = (padded >> ((la - 1 - i) * r)) & rate_mask;
        s ^= (block as usize) << c;
        calls.push(s);
        s = pi.apply(s);
    }
    let mut z = (s >> c) as u64;
    for _ in 1..ls {
        calls.push(s);
        s = pi.apply(s);
        z = (z << r) | (s >> c) as u64;
    }
    let output = z >> (ls * r - params.n);
    Ok(SpongeTrace { padded, calls, output })
}

pub fn sponge(params: &SpongeParams, pi: &Permutation, x: u64) -> Result<u64> {
    Ok(sponge_trace(params, pi, x)?.output)
}

/// How often a preimage of the all-zero output and a collision exist among
/// all `2^m` inputs, over seeded random permutations. Descriptive only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceStats {
    pub params: SpongeParams,
    pub samples: usize,
    pub preimage_rate: f64,
    pub collision_rate: f64,
}

pub fn sponge_brute_force(params: &SpongeParams, samples: usize, seed: u64) -> Result<BruteForceStats> {
    if params.m > 16 {
        return Err(Error::Capability(format!("2^{} inputs is too many to enumerate", params.m)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut preimages, mut collisions) = (0usize, 0usize);
    for _ in 0..samples {
        let pi = Permutation::random(params.state_size(), &mut rng);
        let mut seen = HashSet::new();
        let mut collided = false;
        for x in 0..1u64 << params.m {
            collided |= !seen.insert(sponge(params, &pi, x)?);
        }
        preimages += seen.contains(&0) as usize;
        collisions += collided as usize;
    }
    let t = samples.max(1) as f64;
    Ok(BruteForceStats {
        params: *params,
        samples,
        preimage_rate: preimages as f64 / t,
        collision_rate: collisions as f64 / t,
    })
}

/// `E_m(h) ⊕ h`.
pub fn davies_meyer(e: &Cipher, h: usize, msg: usize) -> Result<usize> {
    check_domain(msg, e.key_count())?;
    check_domain(h, e.n())?;
    Ok(e.encrypt(msg, h) ^ h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Const,
    H,
    M,
    HxorM,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Const, Source::H, Source::M, Source::HxorM];

    fn resolve(self, v: usize, h: usize, m: usize) -> usize {
        match self {
            Source::Const => v,
            Source::H => h,
            Source::M => m,
            Source::HxorM => h ^ m,
        }
    }
}

/// `f(h, m) = E_k(x) ⊕ s` with each of `k, x, s` drawn from `{v, h, m, h⊕m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PgvSelector {
    pub key: Source,
    pub input: Source,
    pub feed: Source,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PgvGroup {
    One,
    Two,
    Three,
}

impl PgvSelector {
    pub const DAVIES_MEYER: PgvSelector = PgvSelector { key: Source::M, input: Source::H, feed: Source::H };

    pub fn all() -> Vec<PgvSelector> {
        let mut out = Vec::with_capacity(64);
        for key in Source::ALL {
            for input in Source::ALL {
                for feed in Source::ALL {
                    out.push(PgvSelector { key, input, feed });
                }
            }
        }
        out
    }

    /// Classification transcribed from the standard black-box PGV analysis.
    pub fn group(&self) -> PgvGroup {
        use Source::*;
        let data = [H, M, HxorM];
        if data.contains(&self.key)
            && data.contains(&self.input)
            && data.contains(&self.feed)
            && self.input != self.key
            && self.feed != self.key
        {
            return PgvGroup::One;
        }
        if matches!(self.key, M | HxorM)
            && data.contains(&self.input)
            && self.input != self.key
            && (self.feed == Const || self.feed == self.key)
        {
            return PgvGroup::Two;
        }
        PgvGroup::Three
    }
}

/// Key and block spaces are the same set, so any source can key the cipher.
pub fn pgv(e: &Cipher, sel: PgvSelector, const_v: usize, h: usize, msg: usize) -> Result<usize> {
    if e.key_count() != e.n() {
        return Err(Error::Precondition("pgv needs as many keys as blocks".into()));
    }
    for v in [const_v, h, msg] {
        check_domain(v, e.n())?;
    }
    let k = sel.key.resolve(const_v, h, msg);
    let x = sel.input.resolve(const_v, h, msg);
    let s = sel.feed.resolve(const_v, h, msg);
    Ok(e.encrypt(k, x) ^ s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PmaxKind {
    /// `2 · max_x Pr_y[(x, y) ∈ R]`, arity one.
    K1,
    /// `C(2k,k) · Pr[some reordering of y⃗ lies in R_out]`.
    OutputOnly,
}

/// Upper bound on the best classical success against `rel`, computed by enumeration.
pub fn p_max_bound(rel: &Relation, kind: PmaxKind) -> Result<BigRational> {
    let ny = rel.y_size;
    match kind {
        PmaxKind::K1 => {
            if rel.k != 1 {
                return Err(Error::Precondition(format!("k1 bound needs arity 1, got {}", rel.k)));
            }
            let best = (0..rel.x_size)
                .map(|x| (0..ny).filter(|&y| (0..rel.z_size).any(|z| rel.holds(&[x], &[y], z))).count())
                .max()
                .unwrap_or(0);
            Ok(bounds::int(2) * bounds::ratio(best as u64, ny as u64))
        }
        PmaxKind::OutputOnly => {
            let out = rel
                .output_predicate()
                .ok_or_else(|| Error::Precondition(format!("relation {} depends on x", rel.name)))?;
            let k = rel.k;
            let total = (ny as u64).checked_pow(k as u32).filter(|t| *t <= 1 << 24).ok_or_else(|| {
                Error::Capability(format!("{ny}^{k} output tuples is too many to enumerate"))
            })?;
            let perms = crate::perm::Permutation::all(k);
            let mut ys = vec![0usize; k];
            let mut hits = 0u64;
            for t in 0..total {
                let mut rem = t;
                for y in ys.iter_mut().rev() {
                    *y = (rem % ny as u64) as usize;
                    rem /= ny as u64;
                }
                let any = perms.iter().any(|s| {
                    let permuted: Vec<usize> = (0..k).map(|i| ys[s.apply(i)]).collect();
                    out(&permuted)
                });
                hits += any as u64;
            }
            let c2k = BigRational::from_integer(BigInt::from(binomial(BigUint::from(2 * k), BigUint::from(k))));
            Ok(c2k * bounds::ratio(hits, total))
        }
    }
}

/// `C(2k,k) / 2^{(k-1)n}`, the output-only bound for `k`-way output equality.
pub fn multicollision_pmax(k: u64, n_out: u64) -> BigRational {
    let c2k = BigRational::from_integer(BigInt::from(binomial(BigUint::from(2 * k), BigUint::from(k))));
    c2k / bounds::pow2(k.saturating_sub(1) * n_out)
}
