//! Exhaustive checks of the reprogramming identities on small domains.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::cipher::{self, Cipher, Triple};
use crate::error::{Error, Result};
use crate::perm::{self, Pair, Permutation};
use crate::sim::{run_classical_sim, run_quantum_sim, ClassicalAdversary, CountingPort, SimChoice, SimMode};

/// Largest domain the exhaustive suites accept.
pub const MAX_EXHAUSTIVE_N: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub checked: u64,
    pub violations: u64,
}

impl SuiteResult {
    fn new(name: &str, n: usize, k: usize, (checked, violations): (u64, u64)) -> Self {
        SuiteResult { name: name.into(), n, k, checked, violations }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn ceiling(n: usize) -> Result<()> {
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Capability(format!("exhaustive suites stop at n = {MAX_EXHAUSTIVE_N}, got {n}")));
    }
    Ok(())
}

/// All length-`k` tuples over `0..n`.
fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out.into_iter().flat_map(|t| (0..n).map(move |v| [t.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Length-`k` tuples over `0..n` without repeats.
fn distinct_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    tuples(n, k).into_iter().filter(|t| (1..t.len()).all(|i| !t[..i].contains(&t[i]))).collect()
}

fn orderings(k: usize) -> Vec<Vec<usize>> {
    Permutation::all(k).into_iter().map(|p| p.table().to_vec()).collect()
}

fn sum_pairs(parts: Vec<(u64, u64)>) -> (u64, u64) {
    parts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn zip_pairs(xs: &[usize], ys: &[usize]) -> Vec<Pair> {
    xs.iter().zip(ys).map(|(&x, &y)| Pair::new(x, y)).collect()
}

/// `π[x⃗→y⃗]⁻¹ = π⁻¹[y⃗→x⃗]` for every pair list up to length `k`.
pub fn inverse_law(n: usize, k: usize) -> Result<SuiteResult> {
    inverse_law_with(n, k, false)
}

/// The inverse law with the pairs left unswapped, which must report violations.
pub fn mutated_inverse_law(n: usize, k: usize) -> Result<SuiteResult> {
    inverse_law_with(n, k, true)
}

fn inverse_law_with(n: usize, k: usize, mutate: bool) -> Result<SuiteResult> {
    ceiling(n)?;
    let lists: Vec<Vec<Pair>> = (1..=k)
        .flat_map(|len| {
            let t = tuples(n, 2 * len);
            t.into_iter().map(move |v| (0..len).map(|i| Pair::new(v[2 * i], v[2 * i + 1])).collect())
        })
        .collect();
    let parts = Permutation::all(n)
        .par_iter()
        .map(|pi| -> Result<(u64, u64)> {
            let inv = pi.inverse();
            let mut bad = 0;
            for l in &lists {
                let swapped: Vec<Pair> =
                    l.iter().map(|p| if mutate { *p } else { Pair::new(p.y, p.x) }).collect();
                bad += (pi.reprogram_seq(l)?.inverse() != inv.reprogram_seq(&swapped)?) as u64;
            }
            Ok((lists.len() as u64, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::new("inverse", n, k, sum_pairs(parts)))
}

/// Disjoint pairs reprogram to the same permutation in every order.
pub fn commutativity(n: usize, k: usize) -> Result<SuiteResult> {
    ceiling(n)?;
    let mut lists = Vec::new();
    for len in 1..=k {
        for xs in distinct_tuples(n, len) {
            if xs.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            for ys in distinct_tuples(n, len) {
                lists.push(zip_pairs(&xs, &ys));
            }
        }
    }
    let parts = Permutation::all(n)
        .par_iter()
        .map(|pi| -> Result<(u64, u64)> {
            let (mut checked, mut bad) = (0, 0);
            for l in &lists {
                let base = pi.reprogram_seq(l)?;
                for o in orderings(l.len()) {
                    let shuffled: Vec<Pair> = o.iter().map(|&i| l[i]).collect();
                    checked += 1;
                    bad += (pi.reprogram_seq(&shuffled)? != base) as u64;
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::new("commutativity", n, k, sum_pairs(parts)))
}

/// Good tuples: sequential reprogramming agrees with the pointwise closed form.
pub fn good_closed_form(n: usize, k: usize) -> Result<SuiteResult> {
    ceiling(n)?;
    let parts = Permutation::all(n)
        .par_iter()
        .map(|pi| -> Result<(u64, u64)> {
            let (mut checked, mut bad) = (0, 0);
            for len in 1..=k {
                for xs in distinct_tuples(n, len) {
                    for ys in distinct_tuples(n, len) {
                        let l = zip_pairs(&xs, &ys);
                        if !perm::is_good(pi, &l) {
                            continue;
                        }
                        checked += 1;
                        bad += (pi.reprogram_seq(&l)? != perm::good_closed_form(pi, &l)?) as u64;
                    }
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::new("good-closed-form", n, k, sum_pairs(parts)))
}

/// Partial folds of a good tuple agree with the full fold on the hit and
/// miss inputs of the folded indices, and with `π` away from all of them.
pub fn partial_reprogramming(n: usize, k: usize) -> Result<SuiteResult> {
    ceiling(n)?;
    let parts = Permutation::all(n)
        .par_iter()
        .map(|pi| -> Result<(u64, u64)> {
            let (mut checked, mut bad) = (0, 0);
            for len in 1..=k {
                for xs in distinct_tuples(n, len) {
                    for ys in distinct_tuples(n, len) {
                        let l = zip_pairs(&xs, &ys);
                        if !perm::is_good(pi, &l) {
                            continue;
                        }
                        let full = pi.reprogram_seq(&l)?;
                        let touched: Vec<[usize; 2]> = l.iter().map(|p| [p.x, pi.apply_inverse(p.y)]).collect();
                        for sub in 0..len {
                            for idx in distinct_tuples(len, sub + 1) {
                                let part: Vec<Pair> = idx.iter().map(|&j| l[j]).collect();
                                let partial = pi.reprogram_seq(&part)?;
                                for x in 0..n {
                                    let owner = touched.iter().position(|t| t.contains(&x));
                                    let ok = match owner {
                                        None => partial.apply(x) == pi.apply(x) && pi.apply(x) == full.apply(x),
                                        Some(j) if idx.contains(&j) => partial.apply(x) == full.apply(x),
                                        Some(_) => true,
                                    };
                                    checked += 1;
                                    bad += !ok as u64;
                                }
                            }
                        }
                    }
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::new("partial-reprogramming", n, k, sum_pairs(parts)))
}

/// For each `x*`, counts of `π[x*→π*(x*)]` over good `(π, π*)`; uniform iff all counts agree.
pub fn uniformity(n: usize) -> Result<Vec<BTreeMap<usize, u64>>> {
    ceiling(n)?;
    let all = Permutation::all(n);
    (0..n)
        .map(|x| {
            let mut counts: BTreeMap<usize, u64> = (0..all.len()).map(|r| (r, 0)).collect();
            for pi in &all {
                for ps in &all {
                    if perm::in_g(pi, ps, &[x])? {
                        *counts.get_mut(&pi.reprogram(x, ps.apply(x))?.rank()).expect("ranked") += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect()
}

pub fn uniformity_suite(n: usize) -> Result<SuiteResult> {
    let counts = uniformity(n)?;
    let checked = counts.len() as u64;
    let bad = counts
        .iter()
        .filter(|c| {
            let first = c.values().next().copied().unwrap_or(0);
            first == 0 || c.values().any(|v| *v != first)
        })
        .count() as u64;
    Ok(SuiteResult::new("uniformity", n, 1, (checked, bad)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadFraction {
    pub n: usize,
    pub k: usize,
    pub keys: usize,
    /// Largest exact bad fraction over all fixed oracles and targets.
    pub worst: String,
    pub worst_value: f64,
    pub bound: String,
    pub holds: bool,
}

/// Allocation-free negation of goodness for distinct `(key, x)` targets:
/// two targets under one key share an image, or some `O(K_i, x_i)` equals some `y_j`.
fn is_bad(keys: &[usize], xs: &[usize], o: impl Fn(usize, usize) -> usize, star: impl Fn(usize, usize) -> usize) -> bool {
    let k = xs.len();
    for i in 0..k {
        let yi = star(keys[i], xs[i]);
        let oi = o(keys[i], xs[i]);
        for j in 0..k {
            let yj = star(keys[j], xs[j]);
            if oi == yj || (i < j && keys[i] == keys[j] && yi == yj) {
                return true;
            }
        }
    }
    false
}

/// Worst bad fraction over every fixed `π` and distinct target tuple.
pub fn bad_probability_exhaustive(n: usize, k: usize) -> Result<BadFraction> {
    ceiling(n)?;
    let all = Permutation::all(n);
    let targets = distinct_tuples(n, k);
    let worst = all
        .par_iter()
        .map(|pi| -> Result<u64> {
            let mut w = 0;
            for xs in &targets {
                let keys = vec![0; xs.len()];
                let mut bad = 0;
                for ps in &all {
                    bad += is_bad(&keys, xs, |_, x| pi.apply(x), |_, x| ps.apply(x)) as u64;
                }
                w = w.max(bad);
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    Ok(bad_report(n, k, 1, bounds::ratio(worst, all.len() as u64)))
}

fn bad_report(n: usize, k: usize, keys: usize, worst: BigRational) -> BadFraction {
    let bound = perm::bad_probability_bound(k, n);
    BadFraction {
        n,
        k,
        keys,
        worst: bounds::format(&worst),
        worst_value: bounds::to_f64(&worst),
        bound: bounds::format(&bound),
        holds: worst <= bound,
    }
}

/// The cipher version over every fixed cipher with `keys` keys.
pub fn cipher_bad_probability_exhaustive(keys: usize, n: usize, k: usize) -> Result<BadFraction> {
    if n > 4 || keys > 2 {
        return Err(Error::Capability("cipher enumeration stops at two keys on four points".into()));
    }
    let all = Cipher::all(keys, n);
    let cells: Vec<(usize, usize)> = (0..keys).flat_map(|key| (0..n).map(move |x| (key, x))).collect();
    let targets: Vec<Vec<(usize, usize)>> = distinct_tuples(cells.len(), k)
        .into_iter()
        .map(|t| t.into_iter().map(|i| cells[i]).collect())
        .collect();
    let worst = all
        .par_iter()
        .map(|e| -> Result<u64> {
            let mut w = 0;
            for t in &targets {
                let ks: Vec<usize> = t.iter().map(|c| c.0).collect();
                let xs: Vec<usize> = t.iter().map(|c| c.1).collect();
                let mut bad = 0;
                for es in &all {
                    bad += is_bad(&ks, &xs, |k, x| e.encrypt(k, x), |k, x| es.encrypt(k, x)) as u64;
                }
                w = w.max(bad);
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    Ok(bad_report(n, k, keys, bounds::ratio(worst, all.len() as u64)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadEstimate {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub estimate: f64,
    pub sigma: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo bad probability with random `π`, `π*` and targets.
pub fn bad_probability_sampled(n: usize, k: usize, trials: usize, seed: u64) -> Result<BadEstimate> {
    if k > n {
        return Err(Error::Parameter(format!("cannot pick {k} distinct targets from {n}")));
    }
    let chunks = 64u64;
    let per = trials.div_ceil(chunks as usize);
    let bad: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut bad = 0;
            for _ in (c as usize * per)..((c as usize + 1) * per).min(trials) {
                let pi = Permutation::random(n, &mut rng);
                let ps = Permutation::random(n, &mut rng);
                let mut xs = Vec::with_capacity(k);
                while xs.len() < k {
                    let x = rng.gen_range(0..n);
                    if !xs.contains(&x) {
                        xs.push(x);
                    }
                }
                bad += !perm::in_g(&pi, &ps, &xs)? as u64;
            }
            Ok(bad)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let p = bad as f64 / trials as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let bound = bounds::to_f64(&perm::bad_probability_bound(k, n));
    Ok(BadEstimate { n, k, trials, estimate: p, sigma, bound, holds: p <= bound + 3.0 * sigma })
}

/// One-key ciphers against permutations: reprogramming, goodness, hit and
/// miss values, and classical and quantum simulator traces must coincide.
pub fn cipher_degeneration(
    n: usize,
    classical: &[Box<dyn ClassicalAdversary>],
    quantum: &[crate::sim::QuantumAdversary],
) -> Result<SuiteResult> {
    ceiling(n)?;
    let all = Permutation::all(n);
    let parts = all
        .par_iter()
        .map(|pi| -> Result<(u64, u64)> {
            let e = Cipher::single(pi.clone());
            let (mut checked, mut bad) = (0u64, 0u64);
            let mut note = |same: bool| {
                checked += 1;
                bad += !same as u64;
            };
            for x in 0..n {
                for y in 0..n {
                    note(e.reprogram(Triple::new(0, x, y))?.key(0) == &pi.reprogram(x, y)?);
                }
            }
            for ps in &all {
                let es = Cipher::single(ps.clone());
                for x in 0..n {
                    let good = perm::in_g(pi, ps, &[x])?;
                    note(good == cipher::in_g(&e, &es, &[0], &[x])?);
                    if good {
                        let h = perm::hit_miss(pi, ps, &[x])?.entries[0];
                        let c = cipher::hit_miss(&e, &es, &[0], &[x])?[0];
                        note((h.x_hit, h.x_miss, h.y_hit, h.y_miss) == (c.x_hit, c.x_miss, c.y_hit, c.y_miss));
                    }
                }
                for adv in classical {
                    for choice in SimChoice::enumerate(adv.budget(), 1, false) {
                        for coins in 0..adv.coin_space() {
                            let mut p1 = CountingPort::new(ps);
                            let mut p2 = CountingPort::new(&es);
                            let a = run_classical_sim(adv.as_ref(), pi, &mut p1, &choice, coins)?;
                            let b = run_classical_sim(adv.as_ref(), &e, &mut p2, &choice, coins)?;
                            note(a.output == b.output && a.trace == b.trace && p1.log == p2.log);
                            note(a.oracle.current() == b.oracle.current().key(0));
                        }
                    }
                }
                for adv in quantum {
                    for choice in SimChoice::enumerate(adv.slots(), 1, true) {
                        let mut p1 = CountingPort::new(ps);
                        let mut p2 = CountingPort::new(&es);
                        let a = run_quantum_sim(adv, pi, &mut p1, &choice, SimMode::Exact, None)?;
                        let b = run_quantum_sim(adv, &e, &mut p2, &choice, SimMode::Exact, None)?;
                        let same = a.len() == b.len()
                            && a.iter().zip(&b).all(|(u, v)| {
                                u.weight.to_bits() == v.weight.to_bits()
                                    && u.output == v.output
                                    && u.trace == v.trace
                                    && u.oracle.current() == v.oracle.current().key(0)
                            });
                        note(same);
                    }
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteResult::new("cipher-degeneration", n, 1, sum_pairs(parts)))
}

/// Every permutation suite at `n` with arity up to `k`.
pub fn permutation_suites(n: usize, k: usize) -> Result<Vec<SuiteResult>> {
    Ok(vec![inverse_law(n, k)?, commutativity(n, k)?, good_closed_form(n, k)?, partial_reprogramming(n, k)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_four_points() {
        for s in permutation_suites(4, 2).unwrap() {
            assert!(s.passed() && s.checked > 0, "{s:?}");
        }
        assert!(uniformity_suite(4).unwrap().passed());
        assert!(inverse_law(7, 1).is_err());
    }

    #[test]
    fn bad_fraction_matches_example() {
        let r = bad_probability_exhaustive(4, 1).unwrap();
        assert_eq!(r.worst, "1/4");
        assert!(r.holds);
    }

    #[test]
    fn fast_badness_agrees_with_membership() {
        let all = Cipher::all(2, 3);
        let e = &all[7];
        for es in &all {
            for (ks, xs) in [(vec![0, 1], vec![0, 0]), (vec![1, 1], vec![2, 0]), (vec![0], vec![1])] {
                let slow = !cipher::in_g(e, es, &ks, &xs).unwrap();
                assert_eq!(slow, is_bad(&ks, &xs, |k, x| e.encrypt(k, x), |k, x| es.encrypt(k, x)));
            }
        }
    }

    #[test]
    fn tuple_helpers() {
        assert_eq!(tuples(3, 2).len(), 9);
        assert_eq!(distinct_tuples(4, 2).len(), 12);
        assert_eq!(orderings(3).len(), 6);
    }
}
