//! The lifted `k`-query adversary and exact or sampled comparisons of its
//! success against the original adversary.

use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::games::{play, Challenger, Relation};
use crate::oracle::KeyedOracle;
use crate::perm::Permutation;
use crate::sim::{
    run_classical_sim, run_quantum_sim, ClassicalAdversary, CountingPort, Output, QuantumAdversary, QueryPort,
    SimChoice, SimMode,
};

fn wins<O: KeyedOracle>(rel: &Relation, out: &Output, oracle: &O) -> Result<bool> {
    if out.xs.len() != rel.k {
        return Ok(false);
    }
    Ok(rel.wins(out, &out.images(oracle)?))
}

/// Exact success of a classical adversary, averaged over `oracles` and its coins.
pub fn classical_success<O: KeyedOracle>(
    adv: &dyn ClassicalAdversary,
    rel: &Relation,
    oracles: &[O],
) -> Result<BigRational> {
    let coins = adv.coin_space();
    let won = oracles
        .par_iter()
        .map(|o| -> Result<u64> {
            let mut w = 0;
            for c in 0..coins {
                let mut port = CountingPort::with_budget(o, adv.budget());
                let out = adv.run(&mut port, c)?;
                w += wins(rel, &out, o)? as u64;
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(bounds::ratio(won, (oracles.len() * coins) as u64))
}

/// `B` built from a classical adversary: its coins pick an internal oracle,
/// a simulator choice, and the inner adversary's coins.
pub struct LiftedClassical<'a, O: KeyedOracle> {
    pub inner: &'a dyn ClassicalAdversary,
    pub k: usize,
    pub internal: Vec<O>,
    pub choices: Vec<SimChoice>,
}

impl<'a, O: KeyedOracle> LiftedClassical<'a, O> {
    pub fn new(inner: &'a dyn ClassicalAdversary, k: usize, internal: Vec<O>) -> Self {
        let choices = SimChoice::enumerate(inner.budget(), k, false);
        LiftedClassical { inner, k, internal, choices }
    }

    fn decode(&self, coins: usize) -> (usize, usize, usize) {
        let a = self.inner.coin_space();
        let c = self.choices.len();
        (coins / (c * a), (coins / a) % c, coins % a)
    }
}

impl<O: KeyedOracle> ClassicalAdversary for LiftedClassical<'_, O> {
    fn name(&self) -> String {
        format!("lifted({})", self.inner.name())
    }

    fn budget(&self) -> usize {
        self.k
    }

    fn coin_space(&self) -> usize {
        self.internal.len() * self.choices.len() * self.inner.coin_space()
    }

    fn run(&self, port: &mut dyn QueryPort, coins: usize) -> Result<Output> {
        let (p, c, a) = self.decode(coins);
        Ok(run_classical_sim(self.inner, &self.internal[p], port, &self.choices[c], a)?.output)
    }
}

/// Outcome of one inequality check `Pr[B] ≥ factor · Pr[A]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftCheck {
    pub adversary: String,
    pub relation: String,
    pub n: usize,
    pub q: usize,
    pub k: usize,
    pub pr_a: f64,
    pub pr_b: f64,
    pub factor: String,
    pub factor_value: f64,
    pub exact: bool,
    /// Monte Carlo sample count, zero for exact checks.
    pub trials: usize,
    /// Lower end of the 3σ interval of `Pr[B] − factor·Pr[A]`, or its exact value.
    pub margin: f64,
    pub holds: bool,
}

/// Exact classical lifting check with `k = 1` over every oracle in `oracles`.
pub fn check_classical<O: KeyedOracle>(
    adv: &dyn ClassicalAdversary,
    rel: &Relation,
    oracles: &[O],
    k: usize,
) -> Result<LiftCheck> {
    let n = oracles.first().map_or(0, |o| o.block_size());
    let pa = classical_success(adv, rel, oracles)?;
    let lifted = LiftedClassical::new(adv, k, oracles.to_vec());
    let pb = classical_success(&lifted, rel, oracles)?;
    let factor = bounds::classical_lifting_factor(k, n, adv.budget());
    let margin = &pb - &factor * &pa;
    Ok(LiftCheck {
        adversary: adv.name(),
        relation: rel.name.clone(),
        n,
        q: adv.budget(),
        k,
        pr_a: bounds::to_f64(&pa),
        pr_b: bounds::to_f64(&pb),
        factor: bounds::format(&factor),
        factor_value: bounds::to_f64(&factor),
        exact: true,
        trials: 0,
        margin: bounds::to_f64(&margin),
        holds: margin >= BigRational::zero(),
    })
}

/// Probability that a quantum adversary wins on `oracle`.
pub fn quantum_win<O: KeyedOracle>(adv: &QuantumAdversary, rel: &Relation, oracle: &O) -> Result<f64> {
    let mut p = 0.0;
    for (out, w) in adv.output_distribution(oracle, None)? {
        if wins(rel, &out, oracle)? {
            p += w;
        }
    }
    Ok(p)
}

/// Exact success of a quantum adversary averaged over `oracles`.
pub fn quantum_success<O: KeyedOracle>(adv: &QuantumAdversary, rel: &Relation, oracles: &[O]) -> Result<f64> {
    let total: f64 =
        oracles.par_iter().map(|o| quantum_win(adv, rel, o)).collect::<Result<Vec<_>>>()?.into_iter().sum();
    Ok(total / oracles.len() as f64)
}

/// `B` built from a quantum adversary.
pub struct LiftedQuantum<'a> {
    pub inner: &'a QuantumAdversary,
    pub k: usize,
    pub choices: Vec<SimChoice>,
}

impl<'a> LiftedQuantum<'a> {
    pub fn new(inner: &'a QuantumAdversary, k: usize) -> Self {
        LiftedQuantum { inner, k, choices: SimChoice::enumerate(inner.slots(), k, true) }
    }

    /// Output distribution of `B^{π*}` for fixed internal oracle and choice,
    /// with the external query count of every branch checked against `k`.
    pub fn branches<O: KeyedOracle>(
        &self,
        pi: &O,
        pi_star: &O,
        choice: &SimChoice,
        message: Option<usize>,
    ) -> Result<Vec<(f64, Output)>> {
        let mut port = CountingPort::new(pi_star);
        let branches = run_quantum_sim(self.inner, pi, &mut port, choice, SimMode::Exact, message)?;
        let mut out = Vec::with_capacity(branches.len());
        for b in branches {
            if b.external_queries() > self.k {
                return Err(Error::Protocol(format!("lifted adversary made {} external queries", b.external_queries())));
            }
            out.push((b.weight, b.output));
        }
        Ok(out)
    }

    /// Probability that `B^{π*}` wins, exactly, over the given internal oracles.
    pub fn win_probability_exact<O: KeyedOracle>(&self, rel: &Relation, pi_star: &O, internal: &[O]) -> Result<f64> {
        let mut total = 0.0;
        for pi in internal {
            for choice in &self.choices {
                for (w, out) in self.branches(pi, pi_star, choice, None)? {
                    if wins(rel, &out, pi_star)? {
                        total += w;
                    }
                }
            }
        }
        Ok(total / (internal.len() * self.choices.len()) as f64)
    }

    /// One run of `B` against `external`: uniform internal oracle shaped like
    /// `template`, uniform choice, Born-rule measurements.
    pub fn run_sample<O: KeyedOracle>(
        &self,
        template: &O,
        external: &mut dyn QueryPort,
        rng: &mut dyn RngCore,
        message: Option<usize>,
    ) -> Result<Output> {
        let pi = template.random_like(rng);
        let choice = self.choices[rng.gen_range(0..self.choices.len())].clone();
        let mut b = run_quantum_sim(self.inner, &pi, external, &choice, SimMode::Sample(rng), message)?;
        Ok(b.pop().expect("sample mode returns one branch").output)
    }
}

/// Exact quantum lifting check over every `π*` and internal `π` in `oracles`.
pub fn check_quantum<O: KeyedOracle>(
    adv: &QuantumAdversary,
    rel: &Relation,
    oracles: &[O],
    k: usize,
) -> Result<LiftCheck> {
    let n = oracles.first().map_or(0, |o| o.block_size());
    let pa = quantum_success(adv, rel, oracles)?;
    let lifted = LiftedQuantum::new(adv, k);
    let pb: f64 = oracles
        .par_iter()
        .map(|ps| lifted.win_probability_exact(rel, ps, oracles))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<f64>()
        / oracles.len() as f64;
    let factor = bounds::quantum_lifting_factor(k, n, adv.queries());
    let f = bounds::to_f64(&factor);
    let margin = pb - f * pa;
    Ok(LiftCheck {
        adversary: adv.name.clone(),
        relation: rel.name.clone(),
        n,
        q: adv.queries(),
        k,
        pr_a: pa,
        pr_b: pb,
        factor: bounds::format(&factor),
        factor_value: f,
        exact: true,
        trials: 0,
        margin,
        holds: margin >= -1e-9,
    })
}

const CHUNKS: u64 = 64;

/// Seeded Monte Carlo quantum lifting check on random permutations of `n` points.
///
/// Each trial draws `π*`, runs `B` once (internal `π`, choice and
/// measurements sampled) against it, and records
/// `D = [B wins] − factor · Pr[A wins | π*]`, the second term exact. The
/// check passes when the mean of `D` plus 3σ is non-negative.
/// Chunk `i` uses stream `i` of the seed, so results do not depend on thread count.
pub fn monte_carlo_quantum(
    adv: &QuantumAdversary,
    rels: &[Relation],
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<LiftCheck>> {
    let lifted = LiftedQuantum::new(adv, k);
    let factor = bounds::quantum_lifting_factor(k, n, adv.queries());
    let f = bounds::to_f64(&factor);
    let per_chunk = trials.div_ceil(CHUNKS as usize);
    let chunk_stats = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| -> Result<Vec<[f64; 4]>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let start = chunk as usize * per_chunk;
            let end = (start + per_chunk).min(trials);
            let mut acc = vec![[0.0; 4]; rels.len()];
            for _ in start..end {
                let pi_star = Permutation::random(n, &mut rng);
                let mut port = CountingPort::with_budget(&pi_star, k);
                let out_b = lifted.run_sample(&pi_star, &mut port, &mut rng, None)?;
                let dist = adv.output_distribution(&pi_star, None)?;
                for (r, rel) in rels.iter().enumerate() {
                    let mut a = 0.0;
                    for (out, w) in &dist {
                        if wins(rel, out, &pi_star)? {
                            a += w;
                        }
                    }
                    let b = if wins(rel, &out_b, &pi_star)? { 1.0 } else { 0.0 };
                    let d = b - f * a;
                    acc[r][0] += a;
                    acc[r][1] += b;
                    acc[r][2] += d;
                    acc[r][3] += d * d;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let t = trials as f64;
    Ok(rels
        .iter()
        .enumerate()
        .map(|(r, rel)| {
            let mut s = [0.0; 4];
            for c in &chunk_stats {
                for i in 0..4 {
                    s[i] += c[r][i];
                }
            }
            let mean = s[2] / t;
            let var = (s[3] / t - mean * mean).max(0.0);
            let margin = mean + 3.0 * (var / t).sqrt();
            LiftCheck {
                adversary: adv.name.clone(),
                relation: rel.name.clone(),
                n,
                q: adv.queries(),
                k,
                pr_a: s[0] / t,
                pr_b: s[1] / t,
                factor: bounds::format(&factor),
                factor_value: f,
                exact: false,
                trials,
                margin,
                holds: margin >= 0.0,
            }
        })
        .collect())
}

/// Probability, over `π*` in `oracles` and the challenger's coins, that the
/// challenger accepts the quantum adversary's reply.
pub fn interactive_success_a<O: KeyedOracle>(
    adv: &QuantumAdversary,
    ch: &dyn Challenger,
    oracles: &[O],
) -> Result<f64> {
    let coins = ch.coin_space();
    let per: Vec<f64> = oracles
        .par_iter()
        .map(|ps| -> Result<f64> {
            let mut acc = 0.0;
            for c in 0..coins {
                let mut port = CountingPort::new(ps);
                let msg = ch.open(&mut port, c)?;
                for (out, w) in adv.output_distribution(ps, msg)? {
                    let mut port = CountingPort::new(ps);
                    let (verdict, _) = play(ch, &mut port, c, &mut |_| Ok(out.clone()))?;
                    if verdict {
                        acc += w;
                    }
                }
            }
            Ok(acc / coins as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.iter().sum::<f64>() / oracles.len() as f64)
}

/// The same probability for the lifted adversary, which answers the
/// challenger by running the simulator with `π*` as its external oracle.
/// The number of reprogrammed indices equals the challenger's query budget.
pub fn interactive_success_b<O: KeyedOracle>(
    adv: &QuantumAdversary,
    ch: &dyn Challenger,
    oracles: &[O],
) -> Result<f64> {
    let lifted = LiftedQuantum::new(adv, ch.budget());
    let coins = ch.coin_space();
    let per: Vec<f64> = oracles
        .par_iter()
        .map(|ps| -> Result<f64> {
            let mut acc = 0.0;
            for c in 0..coins {
                let mut port = CountingPort::new(ps);
                let msg = ch.open(&mut port, c)?;
                for pi in oracles {
                    for choice in &lifted.choices {
                        for (w, out) in lifted.branches(pi, ps, choice, msg)? {
                            let mut port = CountingPort::new(ps);
                            let (verdict, _) = play(ch, &mut port, c, &mut |_| Ok(out.clone()))?;
                            if verdict {
                                acc += w;
                            }
                        }
                    }
                }
            }
            Ok(acc / (coins * oracles.len() * lifted.choices.len()) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per.iter().sum::<f64>() / oracles.len() as f64)
}

/// Exact interactive lifting check.
pub fn check_interactive<O: KeyedOracle>(
    adv: &QuantumAdversary,
    ch: &dyn Challenger,
    oracles: &[O],
) -> Result<LiftCheck> {
    let n = oracles.first().map_or(0, |o| o.block_size());
    let k = ch.budget();
    let pa = interactive_success_a(adv, ch, oracles)?;
    let pb = interactive_success_b(adv, ch, oracles)?;
    let factor = bounds::quantum_lifting_factor(k, n, adv.queries());
    let f = bounds::to_f64(&factor);
    let margin = pb - f * pa;
    Ok(LiftCheck {
        adversary: adv.name.clone(),
        relation: ch.name(),
        n,
        q: adv.queries(),
        k,
        pr_a: pa,
        pr_b: pb,
        factor: bounds::format(&factor),
        factor_value: f,
        exact: true,
        trials: 0,
        margin,
        holds: margin >= -1e-9,
    })
}

/// Fraction of `π*` for which `(π, π*)` is not good for `xs`.
pub fn bad_fraction<O: KeyedOracle>(pi: &O, stars: &[O], keys: &[usize], xs: &[usize]) -> Result<BigRational> {
    let mut bad = 0u64;
    for s in stars {
        bad += !pi.is_good_for(s, keys, xs)? as u64;
    }
    Ok(bounds::ratio(bad, stars.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery;
    use crate::games::{InvertChallenger, NullChallenger, RelationChallenger};

    #[test]
    fn lifted_classical_is_budgeted() {
        let perms = Permutation::all(4);
        let rel = Relation::fixed_point(4);
        let chain = battery::Chain { n: 4, queries: 2, random_start: false };
        let lifted = LiftedClassical::new(&chain, 1, perms.clone());
        assert_eq!(lifted.coin_space(), 24 * 5);
        let check = check_classical(&chain, &rel, &perms, 1).unwrap();
        assert!(check.holds, "{check:?}");
        assert_eq!(check.factor, "3/20");
    }

    #[test]
    fn quantum_check_small() {
        let perms = Permutation::all(4);
        let rel = Relation::fixed_point(4);
        let g = battery::grover_fixed_point(4, 1).unwrap();
        let c = check_quantum(&g, &rel, &perms, 1).unwrap();
        assert!(c.holds, "{c:?}");
        assert!((c.pr_a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interactive_matches_plain() {
        let perms = Permutation::all(4);
        let rel = Relation::fixed_point(4);
        let adv = battery::uniform_guess(4).unwrap();
        let ch = RelationChallenger { relation: rel.clone() };
        let a = interactive_success_a(&adv, &ch, &perms).unwrap();
        assert!((a - quantum_success(&adv, &rel, &perms).unwrap()).abs() < 1e-12);
        let null = interactive_success_b(&adv, &NullChallenger, &perms).unwrap();
        assert!((null - 1.0).abs() < 1e-12);
        let inv = check_interactive(&battery::message_inverter(4).unwrap(), &InvertChallenger { n: 4 }, &perms).unwrap();
        assert!((inv.pr_a - 1.0).abs() < 1e-12 && inv.holds);
    }
}
