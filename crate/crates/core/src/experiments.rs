//! Batch experiments behind the command line: configs, reports, and the
//! bound table.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra;
use crate::battery;
use crate::bounds;
use crate::constructions::SpongeParams;
use crate::error::{Error, Result};
use crate::games::{self, game_bound, BoundReport, GameParams, InvertChallenger, OneWayChallenger, Relation, RelationChallenger};
use crate::lifting::{self, LiftCheck};
use crate::perm::{self, Permutation};
use crate::sim::{
    decomposition_residual, run_classical_sim, run_quantum_sim, trace_to_jsonl, CountingPort, SimChoice, SimMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exhaustive,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Classical,
    Quantum,
    Interactive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: usize,
    pub q: usize,
    pub k: usize,
    pub seed: u64,
    pub mode: Mode,
    pub trials: usize,
    pub game: Option<String>,
    pub model: Model,
    /// Exhaustive runs whose estimated work exceeds this are refused.
    pub ceiling: u64,
    /// Deliberately breaks one algebra check; used to exercise the failure path.
    #[serde(default)]
    pub mutate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            n: 4,
            q: 1,
            k: 1,
            seed: 0,
            mode: Mode::Exhaustive,
            trials: 100_000,
            game: None,
            model: Model::Quantum,
            ceiling: 50_000_000,
            mutate: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub exact: bool,
    /// Enumeration cardinality of exhaustive runs.
    pub enumeration: Option<u64>,
    /// Sample count of Monte Carlo runs; their intervals are 3σ.
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub results: Vec<Value>,
    pub aggregate: Aggregate,
    pub pass: bool,
    pub wall_clock_ms: u128,
}

impl ExperimentReport {
    fn build(config: &ExperimentConfig, results: Vec<(Value, bool)>, exact: bool, enumeration: Option<u64>, start: Instant) -> Self {
        let passed = results.iter().filter(|r| r.1).count();
        let failed = results.len() - passed;
        ExperimentReport {
            config: config.clone(),
            aggregate: Aggregate {
                instances: results.len(),
                passed,
                failed,
                exact,
                enumeration,
                trials: (!exact).then_some(config.trials),
            },
            pass: failed == 0,
            results: results.into_iter().map(|r| r.0).collect(),
            wall_clock_ms: start.elapsed().as_millis(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn guard(cfg: &ExperimentConfig, cost: u64) -> Result<()> {
    if cost > cfg.ceiling {
        return Err(Error::Capability(format!("exhaustive cost {cost} exceeds the ceiling {}", cfg.ceiling)));
    }
    Ok(())
}

fn suite_value(s: &algebra::SuiteResult) -> (Value, bool) {
    (serde_json::to_value(s).expect("plain struct"), s.passed())
}

/// Reprogramming identities, uniformity and bad probability, exhaustively.
pub fn verify_algebra(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.n > algebra::MAX_EXHAUSTIVE_N || cfg.n < 2 {
        return Err(Error::Capability(format!("algebra suites run for 2 <= n <= {}", algebra::MAX_EXHAUSTIVE_N)));
    }
    if cfg.k == 0 || cfg.k > 3 {
        return Err(Error::Parameter("algebra suites take 1 <= k <= 3".into()));
    }
    let mut out = Vec::new();
    let inverse = if cfg.mutate { algebra::mutated_inverse_law(cfg.n, cfg.k)? } else { algebra::inverse_law(cfg.n, cfg.k)? };
    out.push(suite_value(&inverse));
    out.push(suite_value(&algebra::commutativity(cfg.n, cfg.k)?));
    out.push(suite_value(&algebra::good_closed_form(cfg.n, cfg.k)?));
    out.push(suite_value(&algebra::partial_reprogramming(cfg.n, cfg.k)?));
    if cfg.n <= 5 {
        out.push(suite_value(&algebra::uniformity_suite(cfg.n)?));
    }
    for k in 1..=cfg.k.min(2) {
        let b = algebra::bad_probability_exhaustive(cfg.n, k)?;
        let ok = b.holds;
        out.push((serde_json::to_value(b)?, ok));
    }
    if cfg.n == 4 {
        for k in 1..=cfg.k.min(2) {
            let b = algebra::cipher_bad_probability_exhaustive(2, 4, k)?;
            let ok = b.holds;
            out.push((serde_json::to_value(b)?, ok));
        }
    }
    let enumeration = factorial(cfg.n);
    Ok(ExperimentReport::build(cfg, out, true, Some(enumeration), start))
}

/// Targets of length `k` with distinct entries.
fn target_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in out {
            for v in (0..n).filter(|v| !t.contains(v)) {
                next.push([t.clone(), vec![v]].concat());
            }
        }
        out = next;
    }
    out
}

/// Decomposition residuals over every good `(π, π*)` and target tuple.
pub fn verify_decomposition(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    use rayon::prelude::*;
    let start = Instant::now();
    if cfg.n > 4 {
        return Err(Error::Capability("decomposition runs exhaustively at n <= 4".into()));
    }
    if cfg.q > 1 || cfg.k > 2 || cfg.k == 0 {
        return Err(Error::Capability("decomposition runs with at most two slots (q <= 1) and 1 <= k <= 2".into()));
    }
    let perms = Permutation::all(cfg.n);
    let advs = battery::quantum_battery(cfg.n, cfg.q)?;
    guard(cfg, (perms.len() * perms.len() * advs.len()) as u64 * 49)?;
    let mut out = Vec::new();
    let mut enumeration = 0u64;
    for adv in &advs {
        for k in 1..=cfg.k {
            let targets = target_tuples(cfg.n, k);
            let expected = SimChoice::space_size(adv.slots(), k, true);
            let rows = perms
                .par_iter()
                .map(|pi| -> Result<(u64, u64, f64, bool)> {
                    let (mut good, mut bad, mut worst, mut counts_ok) = (0u64, 0u64, 0.0f64, true);
                    for ps in &perms {
                        for xs in &targets {
                            if !perm::in_g(pi, ps, xs)? {
                                bad += 1;
                                continue;
                            }
                            good += 1;
                            let (count, res) = decomposition_residual(adv, pi, ps, &[], xs, None)?;
                            counts_ok &= num_bigint::BigUint::from(count) == expected;
                            worst = worst.max(res);
                        }
                    }
                    Ok((good, bad, worst, counts_ok))
                })
                .collect::<Result<Vec<_>>>()?;
            let good: u64 = rows.iter().map(|r| r.0).sum();
            let bad: u64 = rows.iter().map(|r| r.1).sum();
            let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
            let counts_ok = rows.iter().all(|r| r.3);
            let bad_fraction = bounds::ratio(bad, good + bad);
            let bad_ok = bad_fraction <= perm::bad_probability_bound(k, cfg.n);
            enumeration += good + bad;
            let ok = worst < 1e-9 && counts_ok && bad_ok;
            out.push((
                json!({
                    "adversary": adv.name,
                    "slots": adv.slots(),
                    "k": k,
                    "good_instances": good,
                    "filtered_not_good": bad,
                    "bad_fraction": bounds::format(&bad_fraction),
                    "bad_bound": bounds::format(&perm::bad_probability_bound(k, cfg.n)),
                    "components": expected.to_string(),
                    "component_counts_match": counts_ok,
                    "max_residual": worst,
                }),
                ok,
            ));
        }
    }
    Ok(ExperimentReport::build(cfg, out, true, Some(enumeration), start))
}

/// Relations selected by a game id: a registry name, `generalized:<file>`, or `all`.
pub fn relations_for(game: Option<&str>, n: usize) -> Result<Vec<Relation>> {
    let all = battery::relation_battery(n)?;
    match game {
        None | Some("all") => Ok(all),
        Some(g) if g.starts_with("generalized:") => {
            Ok(vec![Relation::load(std::path::Path::new(&g["generalized:".len()..]), n)?])
        }
        Some(g) => {
            let found: Vec<Relation> = all.into_iter().filter(|r| r.name == g).collect();
            if found.is_empty() {
                Err(Error::UnknownGame(g.to_string()))
            } else {
                Ok(found)
            }
        }
    }
}

fn lift_value(c: LiftCheck) -> (Value, bool) {
    let ok = c.holds;
    (serde_json::to_value(c).expect("plain struct"), ok)
}

/// Lifting inequalities for the adversary battery.
pub fn verify_lifting(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let rels = relations_for(cfg.game.as_deref(), cfg.n)?;
    let mut out = Vec::new();
    match (cfg.model, cfg.mode) {
        (Model::Classical, Mode::Exhaustive) => {
            let f = factorial(cfg.n);
            guard(cfg, f.saturating_mul(f).saturating_mul((2 * cfg.q as u64 + 1).pow(cfg.k as u32)) * cfg.n as u64)?;
            let perms = Permutation::all(cfg.n);
            for rel in &rels {
                for adv in battery::classical_battery(rel, cfg.q) {
                    out.push(lift_value(lifting::check_classical(adv.as_ref(), rel, &perms, cfg.k)?));
                }
            }
            let enumeration = f * f;
            Ok(ExperimentReport::build(cfg, out, true, Some(enumeration), start))
        }
        (Model::Quantum, Mode::Exhaustive) => {
            let f = factorial(cfg.n);
            guard(cfg, f.saturating_mul(f).saturating_mul((8 * cfg.q as u64 + 1).pow(cfg.k as u32)))?;
            let perms = Permutation::all(cfg.n);
            for adv in battery::quantum_battery(cfg.n, cfg.q)? {
                for rel in &rels {
                    out.push(lift_value(lifting::check_quantum(&adv, rel, &perms, cfg.k)?));
                }
            }
            Ok(ExperimentReport::build(cfg, out, true, Some(f * f), start))
        }
        (Model::Quantum, Mode::MonteCarlo) => {
            for (i, adv) in battery::quantum_battery(cfg.n, cfg.q)?.iter().enumerate() {
                for c in lifting::monte_carlo_quantum(adv, &rels, cfg.n, cfg.k, cfg.trials, cfg.seed.wrapping_add(i as u64))? {
                    out.push(lift_value(c));
                }
            }
            Ok(ExperimentReport::build(cfg, out, false, None, start))
        }
        (Model::Interactive, Mode::Exhaustive) => {
            let f = factorial(cfg.n);
            guard(cfg, f.saturating_mul(f).saturating_mul(81) * cfg.n as u64)?;
            let perms = Permutation::all(cfg.n);
            for adv in battery::quantum_battery(cfg.n, cfg.q)? {
                for rel in &rels {
                    let ch = RelationChallenger { relation: rel.clone() };
                    out.push(lift_value(lifting::check_interactive(&adv, &ch, &perms)?));
                }
            }
            let inverter = battery::message_inverter(cfg.n)?;
            out.push(lift_value(lifting::check_interactive(&inverter, &OneWayChallenger { n: cfg.n }, &perms)?));
            out.push(lift_value(lifting::check_interactive(&inverter, &InvertChallenger { n: cfg.n }, &perms)?));
            Ok(ExperimentReport::build(cfg, out, true, Some(f * f), start))
        }
        (model, Mode::MonteCarlo) => {
            Err(Error::Capability(format!("Monte Carlo mode is implemented for the quantum model only, not {model:?}")))
        }
    }
}

/// Default parameter grid of the bound table.
pub fn default_grid() -> Vec<(String, GameParams)> {
    let mut out = Vec::new();
    let qs = [0u64, 1, 2, 4];
    for &q in &qs {
        for n in [4u64, 8, 10, 16, 32, 64] {
            out.push(("double-sided-zero".into(), GameParams::simple(n, q)));
        }
        for n in [16u64, 256, 65536] {
            out.push(("fixed-point".into(), GameParams::simple(n, q)));
        }
        for r in [1u64, 2, 4] {
            out.push(("generalized".into(), GameParams { n: 16, q, k: 1, r_max: Some(r), sponge: None }));
        }
        for (r, c, m, n) in [(2, 2, 1, 2), (4, 4, 8, 4), (8, 16, 16, 8), (64, 256, 128, 128)] {
            let s = Some(SpongeParams::symbolic(r, c, m, n));
            for game in ["sponge-preimage", "sponge-oneway", "sponge-collision"] {
                out.push((game.into(), GameParams { n: n as u64, q, k: 1, r_max: None, sponge: s }));
            }
            for k in [2u64, 3] {
                out.push(("sponge-multicollision".into(), GameParams { n: n as u64, q, k, r_max: None, sponge: s }));
            }
        }
        for n in [3u64, 4, 8, 16, 64] {
            out.push(("icm-collision".into(), GameParams::simple(n, q)));
        }
    }
    out
}

pub fn bound_rows(games: Option<&[String]>) -> Result<Vec<BoundReport>> {
    if let Some(gs) = games {
        for g in gs {
            if !games::GAME_IDS.contains(&g.as_str()) {
                return Err(Error::UnknownGame(g.clone()));
            }
        }
    }
    default_grid()
        .into_iter()
        .filter(|(g, _)| games.is_none_or(|gs| gs.iter().any(|x| x == g)))
        .map(|(g, p)| game_bound(&g, &p))
        .collect()
}

/// CSV with columns `game,params,q,k,raw_bound,clamped`.
pub fn bound_table(games: Option<&[String]>) -> Result<String> {
    let mut s = String::from(BoundReport::csv_header());
    s.push('\n');
    for r in bound_rows(games)? {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    Ok(s)
}

/// Sponge and sponge-lift closed forms agree at their specialisations.
pub fn bound_identities() -> Vec<(String, bool)> {
    let mut out = Vec::new();
    for (r, c, m, n) in [(2, 2, 1, 2), (4, 4, 8, 4), (1, 3, 2, 5), (8, 16, 16, 8), (64, 256, 128, 128), (3, 5, 9, 9)] {
        let s = SpongeParams::symbolic(r, c, m, n);
        for q in [0u64, 1, 2, 5] {
            let label = format!("{};q={q}", s.label());
            let p1 = bounds::ratio(2, 1) / bounds::pow2(n as u64);
            let p2 = bounds::ratio(6, 1) / bounds::pow2(n as u64);
            let p_ow = bounds::ratio(6, 1) / bounds::pow2(m.min(n) as u64);
            out.push((format!("preimage/{label}"), bounds::sponge_lift(&s, q, 1, &p1) == bounds::sponge_preimage(&s, q)));
            out.push((format!("collision/{label}"), bounds::sponge_lift(&s, q, 2, &p2) == bounds::sponge_collision(&s, q)));
            out.push((format!("oneway/{label}"), bounds::sponge_lift(&s, q, 2, &p_ow) == bounds::sponge_oneway(&s, q)));
            out.push((
                format!("multicollision-2/{label}"),
                bounds::sponge_multicollision(&s, q, 2) == bounds::sponge_collision(&s, q),
            ));
            let eq = SpongeParams::symbolic(r, c, n, n);
            out.push((format!("oneway-m=n/{label}"), bounds::sponge_oneway(&eq, q) == bounds::sponge_collision(&eq, q)));
            for k in 2..=4u64 {
                let pk = crate::constructions::multicollision_pmax(k, n as u64);
                out.push((
                    format!("multicollision-{k}/{label}"),
                    bounds::sponge_lift(&s, q, k, &pk) == bounds::sponge_multicollision(&s, q, k),
                ));
            }
        }
    }
    for q in 0..4 {
        for n in [4u64, 16, 1024] {
            let r = game_bound("fixed-point", &GameParams::simple(n, q)).expect("valid");
            let g = game_bound("generalized", &GameParams { n, q, k: 1, r_max: Some(1), sponge: None }).expect("valid");
            out.push((format!("fixed-point=generalized(1)/N={n};q={q}"), r.raw_bound == g.raw_bound));
        }
        for half in [1u64, 2, 10] {
            let z = game_bound("double-sided-zero", &GameParams::simple(half, q)).expect("valid");
            let g = game_bound(
                "generalized",
                &GameParams { n: 1 << (2 * half), q, k: 1, r_max: Some(1 << half), sponge: None },
            )
            .expect("valid");
            out.push((format!("zero=generalized(2^n)/n={half};q={q}"), z.raw_bound == g.raw_bound));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRun {
    pub adversary: String,
    pub choice: SimChoice,
    pub pi: Vec<usize>,
    pub pi_star: Vec<usize>,
    pub jsonl: String,
}

/// One seeded simulator run on the battery adversary `index`, as JSON lines.
pub fn trace(cfg: &ExperimentConfig, index: usize) -> Result<TraceRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pi = Permutation::random(cfg.n, &mut rng);
    let pi_star = Permutation::random(cfg.n, &mut rng);
    let mut port = CountingPort::new(&pi_star);
    match cfg.model {
        Model::Classical => {
            let rels = relations_for(cfg.game.as_deref(), cfg.n)?;
            let advs = battery::classical_battery(&rels[0], cfg.q);
            let adv = advs.get(index).ok_or_else(|| Error::Parameter(format!("no classical adversary {index}")))?;
            let choice = SimChoice::sample(adv.budget(), cfg.k, false, &mut rng);
            let coins = rng.gen_range(0..adv.coin_space());
            let run = run_classical_sim(adv.as_ref(), &pi, &mut port, &choice, coins)?;
            Ok(TraceRun {
                adversary: adv.name(),
                choice,
                pi: pi.table().to_vec(),
                pi_star: pi_star.table().to_vec(),
                jsonl: trace_to_jsonl(&run.trace)?,
            })
        }
        _ => {
            let advs = battery::quantum_battery(cfg.n, cfg.q)?;
            let adv = advs.get(index).ok_or_else(|| Error::Parameter(format!("no quantum adversary {index}")))?;
            let choice = SimChoice::sample(adv.slots(), cfg.k, true, &mut rng);
            let mut branch = run_quantum_sim(adv, &pi, &mut port, &choice, SimMode::Sample(&mut rng), None)?;
            let b = branch.pop().expect("one branch");
            Ok(TraceRun {
                adversary: adv.name.clone(),
                choice,
                pi: pi.table().to_vec(),
                pi_star: pi_star.table().to_vec(),
                jsonl: trace_to_jsonl(&b.trace)?,
            })
        }
    }
}
