//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reprolift::algebra;
use reprolift::battery;
use reprolift::constructions::{sponge_trace, SpongeParams};
use reprolift::experiments::{self, ExperimentConfig, ExperimentReport, Mode, Model};
use reprolift::games::{self, Relation};
use reprolift::perm::Permutation;
use reprolift::{bounds, Result};
use serde_json::Value;

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(n: usize, q: usize, k: usize, model: Model, mode: Mode) -> ExperimentConfig {
    ExperimentConfig { n, q, k, model, mode, ..ExperimentConfig::default() }
}

fn summary(r: &ExperimentReport) -> String {
    format!("{}/{} instances", r.aggregate.passed, r.aggregate.instances)
}

fn algebra_identities() -> Outcome {
    let mut suites = Vec::new();
    for n in [4, 5] {
        for k in 1..=2 {
            suites.extend(algebra::permutation_suites(n, k)?);
        }
    }
    suites.push(algebra::commutativity(5, 3)?);
    let checked: u64 = suites.iter().map(|s| s.checked).sum();
    let violations: u64 = suites.iter().map(|s| s.violations).sum();
    Ok((violations == 0, format!("{} suites, {checked} checks, {violations} violations", suites.len())))
}

fn uniformity() -> Outcome {
    let counts = algebra::uniformity(4)?;
    let ok = counts.iter().all(|c| c.len() == 24 && c.values().all(|v| *v > 0 && *v == c[&0]));
    let per: Vec<u64> = counts.iter().map(|c| c[&0]).collect();
    Ok((ok, format!("each of 24 permutations hit {per:?} times for x = 0..3")))
}

fn bad_probability() -> Outcome {
    let mut ok = true;
    let mut worst = Vec::new();
    for n in 2..=6 {
        for k in 1..=2 {
            let r = algebra::bad_probability_exhaustive(n, k)?;
            ok &= r.holds;
            worst.push(format!("n{n}k{k}:{}", r.worst));
        }
    }
    for k in 1..=2 {
        let r = algebra::cipher_bad_probability_exhaustive(2, 4, k)?;
        ok &= r.holds;
        worst.push(format!("cipher2,n4k{k}:{}", r.worst));
    }
    let mc = algebra::bad_probability_sampled(16, 1, 100_000, 0)?;
    ok &= mc.holds;
    Ok((
        ok,
        format!(
            "{}; n=16 k=1 estimate {:.5} ± {:.5} (3σ) vs {}",
            worst.join(" "),
            mc.estimate,
            3.0 * mc.sigma,
            mc.bound
        ),
    ))
}

fn decomposition() -> Outcome {
    let r = experiments::verify_decomposition(&config(4, 1, 2, Model::Quantum, Mode::Exhaustive))?;
    let worst = r.results.iter().filter_map(|v| v["max_residual"].as_f64()).fold(0.0, f64::max);
    Ok((r.pass, format!("{}, max residual {worst:.2e}", summary(&r))))
}

fn classical_lifting() -> Outcome {
    let r = experiments::verify_lifting(&config(4, 2, 1, Model::Classical, Mode::Exhaustive))?;
    Ok((r.pass, summary(&r)))
}

fn quantum_lifting() -> Outcome {
    let exact = experiments::verify_lifting(&config(4, 1, 1, Model::Quantum, Mode::Exhaustive))?;
    let grover = exact.results.iter().any(|v| v["adversary"] == "grover-fixed-point(1)");
    let mut mc_cfg = config(16, 2, 1, Model::Quantum, Mode::MonteCarlo);
    mc_cfg.trials = 100_000;
    let mc = experiments::verify_lifting(&mc_cfg)?;
    let worst = mc.results.iter().filter_map(|v| v["margin"].as_f64()).fold(f64::INFINITY, f64::min);
    Ok((
        exact.pass && grover && mc.pass,
        format!(
            "exact n=4: {}; monte carlo n=16 q<=2, 1e5 trials: {}, smallest 3σ margin {worst:.4}",
            summary(&exact),
            summary(&mc)
        ),
    ))
}

fn interactive_lifting() -> Outcome {
    let quantum = experiments::verify_lifting(&config(4, 1, 1, Model::Quantum, Mode::Exhaustive))?;
    let inter = experiments::verify_lifting(&config(4, 1, 1, Model::Interactive, Mode::Exhaustive))?;
    let key = |v: &Value| (v["adversary"].as_str().unwrap_or("").to_string(), v["relation"].as_str().unwrap_or("").to_string());
    let plain: BTreeMap<_, _> = quantum.results.iter().map(|v| (key(v), v)).collect();
    let (mut matched, mut mismatched) = (0, 0);
    let mut challenge_ok = true;
    for v in &inter.results {
        let (adv, rel) = key(v);
        match rel.strip_prefix("relation:") {
            Some(base) => match plain.get(&(adv, base.to_string())) {
                Some(p) => {
                    let close = |f: &str| (v[f].as_f64().unwrap_or(f64::NAN) - p[f].as_f64().unwrap_or(0.0)).abs() < 1e-12;
                    if v["holds"] == p["holds"] && close("pr_a") && close("pr_b") {
                        matched += 1;
                    } else {
                        mismatched += 1;
                    }
                }
                None => mismatched += 1,
            },
            None => challenge_ok &= v["holds"].as_bool().unwrap_or(false),
        }
    }
    let one_way = inter.results.iter().any(|v| v["relation"] == "one-way");
    Ok((
        inter.pass && mismatched == 0 && matched == plain.len() && one_way && challenge_ok,
        format!("{matched} relation verdicts reproduced, {mismatched} differ; {}", summary(&inter)),
    ))
}

fn cipher_degeneration() -> Outcome {
    let rel = Relation::fixed_point(4);
    let classical = battery::classical_battery(&rel, 2);
    let quantum = battery::quantum_battery(4, 1)?;
    let s = algebra::cipher_degeneration(4, &classical, &quantum)?;
    let mut ok = s.passed();
    for k in 1..=2 {
        let c = algebra::cipher_bad_probability_exhaustive(1, 4, k)?;
        let p = algebra::bad_probability_exhaustive(4, k)?;
        ok &= c.worst == p.worst;
    }
    Ok((ok, format!("{} comparisons, {} differ", s.checked, s.violations)))
}

fn constants() -> Outcome {
    let golden = include_str!("data/bound_table_golden.csv");
    let table = experiments::bound_table(None)?;
    let rows_differ = golden.lines().zip(table.lines()).filter(|(a, b)| a != b).count()
        + golden.lines().count().abs_diff(table.lines().count());
    let ids = experiments::bound_identities();
    let failed: Vec<&String> = ids.iter().filter(|(_, ok)| !ok).map(|(name, _)| name).collect();
    Ok((
        rows_differ == 0 && failed.is_empty(),
        format!("{} golden rows, {rows_differ} differ; {} identities, failed {failed:?}", golden.lines().count() - 1, ids.len()),
    ))
}

fn bits(s: &str) -> u64 {
    if s.is_empty() {
        0
    } else {
        u64::from_str_radix(s, 2).expect("bitstring")
    }
}

fn sponge() -> Outcome {
    let vectors: Vec<Value> = serde_json::from_str(include_str!("data/sponge_golden.json"))?;
    let mut mismatches = 0;
    let mut pinned = false;
    for v in &vectors {
        let get = |f: &str| v[f].as_u64().expect("field") as usize;
        let p = SpongeParams::new(get("r"), get("c"), get("m"), get("n"))?;
        let table: Vec<usize> = serde_json::from_value(v["table"].clone())?;
        let pi = Permutation::from_table(table)?;
        let t = sponge_trace(&p, &pi, v["x"].as_u64().expect("x"))?;
        let calls: Vec<usize> = serde_json::from_value(v["calls"].clone())?;
        let ok = t.padded == bits(v["padded"].as_str().unwrap_or(""))
            && t.calls == calls
            && t.output == bits(v["output"].as_str().unwrap_or(""));
        mismatches += !ok as usize;
        pinned |= (p.r, p.c, p.m, p.n) == (2, 2, 1, 2) && v["pi"] == "identity" && v["x"] == 1 && v["output"] == "11";
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut grid, mut wrong_count) = (0, 0);
    for r in 1..=12 {
        for c in 0..=12 - r {
            let pi = Permutation::random(1 << (r + c), &mut rng);
            for m in [0, 1, r - 1, r, r + 1, 2 * r + 3] {
                for n in [1, r, r + 1, 3 * r] {
                    let p = SpongeParams::new(r, c, m, n)?;
                    let x = (1u64 << m) - 1;
                    let t = sponge_trace(&p, &pi, x)?;
                    grid += 1;
                    wrong_count += (t.calls.len() != p.ell()) as usize;
                }
            }
        }
    }
    Ok((
        mismatches == 0 && pinned && wrong_count == 0,
        format!("{} golden vectors, {mismatches} differ; call count = ℓ on {grid} parameter sets, {wrong_count} wrong", vectors.len()),
    ))
}

fn brute_force_ceiling() -> Outcome {
    let mut worst = (0.0, String::new());
    let mut ok = true;
    for n in 2..=6 {
        for rel in Relation::registry(n) {
            let r = games::r_max(&rel)?;
            let ceiling = bounds::ratio(4 * r as u64, n as u64);
            for queries in 0..=1 {
                let best = games::best_k_classical(&rel, n, queries, 10_000_000)?;
                ok &= best <= ceiling;
                let slack = bounds::to_f64(&best) / bounds::to_f64(&ceiling);
                if slack > worst.0 {
                    worst = (slack, format!("{} n={n} q={queries}: {} vs {}", rel.name, bounds::format(&best), bounds::format(&ceiling)));
                }
            }
        }
    }
    Ok((ok, format!("tightest {}", worst.1)))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("reprogramming algebra", algebra_identities),
        ("uniformity", uniformity),
        ("bad probability", bad_probability),
        ("state decomposition", decomposition),
        ("classical lifting", classical_lifting),
        ("quantum lifting", quantum_lifting),
        ("interactive lifting", interactive_lifting),
        ("cipher degeneration", cipher_degeneration),
        ("closed-form constants", constants),
        ("sponge correctness", sponge),
        ("brute-force ceiling", brute_force_ceiling),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += !ok as usize;
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
