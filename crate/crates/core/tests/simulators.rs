use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reprolift::battery::{self, Chain, GreedySearch};
use reprolift::cipher::Cipher;
use reprolift::games::Relation;
use reprolift::perm::{self, Permutation};
use reprolift::qsim::{self, Direction, NormalFormCircuit, OracleLayout, StateVector};
use reprolift::sim::{
    branch_distribution, decomposition_residual, run_classical_sim, run_quantum_sim, ClassicalAdversary,
    CountingPort, OutputLayout, QuantumAdversary, SimChoice, SimMode,
};

fn keyed_circuit(keys: usize, n: usize, slots: usize, seed: u64) -> QuantumAdversary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = vec![keys, n, n];
    let unitaries = (0..=slots)
        .map(|_| vec![qsim::random_unitary(&dims, &[0, 1], &mut rng), qsim::random_unitary(&dims, &[2], &mut rng)])
        .collect();
    let tags = (0..slots).map(|s| if s % 2 == 0 { Direction::Forward } else { Direction::Backward }).collect();
    let layout = OracleLayout { key: Some(0), query: 1, response: 2 };
    QuantumAdversary {
        name: "keyed-random".into(),
        circuit: NormalFormCircuit::new(dims, layout, unitaries, tags).unwrap(),
        output: OutputLayout { keys: vec![0], xs: vec![1], z: Vec::new() },
        input: None,
    }
}

#[test]
fn battery_circuits_are_unitary() {
    for adv in battery::quantum_battery(4, 2).unwrap() {
        assert!(adv.circuit.unitarity_defect().unwrap() < 1e-9, "{}", adv.name);
    }
    assert!(keyed_circuit(2, 4, 2, 1).circuit.unitarity_defect().unwrap() < 1e-9);
}

#[test]
fn output_distributions_are_normalised() {
    let pi = Permutation::from_cycles(8, &[&[0, 3, 5], &[1, 2]]).unwrap();
    for adv in battery::quantum_battery(8, 2).unwrap() {
        let total: f64 = adv.output_distribution(&pi, None).unwrap().values().sum();
        assert!((total - 1.0).abs() < 1e-9, "{} sums to {total}", adv.name);
    }
}

#[test]
fn hadamard_round_trips() {
    let mut s = StateVector::basis(&[8, 2], &[5, 1]).unwrap();
    let h = qsim::hadamard(0, 8).unwrap();
    s.apply(&h).unwrap();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    s.apply(&h).unwrap();
    assert!(s.distance(&StateVector::basis(&[8, 2], &[5, 1]).unwrap()).unwrap() < 1e-12);
    assert!(qsim::hadamard(0, 6).is_err());
}

#[test]
fn exact_branches_sum_to_one_and_respect_budget() {
    let pi = Permutation::from_cycles(4, &[&[0, 1]]).unwrap();
    let ps = Permutation::from_cycles(4, &[&[1, 2, 3]]).unwrap();
    for adv in battery::quantum_battery(4, 1).unwrap() {
        for k in 1..=2 {
            for choice in SimChoice::enumerate(adv.slots(), k, true) {
                let mut port = CountingPort::new(&ps);
                let branches = run_quantum_sim(&adv, &pi, &mut port, &choice, SimMode::Exact, None).unwrap();
                let total: f64 = branches.iter().map(|b| b.weight).sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(branches.iter().all(|b| b.external_queries() == choice.fired_count()));
                assert!(choice.fired_count() <= k);
            }
        }
    }
}

#[test]
fn sampling_follows_exact_distribution() {
    let adv = battery::grover_fixed_point(4, 1).unwrap();
    let pi = Permutation::from_cycles(4, &[&[0, 1, 2]]).unwrap();
    let ps = Permutation::from_cycles(4, &[&[0, 2]]).unwrap();
    let choice = SimChoice::enumerate(adv.slots(), 1, true).pop().unwrap();
    let mut port = CountingPort::new(&ps);
    let exact = branch_distribution(&run_quantum_sim(&adv, &pi, &mut port, &choice, SimMode::Exact, None).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 20_000;
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..trials {
        let mut port = CountingPort::new(&ps);
        let mut b = run_quantum_sim(&adv, &pi, &mut port, &choice, SimMode::Sample(&mut rng), None).unwrap();
        *counts.entry(b.pop().unwrap().output).or_insert(0usize) += 1;
    }
    for (out, p) in exact {
        let f = *counts.get(&out).unwrap_or(&0) as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * sigma + 1e-12, "{out:?}: {f} vs {p}");
    }
}

#[test]
fn classical_sim_without_firing_is_transparent() {
    let pi = Permutation::from_cycles(5, &[&[0, 4, 2]]).unwrap();
    let ps = Permutation::identity(5);
    let advs: Vec<Box<dyn ClassicalAdversary>> = vec![
        Box::new(Chain { n: 5, queries: 3, random_start: true }),
        Box::new(GreedySearch { relation: Relation::fixed_point(5), queries: 2, direction: Direction::Backward }),
    ];
    for adv in &advs {
        for coins in 0..adv.coin_space() {
            let mut port = CountingPort::new(&ps);
            let run = run_classical_sim(adv.as_ref(), &pi, &mut port, &SimChoice::none(1), coins).unwrap();
            let mut direct = CountingPort::new(&pi);
            assert_eq!(run.output, adv.run(&mut direct, coins).unwrap());
            assert_eq!(port.count, 0);
            assert_eq!(run.external_queries(), 0);
        }
    }
}

#[test]
fn classical_sim_reprograms_before_answering() {
    let pi = Permutation::from_cycles(4, &[&[0, 1, 2, 3]]).unwrap();
    let ps = Permutation::from_cycles(4, &[&[0, 3]]).unwrap();
    let adv = Chain { n: 4, queries: 2, random_start: false };
    for choice in SimChoice::enumerate(2, 1, false) {
        let mut port = CountingPort::with_budget(&ps, 1);
        let run = run_classical_sim(&adv, &pi, &mut port, &choice, 0).unwrap();
        let fired = choice.fired_count();
        assert_eq!(port.count, fired);
        if fired == 1 {
            let t = run.trace.iter().find_map(|e| e.reprogram).unwrap();
            assert_eq!(ps.apply(t.x), t.y);
            assert_eq!(run.oracle.current().apply(t.x), t.y);
        }
    }
}

#[test]
fn decomposition_holds_for_random_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let advs = [battery::random_circuit(8, 2, 5).unwrap(), battery::backward_inverter(8, &[0, 1]).unwrap()];
    let mut checked = 0;
    while checked < 20 {
        let pi = Permutation::random(8, &mut rng);
        let ps = Permutation::random(8, &mut rng);
        let xs = [1, 4];
        if !perm::in_g(&pi, &ps, &xs).unwrap() {
            continue;
        }
        for adv in &advs {
            let (count, res) = decomposition_residual(adv, &pi, &ps, &[], &xs, None).unwrap();
            assert_eq!(count, 49);
            assert!(res < 1e-9, "{} residual {res}", adv.name);
        }
        checked += 1;
    }
}

#[test]
fn decomposition_holds_for_two_key_ciphers() {
    let adv = keyed_circuit(2, 4, 2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 20 {
        let e = Cipher::random(2, 4, &mut rng);
        let es = Cipher::random(2, 4, &mut rng);
        let (keys, xs) = ([0, 1], [2, 2]);
        if !reprolift::cipher::in_g(&e, &es, &keys, &xs).unwrap() {
            continue;
        }
        let (count, res) = decomposition_residual(&adv, &e, &es, &keys, &xs, None).unwrap();
        assert_eq!(count, 49);
        assert!(res < 1e-9, "residual {res}");
        checked += 1;
    }
}

#[test]
fn decomposition_refuses_bad_pairs() {
    let pi = Permutation::identity(4);
    let adv = battery::random_circuit(4, 1, 2).unwrap();
    assert!(decomposition_residual(&adv, &pi, &pi, &[], &[0], None).is_err());
}

#[test]
fn choice_space_sizes() {
    assert_eq!(SimChoice::enumerate(2, 1, true).len(), 9);
    assert_eq!(SimChoice::enumerate(2, 2, true).len(), 49);
    assert_eq!(SimChoice::enumerate(3, 1, false).len(), 7);
    assert_eq!(SimChoice::space_size(4, 2, true).to_string(), SimChoice::enumerate(4, 2, true).len().to_string());
    assert!(SimChoice::none(2).validate(3).is_ok());
}
