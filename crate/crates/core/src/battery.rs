//! Hand-built adversaries used by the lifting checks: classical query
//! strategies and small normal-form quantum circuits.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::games::Relation;
use crate::qsim::{
    basis_map, hadamard, phase_flip, random_unitary, swap, xor_into, CombinedCircuit, Direction, Gate,
    NormalFormCircuit, OracleLayout,
};
use crate::sim::{ClassicalAdversary, Output, OutputLayout, QuantumAdversary, Query, QueryPort};

/// Outputs a fixed `x` without querying.
pub struct FixedGuess {
    pub x: usize,
}

impl ClassicalAdversary for FixedGuess {
    fn name(&self) -> String {
        format!("fixed-guess({})", self.x)
    }

    fn budget(&self) -> usize {
        0
    }

    fn run(&self, _port: &mut dyn QueryPort, _coins: usize) -> Result<Output> {
        Ok(Output::new(vec![self.x], 0))
    }
}

/// Outputs a uniformly random `x` without querying.
pub struct RandomGuess {
    pub n: usize,
}

impl ClassicalAdversary for RandomGuess {
    fn name(&self) -> String {
        "random-guess".into()
    }

    fn budget(&self) -> usize {
        0
    }

    fn coin_space(&self) -> usize {
        self.n
    }

    fn run(&self, _port: &mut dyn QueryPort, coins: usize) -> Result<Output> {
        Ok(Output::new(vec![coins], 0))
    }
}

/// Never wins: outputs an empty tuple.
pub struct Abstain;

impl ClassicalAdversary for Abstain {
    fn name(&self) -> String {
        "abstain".into()
    }

    fn budget(&self) -> usize {
        0
    }

    fn run(&self, _port: &mut dyn QueryPort, _coins: usize) -> Result<Output> {
        Ok(Output::new(Vec::new(), 0))
    }
}

/// Queries fresh points in order and outputs the first pair satisfying the
/// relation, falling back to an unqueried input.
pub struct GreedySearch {
    pub relation: Relation,
    pub queries: usize,
    pub direction: Direction,
}

impl ClassicalAdversary for GreedySearch {
    fn name(&self) -> String {
        let d = match self.direction {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        };
        format!("greedy-{d}({})", self.queries)
    }

    fn budget(&self) -> usize {
        self.queries
    }

    fn run(&self, port: &mut dyn QueryPort, _coins: usize) -> Result<Output> {
        let n = self.relation.x_size;
        let mut seen_x = Vec::new();
        for i in 0..self.queries.min(n) {
            let (x, y) = match self.direction {
                Direction::Forward => (i, port.query(Query::forward(i))?),
                Direction::Backward => (port.query(Query::backward(i))?, i),
            };
            if self.relation.holds(&[x], &[y], 0) {
                return Ok(Output::new(vec![x], 0));
            }
            seen_x.push(x);
        }
        let fresh = (0..n).find(|x| !seen_x.contains(x)).unwrap_or(0);
        Ok(Output::new(vec![fresh], 0))
    }
}

/// Walks `x, π(x), π²(x), …` and stops at a fixed point; the start is random
/// when `random_start` is set.
pub struct Chain {
    pub n: usize,
    pub queries: usize,
    pub random_start: bool,
}

impl ClassicalAdversary for Chain {
    fn name(&self) -> String {
        format!("chain({}{})", self.queries, if self.random_start { ",random" } else { "" })
    }

    fn budget(&self) -> usize {
        self.queries
    }

    fn coin_space(&self) -> usize {
        if self.random_start {
            self.n
        } else {
            1
        }
    }

    fn run(&self, port: &mut dyn QueryPort, coins: usize) -> Result<Output> {
        let mut x = coins;
        for _ in 0..self.queries {
            let y = port.query(Query::forward(x))?;
            if y == x {
                break;
            }
            x = y;
        }
        Ok(Output::new(vec![x], 0))
    }
}

/// Classical battery for one arity-one relation on `n` points with budget `q`.
pub fn classical_battery(rel: &Relation, q: usize) -> Vec<Box<dyn ClassicalAdversary>> {
    let n = rel.x_size;
    let mut out: Vec<Box<dyn ClassicalAdversary>> =
        vec![Box::new(Abstain), Box::new(FixedGuess { x: 0 }), Box::new(RandomGuess { n })];
    for queries in 1..=q {
        out.push(Box::new(GreedySearch { relation: rel.clone(), queries, direction: Direction::Forward }));
        out.push(Box::new(GreedySearch { relation: rel.clone(), queries, direction: Direction::Backward }));
        out.push(Box::new(Chain { n, queries, random_start: false }));
        out.push(Box::new(Chain { n, queries, random_start: true }));
    }
    out
}

fn layout() -> OracleLayout {
    OracleLayout::new(0, 1)
}

fn check_size(n: usize) -> Result<()> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::Dimension(format!("battery circuits need a power-of-two domain, got {n}")));
    }
    Ok(())
}

fn adversary(name: String, circuit: NormalFormCircuit, out: usize) -> QuantumAdversary {
    QuantumAdversary { name, circuit, output: OutputLayout::xs_only(vec![out]), input: None }
}

/// Zero-query circuit that outputs `x`.
pub fn guess(n: usize, x: usize) -> Result<QuantumAdversary> {
    check_size(n)?;
    let dims = vec![n, n];
    let u = basis_map(&dims, &[0], |d| vec![d[0] ^ x])?;
    Ok(adversary(format!("guess({x})"), NormalFormCircuit::new(dims, layout(), vec![vec![u]], vec![])?, 0))
}

/// Zero-query circuit that outputs a uniform `x`.
pub fn uniform_guess(n: usize) -> Result<QuantumAdversary> {
    check_size(n)?;
    let c = NormalFormCircuit::new(vec![n, n], layout(), vec![vec![hadamard(0, n)?]], vec![])?;
    Ok(adversary("uniform-guess".into(), c, 0))
}

fn diffusion(dims: &[usize], reg: usize) -> Result<Vec<Gate>> {
    let h = hadamard(reg, dims[reg])?;
    Ok(vec![h.clone(), phase_flip(dims, &[reg], |d| d[0] != 0), h])
}

/// Grover search for fixed points. Each iteration is a forward slot marking
/// `x = π(x)`, a swap, and a backward slot that clears the response; on a
/// fixed point the swap is harmless, and elsewhere it only permutes the
/// unmarked amplitudes among themselves.
pub fn grover_fixed_point(n: usize, iterations: usize) -> Result<QuantumAdversary> {
    check_size(n)?;
    let dims = vec![n, n];
    let mut unitaries = vec![vec![hadamard(0, n)?]];
    let mut tags = Vec::new();
    for _ in 0..iterations {
        tags.push(Direction::Forward);
        unitaries.push(vec![phase_flip(&dims, &[0, 1], |d| d[0] == d[1]), swap(&dims, 0, 1)?]);
        tags.push(Direction::Backward);
        unitaries.push(diffusion(&dims, 0)?);
    }
    let c = NormalFormCircuit::new(dims, layout(), unitaries, tags)?;
    Ok(adversary(format!("grover-fixed-point({iterations})"), c, 0))
}

/// Reflection taking `|0⟩` to the uniform superposition over `targets`.
fn prepare(dim: usize, reg: usize, targets: &[usize]) -> Gate {
    let amp = 1.0 / (targets.len() as f64).sqrt();
    let mut w = vec![0.0; dim];
    w[0] = 1.0;
    for &t in targets {
        w[t] -= amp;
    }
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let matrix = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    let r = if norm > 1e-12 { id - 2.0 * w[i] * w[j] / norm } else { id };
                    Complex64::new(r, 0.0)
                })
                .collect()
        })
        .collect();
    Gate::Dense { registers: vec![reg], matrix }
}

/// A forward slot that the response register in `|+⟩` makes a no-op,
/// followed by a backward query on a superposition of `targets`.
pub fn backward_inverter(n: usize, targets: &[usize]) -> Result<QuantumAdversary> {
    check_size(n)?;
    if targets.is_empty() || targets.iter().any(|&t| t >= n) {
        return Err(Error::Parameter("inverter targets must be a non-empty subset of the domain".into()));
    }
    let dims = vec![n, n];
    let h = hadamard(1, n)?;
    let unitaries = vec![vec![h.clone()], vec![h, prepare(n, 0, targets)], vec![]];
    let c = NormalFormCircuit::new(dims, layout(), unitaries, vec![Direction::Forward, Direction::Backward])?;
    Ok(adversary("backward-inverter".into(), c, 1))
}

/// Targets with the low half of their bits zero.
pub fn zero_suffix_targets(n: usize) -> Vec<usize> {
    let half = n.trailing_zeros() / 2;
    let mask = (1usize << half) - 1;
    (0..n).filter(|y| y & mask == 0).collect()
}

/// Seeded random circuit over `[Q, R, W]` with a qubit workspace `W`.
pub fn random_circuit(n: usize, slots: usize, seed: u64) -> Result<QuantumAdversary> {
    check_size(n)?;
    let dims = vec![n, n, 2];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unitaries = Vec::with_capacity(slots + 1);
    for _ in 0..=slots {
        unitaries.push(vec![random_unitary(&dims, &[0, 2], &mut rng), random_unitary(&dims, &[1], &mut rng)]);
    }
    let tags =
        (0..slots).map(|i| if i % 2 == 0 { Direction::Forward } else { Direction::Backward }).collect();
    let c = NormalFormCircuit::new(dims, layout(), unitaries, tags)?;
    Ok(adversary(format!("random({slots},{seed})"), c, 0))
}

/// One combined query with the direction qubit in `|+⟩` on a uniform query,
/// rewritten in normal form; outputs the response.
pub fn superposed_direction(n: usize) -> Result<QuantumAdversary> {
    check_size(n)?;
    let dims = vec![n, n, 2];
    let combined = CombinedCircuit {
        dims,
        layout: layout(),
        direction: 2,
        unitaries: vec![vec![hadamard(0, n)?, hadamard(2, 2)?], vec![]],
    };
    let c = combined.normalize()?;
    Ok(adversary("superposed-direction".into(), c, 1))
}

/// One backward query on an incoming message; outputs the preimage.
pub fn message_inverter(n: usize) -> Result<QuantumAdversary> {
    check_size(n)?;
    let dims = vec![n, n, n];
    let unitaries = vec![vec![xor_into(&dims, 2, 0)?], vec![]];
    let c = NormalFormCircuit::new(dims, layout(), unitaries, vec![Direction::Backward])?;
    Ok(QuantumAdversary {
        name: "message-inverter".into(),
        circuit: c,
        output: OutputLayout::xs_only(vec![1]),
        input: Some(2),
    })
}

/// Quantum battery on `n` points using at most `q` queries (normal form with `2q` slots).
pub fn quantum_battery(n: usize, q: usize) -> Result<Vec<QuantumAdversary>> {
    let mut out = vec![guess(n, 0)?, uniform_guess(n)?];
    for iters in 1..=q {
        out.push(grover_fixed_point(n, iters)?);
        out.push(random_circuit(n, 2 * iters, 7 + iters as u64)?);
    }
    if q >= 1 {
        out.push(random_circuit(n, 1, 3)?);
        out.push(backward_inverter(n, &zero_suffix_targets(n))?);
        if n <= 8 {
            out.push(superposed_direction(n)?);
        }
    }
    Ok(out)
}

/// Relations the lifting checks run against on `n` points. Double-sided
/// zero search needs an even bit width and is left out otherwise.
pub fn relation_battery(n: usize) -> Result<Vec<Relation>> {
    let bits = n.trailing_zeros() as usize;
    let mut out = vec![Relation::fixed_point(n)];
    if n.is_power_of_two() && bits.is_multiple_of(2) && bits > 0 {
        out.push(Relation::double_sided_zero_bits(bits)?);
    }
    out.push(Relation::complement(n));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use crate::sim::CountingPort;

    fn win_prob(adv: &QuantumAdversary, pi: &Permutation, rel: &Relation) -> f64 {
        adv.output_distribution(pi, None)
            .unwrap()
            .into_iter()
            .filter(|(o, _)| rel.wins(o, &o.images(pi).unwrap()))
            .map(|(_, p)| p)
            .sum()
    }

    #[test]
    fn grover_finds_unique_fixed_point() {
        let pi = Permutation::from_cycles(4, &[&[0, 1, 2]]).unwrap();
        let g = grover_fixed_point(4, 1).unwrap();
        assert!(g.circuit.is_alternating());
        assert_eq!(g.queries(), 1);
        assert!((win_prob(&g, &pi, &Relation::fixed_point(4)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverter_hits_targets() {
        let pi = Permutation::from_cycles(4, &[&[0, 3]]).unwrap();
        let b = backward_inverter(4, &[0, 2]).unwrap();
        let d = b.output_distribution(&pi, None).unwrap();
        assert!((d[&Output::new(vec![3], 0)] - 0.5).abs() < 1e-12);
        assert!((d[&Output::new(vec![2], 0)] - 0.5).abs() < 1e-12);
        assert_eq!(zero_suffix_targets(16), vec![0, 4, 8, 12]);
    }

    #[test]
    fn battery_circuits_are_unitary() {
        for adv in quantum_battery(4, 2).unwrap() {
            assert!(adv.circuit.unitarity_defect().unwrap() < 1e-9, "{}", adv.name);
        }
        let m = message_inverter(4).unwrap();
        let pi = Permutation::from_cycles(4, &[&[1, 2]]).unwrap();
        let d = m.output_distribution(&pi, Some(1)).unwrap();
        assert!((d[&Output::new(vec![2], 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_battery_respects_budget() {
        let pi = Permutation::from_cycles(4, &[&[0, 1]]).unwrap();
        for rel in relation_battery(4).unwrap() {
            for adv in classical_battery(&rel, 2) {
                for c in 0..adv.coin_space() {
                    let mut port = CountingPort::with_budget(&pi, adv.budget());
                    adv.run(&mut port, c).unwrap();
                }
            }
        }
        let mut port = CountingPort::new(&pi);
        let out = Chain { n: 4, queries: 2, random_start: false }.run(&mut port, 0).unwrap();
        assert_eq!(out.xs, vec![0]);
    }
}
