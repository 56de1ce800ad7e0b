//! Dense statevector simulation of query circuits.
//!
//! Registers are ordered with register 0 most significant. Gates act on a
//! named subset of registers, so a gate built for one register layout keeps
//! working when more registers are appended.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::KeyedOracle;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for r in (0..dims.len().saturating_sub(1)).rev() {
        s[r] = s[r + 1] * dims[r + 1];
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        let mut amps = vec![ZERO; len];
        if len > 0 {
            amps[0] = ONE;
        }
        StateVector { dims: dims.to_vec(), amps }
    }

    pub fn basis(dims: &[usize], digits: &[usize]) -> Result<Self> {
        let mut s = StateVector { dims: dims.to_vec(), amps: vec![ZERO; dims.iter().product()] };
        let idx = s.index_of(digits)?;
        s.amps[idx] = ONE;
        Ok(s)
    }

    pub fn from_amps(dims: &[usize], amps: Vec<C64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if amps.len() != len {
            return Err(Error::Dimension(format!("{} amplitudes for dimension {len}", amps.len())));
        }
        Ok(StateVector { dims: dims.to_vec(), amps })
    }

    pub fn zeros_like(&self) -> Self {
        StateVector { dims: self.dims.clone(), amps: vec![ZERO; self.amps.len()] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::Dimension(format!("{} digits for {} registers", digits.len(), self.dims.len())));
        }
        let mut idx = 0;
        for (d, (&v, &dim)) in digits.iter().zip(&self.dims).enumerate() {
            if v >= dim {
                return Err(Error::Dimension(format!("digit {v} too large for register {d} of dim {dim}")));
            }
            idx = idx * dim + v;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for r in (0..self.dims.len()).rev() {
            out[r] = idx % self.dims[r];
            idx /= self.dims[r];
        }
        out
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn add_scaled(&mut self, other: &StateVector, scale: f64) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension("adding states with different registers".into()));
        }
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * scale;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.amps {
            *a *= s;
        }
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Dimension("comparing states with different registers".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    /// Appends a register prepared in `|0⟩`.
    pub fn with_register(&self, dim: usize) -> StateVector {
        let mut amps = vec![ZERO; self.amps.len() * dim];
        for (i, a) in self.amps.iter().enumerate() {
            amps[i * dim] = *a;
        }
        let mut dims = self.dims.clone();
        dims.push(dim);
        StateVector { dims, amps }
    }

    /// Every (base index, local offsets) split for the given registers.
    fn split(&self, regs: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let st = strides(&self.dims);
        let mut seen = BTreeSet::new();
        for &r in regs {
            if r >= self.dims.len() || !seen.insert(r) {
                return Err(Error::Dimension(format!("bad register list {regs:?}")));
            }
        }
        let local_dims: Vec<usize> = regs.iter().map(|&r| self.dims[r]).collect();
        let local_len: usize = local_dims.iter().product();
        let mut offsets = Vec::with_capacity(local_len);
        for l in 0..local_len {
            let mut rem = l;
            let mut off = 0;
            for i in (0..regs.len()).rev() {
                off += (rem % local_dims[i]) * st[regs[i]];
                rem /= local_dims[i];
            }
            offsets.push(off);
        }
        let bases = (0..self.amps.len())
            .filter(|&idx| regs.iter().all(|&r| (idx / st[r]).is_multiple_of(self.dims[r])))
            .collect();
        Ok((bases, offsets))
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let (bases, offsets) = self.split(gate.registers())?;
        let l = offsets.len();
        match gate {
            Gate::Dense { matrix, .. } => {
                if matrix.len() != l || matrix.iter().any(|row| row.len() != l) {
                    return Err(Error::Dimension(format!("dense gate is not {l}x{l}")));
                }
                let mut buf = vec![ZERO; l];
                for &b in &bases {
                    let mut nonzero = false;
                    for (i, slot) in buf.iter_mut().enumerate() {
                        *slot = self.amps[b + offsets[i]];
                        nonzero |= *slot != ZERO;
                    }
                    if !nonzero {
                        continue;
                    }
                    for (i, row) in matrix.iter().enumerate() {
                        let mut acc = ZERO;
                        for (m, v) in row.iter().zip(&buf) {
                            acc += m * v;
                        }
                        self.amps[b + offsets[i]] = acc;
                    }
                }
            }
            Gate::Permute { table, .. } => {
                if table.len() != l {
                    return Err(Error::Dimension(format!("permutation gate of size {} on {l} states", table.len())));
                }
                let mut buf = vec![ZERO; l];
                for &b in &bases {
                    for (i, &t) in table.iter().enumerate() {
                        buf[t] = self.amps[b + offsets[i]];
                    }
                    for (i, v) in buf.iter().enumerate() {
                        self.amps[b + offsets[i]] = *v;
                    }
                }
            }
            Gate::Phase { diag, .. } => {
                if diag.len() != l {
                    return Err(Error::Dimension(format!("phase gate of size {} on {l} states", diag.len())));
                }
                for &b in &bases {
                    for (i, p) in diag.iter().enumerate() {
                        self.amps[b + offsets[i]] *= p;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[Gate]) -> Result<()> {
        gates.iter().try_for_each(|g| self.apply(g))
    }

    /// Keeps only basis states whose digits on `proj.registers` are listed.
    pub fn project(&mut self, proj: &Projector) -> Result<()> {
        let st = strides(&self.dims);
        for &r in &proj.registers {
            if r >= self.dims.len() {
                return Err(Error::Dimension(format!("projector on missing register {r}")));
            }
        }
        let mut key = vec![0; proj.registers.len()];
        for (idx, a) in self.amps.iter_mut().enumerate() {
            for (k, &r) in key.iter_mut().zip(&proj.registers) {
                *k = (idx / st[r]) % self.dims[r];
            }
            if !proj.keep.contains(&key) {
                *a = ZERO;
            }
        }
        Ok(())
    }
}

/// Born-rule marginal over `registers`; sums to the squared norm.
pub fn measure_distribution(state: &StateVector, registers: &[usize]) -> Result<BTreeMap<Vec<usize>, f64>> {
    let dims = state.dims();
    if registers.iter().any(|&r| r >= dims.len()) {
        return Err(Error::Dimension(format!("cannot measure registers {registers:?}")));
    }
    let st = strides(dims);
    let mut out = BTreeMap::new();
    for (idx, a) in state.amps().iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let key: Vec<usize> = registers.iter().map(|&r| (idx / st[r]) % dims[r]).collect();
        *out.entry(key).or_insert(0.0) += p;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    /// Row-major matrix on the joint space of `registers` (first listed is most significant).
    Dense { registers: Vec<usize>, matrix: Vec<Vec<C64>> },
    /// Basis relabelling `|l⟩ ↦ |table[l]⟩` on the joint local space.
    Permute { registers: Vec<usize>, table: Vec<usize> },
    Phase { registers: Vec<usize>, diag: Vec<C64> },
}

impl Gate {
    pub fn registers(&self) -> &[usize] {
        match self {
            Gate::Dense { registers, .. } | Gate::Permute { registers, .. } | Gate::Phase { registers, .. } => {
                registers
            }
        }
    }
}

pub type Unitary = Vec<Gate>;

fn local_digits(local_dims: &[usize], mut l: usize) -> Vec<usize> {
    let mut d = vec![0; local_dims.len()];
    for i in (0..local_dims.len()).rev() {
        d[i] = l % local_dims[i];
        l /= local_dims[i];
    }
    d
}

fn local_index(local_dims: &[usize], digits: &[usize]) -> usize {
    digits.iter().zip(local_dims).fold(0, |acc, (&v, &d)| acc * d + v)
}

/// Walsh-Hadamard transform on one register; its dimension must be a power of two.
pub fn hadamard(register: usize, dim: usize) -> Result<Gate> {
    if !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("hadamard needs a power-of-two register, got {dim}")));
    }
    let s = 1.0 / (dim as f64).sqrt();
    let matrix = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if (i & j).count_ones() % 2 == 0 { C64::new(s, 0.0) } else { C64::new(-s, 0.0) })
                .collect()
        })
        .collect();
    Ok(Gate::Dense { registers: vec![register], matrix })
}

/// Basis map on the listed registers; `f` sees and returns their digits.
pub fn basis_map(dims: &[usize], registers: &[usize], f: impl Fn(&[usize]) -> Vec<usize>) -> Result<Gate> {
    let local_dims: Vec<usize> = registers.iter().map(|&r| dims[r]).collect();
    let len: usize = local_dims.iter().product();
    let mut table = Vec::with_capacity(len);
    let mut hit = vec![false; len];
    for l in 0..len {
        let out = f(&local_digits(&local_dims, l));
        if out.len() != local_dims.len() || out.iter().zip(&local_dims).any(|(v, d)| v >= d) {
            return Err(Error::Dimension(format!("basis map produced {out:?}")));
        }
        let t = local_index(&local_dims, &out);
        if hit[t] {
            return Err(Error::Dimension("basis map is not a bijection".into()));
        }
        hit[t] = true;
        table.push(t);
    }
    Ok(Gate::Permute { registers: registers.to_vec(), table })
}

pub fn phase(dims: &[usize], registers: &[usize], f: impl Fn(&[usize]) -> C64) -> Gate {
    let local_dims: Vec<usize> = registers.iter().map(|&r| dims[r]).collect();
    let len: usize = local_dims.iter().product();
    let diag = (0..len).map(|l| f(&local_digits(&local_dims, l))).collect();
    Gate::Phase { registers: registers.to_vec(), diag }
}

/// `-1` phase on basis states where `f` holds.
pub fn phase_flip(dims: &[usize], registers: &[usize], f: impl Fn(&[usize]) -> bool) -> Gate {
    phase(dims, registers, |d| if f(d) { -ONE } else { ONE })
}

pub fn swap(dims: &[usize], a: usize, b: usize) -> Result<Gate> {
    if dims[a] != dims[b] {
        return Err(Error::Dimension("swap of registers with different dimensions".into()));
    }
    basis_map(dims, &[a, b], |d| vec![d[1], d[0]])
}

/// Swaps `a` and `b` when register `control` holds `value`.
pub fn controlled_swap(dims: &[usize], control: usize, value: usize, a: usize, b: usize) -> Result<Gate> {
    if dims[a] != dims[b] {
        return Err(Error::Dimension("swap of registers with different dimensions".into()));
    }
    basis_map(dims, &[control, a, b], |d| if d[0] == value { vec![d[0], d[2], d[1]] } else { d.to_vec() })
}

/// `|s⟩|t⟩ ↦ |s⟩|t ⊕ s⟩`.
pub fn xor_into(dims: &[usize], src: usize, dst: usize) -> Result<Gate> {
    if dims[src] != dims[dst] || !dims[dst].is_power_of_two() {
        return Err(Error::Dimension("xor needs equal power-of-two registers".into()));
    }
    basis_map(dims, &[src, dst], |d| vec![d[0], d[1] ^ d[0]])
}

/// Pseudo-random unitary on the joint space of `registers` (Gram-Schmidt on random columns).
pub fn random_unitary<R: Rng + ?Sized>(dims: &[usize], registers: &[usize], rng: &mut R) -> Gate {
    let l: usize = registers.iter().map(|&r| dims[r]).product();
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(l);
    while cols.len() < l {
        let mut v: Vec<C64> = (0..l).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        for c in &cols {
            let dot: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= dot * ci;
            }
        }
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let matrix = (0..l).map(|i| (0..l).map(|j| cols[j][i]).collect()).collect();
    Gate::Dense { registers: registers.to_vec(), matrix }
}

/// Full matrix of a gate sequence on `dims` (column `j` is the image of `|j⟩`).
pub fn unitary_matrix(dims: &[usize], gates: &[Gate]) -> Result<Vec<Vec<C64>>> {
    let len: usize = dims.iter().product();
    let mut cols = Vec::with_capacity(len);
    for j in 0..len {
        let mut amps = vec![ZERO; len];
        amps[j] = ONE;
        let mut s = StateVector::from_amps(dims, amps)?;
        s.apply_all(gates)?;
        cols.push(s.amps);
    }
    Ok(cols)
}

/// Largest entry of `M†M - I` for a matrix given by columns.
pub fn unitarity_defect(cols: &[Vec<C64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((dot - target).norm());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Where an oracle reads its key and query and writes its response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLayout {
    pub key: Option<usize>,
    pub query: usize,
    pub response: usize,
}

impl OracleLayout {
    pub fn new(query: usize, response: usize) -> Self {
        OracleLayout { key: None, query, response }
    }

    pub fn keyed(key: usize, query: usize, response: usize) -> Self {
        OracleLayout { key: Some(key), query, response }
    }

    /// Registers holding the full query `(K, x)` or `x`.
    pub fn query_registers(&self) -> Vec<usize> {
        self.key.into_iter().chain(std::iter::once(self.query)).collect()
    }

    fn check<O: KeyedOracle>(&self, dims: &[usize], oracle: &O) -> Result<()> {
        let n = oracle.block_size();
        let bad = |r: usize| r >= dims.len();
        if bad(self.query) || bad(self.response) || self.key.is_some_and(bad) {
            return Err(Error::Dimension("oracle layout names a missing register".into()));
        }
        if !n.is_power_of_two() {
            return Err(Error::Dimension(format!("xor oracles need a power-of-two domain, got {n}")));
        }
        if dims[self.query] != n || dims[self.response] != n {
            return Err(Error::Dimension(format!("query/response registers must have dimension {n}")));
        }
        match self.key {
            Some(k) if dims[k] != oracle.key_count() => {
                Err(Error::Dimension(format!("key register has dimension {}, cipher has {} keys", dims[k], oracle.key_count())))
            }
            None if oracle.key_count() != 1 => Err(Error::Dimension("multi-key oracle without a key register".into())),
            _ => Ok(()),
        }
    }
}

/// `|x⟩|y⟩ ↦ |x⟩|y ⊕ π(x)⟩` (forward) or `|y⟩|x⟩ ↦ |y⟩|x ⊕ π⁻¹(y)⟩` (backward).
pub fn apply_oracle<O: KeyedOracle>(
    state: &StateVector,
    oracle: &O,
    layout: &OracleLayout,
    direction: Direction,
) -> Result<StateVector> {
    let mut out = state.clone();
    apply_oracle_in_place(&mut out, oracle, layout, direction)?;
    Ok(out)
}

pub(crate) fn apply_oracle_in_place<O: KeyedOracle>(
    state: &mut StateVector,
    oracle: &O,
    layout: &OracleLayout,
    direction: Direction,
) -> Result<()> {
    layout.check(state.dims(), oracle)?;
    let st = strides(state.dims());
    let dims = state.dims().to_vec();
    let mut out = vec![ZERO; state.len()];
    for (idx, a) in state.amps.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let key = layout.key.map_or(0, |k| (idx / st[k]) % dims[k]);
        let q = (idx / st[layout.query]) % dims[layout.query];
        let r = (idx / st[layout.response]) % dims[layout.response];
        let v = match direction {
            Direction::Forward => oracle.forward(key, q),
            Direction::Backward => oracle.backward(key, q),
        };
        let new_r = r ^ v;
        let target = idx - r * st[layout.response] + new_r * st[layout.response];
        out[target] = *a;
    }
    state.amps = out;
    Ok(())
}

/// Combined oracle dispatching on a one-qubit direction register (0 forward, 1 backward).
pub fn apply_combined_oracle<O: KeyedOracle>(
    state: &StateVector,
    oracle: &O,
    layout: &OracleLayout,
    direction_register: usize,
) -> Result<StateVector> {
    if state.dims().get(direction_register) != Some(&2) {
        return Err(Error::Dimension("direction register must be a qubit".into()));
    }
    let mut fwd = state.clone();
    fwd.project(&Projector::single(direction_register, [0]))?;
    let mut bwd = state.clone();
    bwd.project(&Projector::single(direction_register, [1]))?;
    apply_oracle_in_place(&mut fwd, oracle, layout, Direction::Forward)?;
    apply_oracle_in_place(&mut bwd, oracle, layout, Direction::Backward)?;
    fwd.add_scaled(&bwd, 1.0)?;
    Ok(fwd)
}

/// Computational-basis projector on a joint register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projector {
    pub registers: Vec<usize>,
    pub keep: BTreeSet<Vec<usize>>,
}

impl Projector {
    pub fn new(registers: Vec<usize>, keep: impl IntoIterator<Item = Vec<usize>>) -> Self {
        Projector { registers, keep: keep.into_iter().collect() }
    }

    pub fn single(register: usize, keep: impl IntoIterator<Item = usize>) -> Self {
        Projector { registers: vec![register], keep: keep.into_iter().map(|v| vec![v]).collect() }
    }

    pub fn full(dims: &[usize], registers: Vec<usize>) -> Self {
        let local: Vec<usize> = registers.iter().map(|&r| dims[r]).collect();
        let len: usize = local.iter().product();
        let keep = (0..len).map(|l| local_digits(&local, l)).collect();
        Projector { registers, keep }
    }
}

/// Alternating unitaries and oracle slots: `U_{Q+1} O^{(Q)} U_Q ⋯ O^{(1)} U_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormCircuit {
    pub dims: Vec<usize>,
    pub layout: OracleLayout,
    pub unitaries: Vec<Unitary>,
    pub tags: Vec<Direction>,
}

impl NormalFormCircuit {
    pub fn new(dims: Vec<usize>, layout: OracleLayout, unitaries: Vec<Unitary>, tags: Vec<Direction>) -> Result<Self> {
        if unitaries.len() != tags.len() + 1 {
            return Err(Error::Dimension(format!("{} unitaries for {} slots", unitaries.len(), tags.len())));
        }
        Ok(NormalFormCircuit { dims, layout, unitaries, tags })
    }

    pub fn slots(&self) -> usize {
        self.tags.len()
    }

    /// Forward on even (0-based) slots, backward on odd ones, even slot count.
    pub fn is_alternating(&self) -> bool {
        self.slots().is_multiple_of(2)
            && self.tags.iter().enumerate().all(|(i, t)| {
                *t == if i % 2 == 0 { Direction::Forward } else { Direction::Backward }
            })
    }

    pub fn initial_state(&self, initial: Option<&[usize]>) -> Result<StateVector> {
        match initial {
            Some(d) => StateVector::basis(&self.dims, d),
            None => Ok(StateVector::zero(&self.dims)),
        }
    }

    pub fn run<O: KeyedOracle>(&self, oracle: &O) -> Result<StateVector> {
        self.run_from(None, oracle)
    }

    pub fn run_from<O: KeyedOracle>(&self, initial: Option<&[usize]>, oracle: &O) -> Result<StateVector> {
        let mut s = self.initial_state(initial)?;
        for (i, tag) in self.tags.iter().enumerate() {
            s.apply_all(&self.unitaries[i])?;
            apply_oracle_in_place(&mut s, oracle, &self.layout, *tag)?;
        }
        s.apply_all(&self.unitaries[self.slots()])?;
        Ok(s)
    }

    /// Slot `i` uses `oracles[i]`, preceded by `projections[i]` when present.
    pub fn run_with_insertions<O: KeyedOracle>(
        &self,
        initial: Option<&[usize]>,
        oracles: &[&O],
        projections: &[Option<Projector>],
    ) -> Result<StateVector> {
        if oracles.len() != self.slots() || projections.len() != self.slots() {
            return Err(Error::Dimension("insertion schedule does not match the slot count".into()));
        }
        let mut s = self.initial_state(initial)?;
        for (i, tag) in self.tags.iter().enumerate() {
            s.apply_all(&self.unitaries[i])?;
            if let Some(p) = &projections[i] {
                s.project(p)?;
            }
            apply_oracle_in_place(&mut s, oracles[i], &self.layout, *tag)?;
        }
        s.apply_all(&self.unitaries[self.slots()])?;
        Ok(s)
    }

    /// Largest unitarity defect among the interleaved unitaries.
    pub fn unitarity_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in &self.unitaries {
            worst = worst.max(unitarity_defect(&unitary_matrix(&self.dims, u)?));
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: NormalFormCircuit = serde_json::from_str(s)?;
        NormalFormCircuit::new(c.dims, c.layout, c.unitaries, c.tags)
    }
}

/// Circuit whose slots query the combined oracle selected by a direction qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedCircuit {
    pub dims: Vec<usize>,
    pub layout: OracleLayout,
    pub direction: usize,
    pub unitaries: Vec<Unitary>,
}

impl CombinedCircuit {
    pub fn queries(&self) -> usize {
        self.unitaries.len().saturating_sub(1)
    }

    pub fn run<O: KeyedOracle>(&self, oracle: &O) -> Result<StateVector> {
        let mut s = StateVector::zero(&self.dims);
        for (i, u) in self.unitaries.iter().enumerate() {
            s.apply_all(u)?;
            if i < self.queries() {
                s = apply_combined_oracle(&s, oracle, &self.layout, self.direction)?;
            }
        }
        Ok(s)
    }

    /// Rewrites each combined query as a forward slot followed by a backward slot.
    ///
    /// A scratch register (appended last, same dimension as the response) is
    /// held in the uniform superposition, which every xor oracle fixes. Before
    /// each slot the branch that must not be answered swaps its response with
    /// the scratch register, so that slot acts as the identity on it. The
    /// result equals the original final state tensored with `|0⟩`.
    pub fn normalize(&self) -> Result<NormalFormCircuit> {
        let mut dims = self.dims.clone();
        let r = self.layout.response;
        let d = self.direction;
        if dims.get(d) != Some(&2) {
            return Err(Error::Dimension("direction register must be a qubit".into()));
        }
        dims.push(dims[r]);
        let scratch = dims.len() - 1;
        let h = hadamard(scratch, dims[scratch])?;
        let cs0 = controlled_swap(&dims, d, 0, r, scratch)?;
        let cs1 = controlled_swap(&dims, d, 1, r, scratch)?;
        let q = self.queries();
        let mut unitaries = Vec::with_capacity(2 * q + 1);
        let mut tags = Vec::with_capacity(2 * q);
        if q == 0 {
            let mut u = vec![h.clone()];
            u.extend(self.unitaries[0].iter().cloned());
            u.push(h);
            unitaries.push(u);
        } else {
            let mut first = vec![h.clone()];
            first.extend(self.unitaries[0].iter().cloned());
            first.push(cs1.clone());
            unitaries.push(first);
            for i in 0..q {
                tags.push(Direction::Forward);
                unitaries.push(vec![cs1.clone(), cs0.clone()]);
                tags.push(Direction::Backward);
                let mut next = vec![cs0.clone()];
                next.extend(self.unitaries[i + 1].iter().cloned());
                next.push(if i + 1 == q { h.clone() } else { cs1.clone() });
                unitaries.push(next);
            }
        }
        NormalFormCircuit::new(dims, self.layout, unitaries, tags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;

    #[test]
    fn identity_oracle_copies_query() {
        let id = Permutation::identity(4);
        let layout = OracleLayout::new(0, 1);
        for x in 0..4 {
            let s = StateVector::basis(&[4, 4], &[x, 0]).unwrap();
            let out = apply_oracle(&s, &id, &layout, Direction::Forward).unwrap();
            assert_eq!(out, StateVector::basis(&[4, 4], &[x, x]).unwrap());
        }
    }

    #[test]
    fn backward_recovers_preimage() {
        let p = Permutation::from_cycles(4, &[&[0, 2, 3]]).unwrap();
        let layout = OracleLayout::new(0, 1);
        for x in 0..4 {
            let s = StateVector::basis(&[4, 4], &[p.apply(x), 0]).unwrap();
            let out = apply_oracle(&s, &p, &layout, Direction::Backward).unwrap();
            assert_eq!(out, StateVector::basis(&[4, 4], &[p.apply(x), x]).unwrap());
        }
    }

    #[test]
    fn oracle_is_an_involution() {
        let p = Permutation::from_cycles(4, &[&[0, 1, 2, 3]]).unwrap();
        let layout = OracleLayout::new(0, 1);
        let mut s = StateVector::zero(&[4, 4]);
        s.apply(&hadamard(0, 4).unwrap()).unwrap();
        s.apply(&hadamard(1, 4).unwrap()).unwrap();
        s.apply(&phase(&[4, 4], &[0, 1], |d| C64::from_polar(1.0, d[0] as f64 + 0.3 * d[1] as f64))).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let once = apply_oracle(&s, &p, &layout, dir).unwrap();
            let twice = apply_oracle(&once, &p, &layout, dir).unwrap();
            assert!(twice.distance(&s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn oracle_layout_is_validated() {
        let p = Permutation::identity(3);
        let s = StateVector::zero(&[3, 3]);
        assert!(apply_oracle(&s, &p, &OracleLayout::new(0, 1), Direction::Forward).is_err());
        let p = Permutation::identity(4);
        let s = StateVector::zero(&[4, 2]);
        assert!(apply_oracle(&s, &p, &OracleLayout::new(0, 1), Direction::Forward).is_err());
    }

    #[test]
    fn measurement_marginals() {
        let s = StateVector::zero(&[4]);
        assert_eq!(measure_distribution(&s, &[0]).unwrap().get(&vec![0]), Some(&1.0));
        let mut u = StateVector::zero(&[4, 2]);
        u.apply(&hadamard(0, 4).unwrap()).unwrap();
        let d = measure_distribution(&u, &[0]).unwrap();
        assert_eq!(d.len(), 4);
        for p in d.values() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        u.project(&Projector::single(0, [1, 2, 3])).unwrap();
        let total: f64 = measure_distribution(&u, &[0, 1]).unwrap().values().sum();
        assert!((total - u.norm_sqr()).abs() < 1e-12);
        assert!((total - 0.75).abs() < 1e-12);
    }

    #[test]
    fn local_gates_respect_register_order() {
        let dims = [2, 4, 2];
        let mut s = StateVector::basis(&dims, &[1, 2, 0]).unwrap();
        s.apply(&swap(&dims, 0, 2).unwrap()).unwrap();
        assert_eq!(s, StateVector::basis(&dims, &[0, 2, 1]).unwrap());
        s.apply(&controlled_swap(&dims, 1, 2, 0, 2).unwrap()).unwrap();
        assert_eq!(s, StateVector::basis(&dims, &[1, 2, 0]).unwrap());
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = rand::thread_rng();
        let g = random_unitary(&[4, 2], &[0, 1], &mut rng);
        let m = unitary_matrix(&[4, 2], &[g]).unwrap();
        assert!(unitarity_defect(&m) < 1e-10);
    }

    #[test]
    fn with_register_appends_zero() {
        let s = StateVector::basis(&[2, 3], &[1, 2]).unwrap();
        assert_eq!(s.with_register(4), StateVector::basis(&[2, 3, 4], &[1, 2, 0]).unwrap());
    }
}
