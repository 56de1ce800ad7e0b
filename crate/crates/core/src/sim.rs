//! Classical and quantum measure-and-reprogram simulators.
//!
//! Slots are 0-based throughout. For quantum adversaries the slots are the
//! normal-form slots, so a `q`-query circuit has `2q` of them.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::binomial;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::cipher::Triple;
use crate::error::{Error, Result};
use crate::oracle::KeyedOracle;
use crate::qsim::{apply_oracle_in_place, measure_distribution, Direction, NormalFormCircuit, Projector, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitOrMiss {
    Hit,
    Miss,
}

/// Whether the oracle is reprogrammed before or after the measured slot is answered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Before,
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fire {
    pub slot: usize,
    pub kind: HitOrMiss,
    pub timing: Timing,
}

/// Per reprogrammed index `j`: the slot it fires at with its hit/miss guess, or `None` for ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimChoice {
    pub entries: Vec<Option<Fire>>,
}

fn options(slots: usize, with_timing: bool) -> Vec<Option<Fire>> {
    let mut out = vec![None];
    let timings: &[Timing] = if with_timing { &[Timing::Before, Timing::After] } else { &[Timing::Before] };
    for slot in 0..slots {
        for kind in [HitOrMiss::Hit, HitOrMiss::Miss] {
            for &timing in timings {
                out.push(Some(Fire { slot, kind, timing }));
            }
        }
    }
    out
}

impl SimChoice {
    pub fn none(k: usize) -> Self {
        SimChoice { entries: vec![None; k] }
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn v(&self) -> Vec<Option<usize>> {
        self.entries.iter().map(|e| e.map(|f| f.slot)).collect()
    }

    pub fn b(&self) -> Vec<Option<HitOrMiss>> {
        self.entries.iter().map(|e| e.map(|f| f.kind)).collect()
    }

    pub fn c(&self) -> Vec<Option<Timing>> {
        self.entries.iter().map(|e| e.map(|f| f.timing)).collect()
    }

    pub fn fired_at(&self, slot: usize) -> Option<(usize, Fire)> {
        self.entries.iter().enumerate().find_map(|(j, e)| e.filter(|f| f.slot == slot).map(|f| (j, f)))
    }

    pub fn fired_count(&self) -> usize {
        self.entries.iter().flatten().count()
    }

    pub fn validate(&self, slots: usize) -> Result<()> {
        let mut seen = vec![false; slots];
        for f in self.entries.iter().flatten() {
            if f.slot >= slots {
                return Err(Error::Protocol(format!("choice fires at slot {} of {slots}", f.slot)));
            }
            if std::mem::replace(&mut seen[f.slot], true) {
                return Err(Error::Protocol(format!("two indices fire at slot {}", f.slot)));
            }
        }
        Ok(())
    }

    /// Every valid choice, in lexicographic order over the per-index option lists.
    pub fn enumerate(slots: usize, k: usize, with_timing: bool) -> Vec<SimChoice> {
        let opts = options(slots, with_timing);
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for prefix in &out {
                for o in &opts {
                    let clash = o.is_some_and(|f| {
                        prefix.iter().any(|p: &Option<Fire>| p.is_some_and(|g| g.slot == f.slot))
                    });
                    if !clash {
                        let mut v = prefix.clone();
                        v.push(*o);
                        next.push(v);
                    }
                }
            }
            out = next;
        }
        out.into_iter().map(|entries| SimChoice { entries }).collect()
    }

    /// Size of the constrained choice set: `Σ_m C(k,m) · (slots)_m · w^m`, `w` = 2 or 4.
    pub fn space_size(slots: usize, k: usize, with_timing: bool) -> BigUint {
        let w = BigUint::from(if with_timing { 4u32 } else { 2u32 });
        let mut total = BigUint::from(0u32);
        for m in 0..=k.min(slots) {
            let mut falling = BigUint::from(1u32);
            for i in 0..m {
                falling *= BigUint::from(slots - i);
            }
            total += binomial(BigUint::from(k), BigUint::from(m)) * falling * w.pow(m as u32);
        }
        total
    }

    /// Uniform draw from the constrained set (rejection on slot clashes).
    pub fn sample<R: Rng + ?Sized>(slots: usize, k: usize, with_timing: bool, rng: &mut R) -> Self {
        let opts = options(slots, with_timing);
        loop {
            let entries: Vec<Option<Fire>> = (0..k).map(|_| opts[rng.gen_range(0..opts.len())]).collect();
            let c = SimChoice { entries };
            if c.validate(slots).is_ok() {
                return c;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Forward { key: usize, x: usize },
    Backward { key: usize, y: usize },
}

impl Query {
    pub fn forward(x: usize) -> Self {
        Query::Forward { key: 0, x }
    }

    pub fn backward(y: usize) -> Self {
        Query::Backward { key: 0, y }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Query::Forward { .. } => Direction::Forward,
            Query::Backward { .. } => Direction::Backward,
        }
    }

    pub fn key(&self) -> usize {
        match *self {
            Query::Forward { key, .. } | Query::Backward { key, .. } => key,
        }
    }

    pub fn value(&self) -> usize {
        match *self {
            Query::Forward { x, .. } => x,
            Query::Backward { y, .. } => y,
        }
    }

    pub fn answer<O: KeyedOracle>(&self, oracle: &O) -> Result<usize> {
        let (key, v) = (self.key(), self.value());
        if key >= oracle.key_count() || v >= oracle.block_size() {
            return Err(Error::Domain { value: v, size: oracle.block_size() });
        }
        Ok(match self {
            Query::Forward { .. } => oracle.forward(key, v),
            Query::Backward { .. } => oracle.backward(key, v),
        })
    }
}

pub trait QueryPort {
    fn query(&mut self, q: Query) -> Result<usize>;
}

/// Direct oracle access with a query counter and an optional hard budget.
pub struct CountingPort<'a, O: KeyedOracle> {
    oracle: &'a O,
    pub count: usize,
    pub budget: Option<usize>,
    pub log: Vec<(Query, usize)>,
}

impl<'a, O: KeyedOracle> CountingPort<'a, O> {
    pub fn new(oracle: &'a O) -> Self {
        CountingPort { oracle, count: 0, budget: None, log: Vec::new() }
    }

    pub fn with_budget(oracle: &'a O, budget: usize) -> Self {
        CountingPort { oracle, count: 0, budget: Some(budget), log: Vec::new() }
    }
}

impl<O: KeyedOracle> QueryPort for CountingPort<'_, O> {
    fn query(&mut self, q: Query) -> Result<usize> {
        if self.budget.is_some_and(|b| self.count >= b) {
            return Err(Error::Protocol(format!("query budget of {} exceeded", self.count)));
        }
        self.count += 1;
        let a = q.answer(self.oracle)?;
        self.log.push((q, a));
        Ok(a)
    }
}

/// Final output `(K⃗, x⃗, z)`; an empty key list means key 0 everywhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Output {
    pub keys: Vec<usize>,
    pub xs: Vec<usize>,
    pub z: usize,
}

impl Output {
    pub fn new(xs: Vec<usize>, z: usize) -> Self {
        Output { keys: Vec::new(), xs, z }
    }

    pub fn key(&self, j: usize) -> usize {
        self.keys.get(j).copied().unwrap_or(0)
    }

    /// `y⃗` with `y_j = O_{K_j}(x_j)`.
    pub fn images<O: KeyedOracle>(&self, oracle: &O) -> Result<Vec<usize>> {
        (0..self.xs.len()).map(|j| Query::Forward { key: self.key(j), x: self.xs[j] }.answer(oracle)).collect()
    }
}

pub trait ClassicalAdversary: Send + Sync {
    fn name(&self) -> String;
    fn budget(&self) -> usize;
    /// Number of equally likely random tapes.
    fn coin_space(&self) -> usize {
        1
    }
    fn run(&self, port: &mut dyn QueryPort, coins: usize) -> Result<Output>;
}

/// The oracle a simulator answers from, with its reprogramming history.
#[derive(Clone, Debug)]
pub struct StatefulOracle<O: KeyedOracle> {
    initial: O,
    current: O,
    log: Vec<Triple>,
}

impl<O: KeyedOracle> StatefulOracle<O> {
    pub fn new(initial: O) -> Self {
        StatefulOracle { current: initial.clone(), initial, log: Vec::new() }
    }

    pub fn current(&self) -> &O {
        &self.current
    }

    pub fn log(&self) -> &[Triple] {
        &self.log
    }

    pub fn reprogram(&mut self, t: Triple) -> Result<()> {
        self.current = self.current.reprogrammed(t.key, t.x, t.y)?;
        self.log.push(t);
        Ok(())
    }

    pub fn replay(&self) -> Result<O> {
        self.initial.reprogrammed_seq(&self.log)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub slot: usize,
    pub direction: Direction,
    pub key: Option<usize>,
    /// Classical query value, or the measured value at a fired quantum slot.
    pub value: Option<usize>,
    pub measured: bool,
    pub reprogram: Option<Triple>,
    pub timing: Option<Timing>,
    pub external: Option<Query>,
}

pub fn trace_to_jsonl(trace: &[TraceEntry]) -> Result<String> {
    let mut s = String::new();
    for e in trace {
        s.push_str(&serde_json::to_string(e)?);
        s.push('\n');
    }
    Ok(s)
}

/// The pair to reprogram for a query that fires with guess `kind`.
///
/// Hit queries go to the external oracle directly; miss queries first route
/// through the internal `pi`. Returns the pair and the external query made.
pub fn reprogram_target<O: KeyedOracle>(
    pi: &O,
    external: &mut dyn QueryPort,
    direction: Direction,
    key: usize,
    value: usize,
    kind: HitOrMiss,
) -> Result<(Triple, Query)> {
    Ok(match (kind, direction) {
        (HitOrMiss::Hit, Direction::Forward) => {
            let q = Query::Forward { key, x: value };
            (Triple { key, x: value, y: external.query(q)? }, q)
        }
        (HitOrMiss::Hit, Direction::Backward) => {
            let q = Query::Backward { key, y: value };
            (Triple { key, x: external.query(q)?, y: value }, q)
        }
        (HitOrMiss::Miss, Direction::Forward) => {
            let y = pi.forward(key, value);
            let q = Query::Backward { key, y };
            (Triple { key, x: external.query(q)?, y }, q)
        }
        (HitOrMiss::Miss, Direction::Backward) => {
            let x = pi.backward(key, value);
            let q = Query::Forward { key, x };
            (Triple { key, x, y: external.query(q)? }, q)
        }
    })
}

#[derive(Clone, Debug)]
pub struct SimRun<O: KeyedOracle> {
    pub output: Output,
    pub trace: Vec<TraceEntry>,
    pub oracle: StatefulOracle<O>,
}

impl<O: KeyedOracle> SimRun<O> {
    pub fn external_queries(&self) -> usize {
        self.trace.iter().filter(|e| e.external.is_some()).count()
    }
}

struct ClassicalSimPort<'a, O: KeyedOracle> {
    pi: &'a O,
    external: &'a mut dyn QueryPort,
    choice: &'a SimChoice,
    budget: usize,
    slot: usize,
    oracle: StatefulOracle<O>,
    trace: Vec<TraceEntry>,
}

impl<O: KeyedOracle> QueryPort for ClassicalSimPort<'_, O> {
    fn query(&mut self, q: Query) -> Result<usize> {
        if self.slot >= self.budget {
            return Err(Error::Protocol(format!("adversary exceeded its budget of {}", self.budget)));
        }
        let mut entry = TraceEntry {
            slot: self.slot,
            direction: q.direction(),
            key: Some(q.key()),
            value: Some(q.value()),
            measured: false,
            reprogram: None,
            timing: None,
            external: None,
        };
        if let Some((_, fire)) = self.choice.fired_at(self.slot) {
            let (t, ext) = reprogram_target(self.pi, self.external, q.direction(), q.key(), q.value(), fire.kind)?;
            self.oracle.reprogram(t)?;
            entry.measured = true;
            entry.reprogram = Some(t);
            entry.timing = Some(Timing::Before);
            entry.external = Some(ext);
        }
        self.slot += 1;
        self.trace.push(entry);
        q.answer(self.oracle.current())
    }
}

/// Runs `adv` against a stateful oracle that starts as `pi` and is
/// reprogrammed, before answering, at each slot named in `choice`.
pub fn run_classical_sim<O: KeyedOracle>(
    adv: &dyn ClassicalAdversary,
    pi: &O,
    external: &mut dyn QueryPort,
    choice: &SimChoice,
    coins: usize,
) -> Result<SimRun<O>> {
    choice.validate(adv.budget())?;
    if choice.entries.iter().flatten().any(|f| f.timing == Timing::After) {
        return Err(Error::Protocol("the classical simulator has no after-answer reprogramming".into()));
    }
    let mut port = ClassicalSimPort {
        pi,
        external,
        choice,
        budget: adv.budget(),
        slot: 0,
        oracle: StatefulOracle::new(pi.clone()),
        trace: Vec::new(),
    };
    let output = adv.run(&mut port, coins)?;
    Ok(SimRun { output, trace: port.trace, oracle: port.oracle })
}

/// Registers the final output `(K⃗, x⃗, z)` is read from; `z` is mixed-radix over `z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub keys: Vec<usize>,
    pub xs: Vec<usize>,
    pub z: Vec<usize>,
}

impl OutputLayout {
    pub fn xs_only(xs: Vec<usize>) -> Self {
        OutputLayout { keys: Vec::new(), xs, z: Vec::new() }
    }

    fn registers(&self) -> Vec<usize> {
        self.keys.iter().chain(&self.xs).chain(&self.z).copied().collect()
    }

    fn decode(&self, dims: &[usize], digits: &[usize]) -> Output {
        let nk = self.keys.len();
        let nx = self.xs.len();
        let z = self.z.iter().zip(&digits[nk + nx..]).fold(0, |acc, (&r, &d)| acc * dims[r] + d);
        Output { keys: digits[..nk].to_vec(), xs: digits[nk..nk + nx].to_vec(), z }
    }

    /// Output distribution of a final state.
    pub fn distribution(&self, state: &StateVector) -> Result<BTreeMap<Output, f64>> {
        let mut out = BTreeMap::new();
        for (digits, p) in measure_distribution(state, &self.registers())? {
            *out.entry(self.decode(state.dims(), &digits)).or_insert(0.0) += p;
        }
        Ok(out)
    }
}

/// A normal-form circuit with an output layout and an optional message register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumAdversary {
    pub name: String,
    pub circuit: NormalFormCircuit,
    pub output: OutputLayout,
    /// Register initialised to the basis state of an incoming message.
    pub input: Option<usize>,
}

impl QuantumAdversary {
    pub fn slots(&self) -> usize {
        self.circuit.slots()
    }

    /// Query count before normal form.
    pub fn queries(&self) -> usize {
        self.slots().div_ceil(2)
    }

    pub fn initial_digits(&self, message: Option<usize>) -> Result<Option<Vec<usize>>> {
        match (self.input, message) {
            (Some(r), Some(m)) => {
                let mut d = vec![0; self.circuit.dims.len()];
                if m >= self.circuit.dims[r] {
                    return Err(Error::Dimension(format!("message {m} does not fit register {r}")));
                }
                d[r] = m;
                Ok(Some(d))
            }
            (None, Some(_)) => Err(Error::Protocol("adversary takes no message".into())),
            _ => Ok(None),
        }
    }

    pub fn final_state<O: KeyedOracle>(&self, oracle: &O, message: Option<usize>) -> Result<StateVector> {
        let init = self.initial_digits(message)?;
        self.circuit.run_from(init.as_deref(), oracle)
    }

    pub fn output_distribution<O: KeyedOracle>(
        &self,
        oracle: &O,
        message: Option<usize>,
    ) -> Result<BTreeMap<Output, f64>> {
        self.output.distribution(&self.final_state(oracle, message)?)
    }
}

pub enum SimMode<'a> {
    Exact,
    Sample(&'a mut dyn RngCore),
}

/// One branch of a quantum simulator run.
#[derive(Clone, Debug)]
pub struct QuantumBranch<O: KeyedOracle> {
    pub weight: f64,
    pub output: Output,
    pub trace: Vec<TraceEntry>,
    pub oracle: StatefulOracle<O>,
}

impl<O: KeyedOracle> QuantumBranch<O> {
    pub fn external_queries(&self) -> usize {
        self.trace.iter().filter(|e| e.external.is_some()).count()
    }
}

struct QuantumRun<'a, O: KeyedOracle> {
    adv: &'a QuantumAdversary,
    pi: &'a O,
    choice: &'a SimChoice,
}

struct Partial<O: KeyedOracle> {
    weight: f64,
    state: StateVector,
    oracle: StatefulOracle<O>,
    trace: Vec<TraceEntry>,
}

impl<O: KeyedOracle> QuantumRun<'_, O> {
    fn circuit(&self) -> &NormalFormCircuit {
        &self.adv.circuit
    }

    /// Measurement outcomes of the query register at a fired slot.
    fn outcomes(&self, state: &StateVector) -> Result<Vec<(Vec<usize>, f64)>> {
        let regs = self.circuit().layout.query_registers();
        Ok(measure_distribution(state, &regs)?.into_iter().filter(|(_, p)| *p > 0.0).collect())
    }

    fn fire(
        &self,
        mut part: Partial<O>,
        slot: usize,
        fire: Fire,
        digits: &[usize],
        p: f64,
        external: &mut dyn QueryPort,
    ) -> Result<Partial<O>> {
        let layout = self.circuit().layout;
        let regs = layout.query_registers();
        part.state.project(&Projector::new(regs, [digits.to_vec()]))?;
        part.state.scale(1.0 / p.sqrt());
        part.weight *= p;
        let (key, value) = if layout.key.is_some() { (digits[0], digits[1]) } else { (0, digits[0]) };
        let tag = self.circuit().tags[slot];
        let (t, ext) = reprogram_target(self.pi, external, tag, key, value, fire.kind)?;
        if fire.timing == Timing::Before {
            part.oracle.reprogram(t)?;
        }
        apply_oracle_in_place(&mut part.state, part.oracle.current(), &layout, tag)?;
        if fire.timing == Timing::After {
            part.oracle.reprogram(t)?;
        }
        part.trace.push(TraceEntry {
            slot,
            direction: tag,
            key: layout.key.map(|_| key),
            value: Some(value),
            measured: true,
            reprogram: Some(t),
            timing: Some(fire.timing),
            external: Some(ext),
        });
        Ok(part)
    }

    fn plain(&self, mut part: Partial<O>, slot: usize) -> Result<Partial<O>> {
        let tag = self.circuit().tags[slot];
        apply_oracle_in_place(&mut part.state, part.oracle.current(), &self.circuit().layout, tag)?;
        part.trace.push(TraceEntry {
            slot,
            direction: tag,
            key: None,
            value: None,
            measured: false,
            reprogram: None,
            timing: None,
            external: None,
        });
        Ok(part)
    }

    fn finish(&self, mut part: Partial<O>, out: &mut Vec<QuantumBranch<O>>, rng: Option<&mut dyn RngCore>) -> Result<()> {
        part.state.apply_all(&self.circuit().unitaries[self.circuit().slots()])?;
        let dist = self.adv.output.distribution(&part.state)?;
        match rng {
            None => {
                for (output, p) in dist {
                    out.push(QuantumBranch {
                        weight: part.weight * p,
                        output,
                        trace: part.trace.clone(),
                        oracle: part.oracle.clone(),
                    });
                }
            }
            Some(rng) => {
                let output = draw(dist.into_iter().collect(), rng);
                out.push(QuantumBranch { weight: 1.0, output, trace: part.trace, oracle: part.oracle });
            }
        }
        Ok(())
    }

    fn exact(&self, part: Partial<O>, slot: usize, external: &mut dyn QueryPort, out: &mut Vec<QuantumBranch<O>>) -> Result<()> {
        if slot == self.circuit().slots() {
            return self.finish(part, out, None);
        }
        let mut part = part;
        part.state.apply_all(&self.circuit().unitaries[slot])?;
        match self.choice.fired_at(slot) {
            None => {
                let next = self.plain(part, slot)?;
                self.exact(next, slot + 1, external, out)
            }
            Some((_, fire)) => {
                for (digits, p) in self.outcomes(&part.state)? {
                    let branch = Partial {
                        weight: part.weight,
                        state: part.state.clone(),
                        oracle: part.oracle.clone(),
                        trace: part.trace.clone(),
                    };
                    let next = self.fire(branch, slot, fire, &digits, p, external)?;
                    self.exact(next, slot + 1, external, out)?;
                }
                Ok(())
            }
        }
    }

    fn sample(&self, mut part: Partial<O>, external: &mut dyn QueryPort, rng: &mut dyn RngCore) -> Result<QuantumBranch<O>> {
        for slot in 0..self.circuit().slots() {
            part.state.apply_all(&self.circuit().unitaries[slot])?;
            part = match self.choice.fired_at(slot) {
                None => self.plain(part, slot)?,
                Some((_, fire)) => {
                    let outcomes = self.outcomes(&part.state)?;
                    let digits = draw(outcomes.clone(), rng);
                    let p = outcomes.iter().find(|(d, _)| *d == digits).map(|(_, p)| *p).unwrap_or(0.0);
                    let mut next = self.fire(part, slot, fire, &digits, p, external)?;
                    next.weight = 1.0;
                    next
                }
            };
        }
        let mut out = Vec::with_capacity(1);
        self.finish(part, &mut out, Some(rng))?;
        Ok(out.pop().expect("sampling yields one branch"))
    }
}

fn draw<T: Clone>(items: Vec<(T, f64)>, rng: &mut dyn RngCore) -> T {
    let total: f64 = items.iter().map(|(_, p)| p).sum();
    let mut u = rng.gen_range(0.0..1.0) * total;
    for (item, p) in &items {
        if u < *p {
            return item.clone();
        }
        u -= p;
    }
    items.last().expect("non-empty distribution").0.clone()
}

/// Quantum simulator: at each fired slot the query register is measured,
/// the oracle is reprogrammed from the outcome, and the slot is answered
/// before (`Timing::Before`) or after (`Timing::After`) that reprogramming.
///
/// Exact mode returns every branch with its probability; sample mode
/// returns one Born-rule draw with weight 1.
pub fn run_quantum_sim<O: KeyedOracle>(
    adv: &QuantumAdversary,
    pi: &O,
    external: &mut dyn QueryPort,
    choice: &SimChoice,
    mode: SimMode<'_>,
    message: Option<usize>,
) -> Result<Vec<QuantumBranch<O>>> {
    choice.validate(adv.slots())?;
    let init = adv.initial_digits(message)?;
    let start = Partial {
        weight: 1.0,
        state: adv.circuit.initial_state(init.as_deref())?,
        oracle: StatefulOracle::new(pi.clone()),
        trace: Vec::new(),
    };
    let run = QuantumRun { adv, pi, choice };
    match mode {
        SimMode::Exact => {
            let mut out = Vec::new();
            run.exact(start, 0, external, &mut out)?;
            Ok(out)
        }
        SimMode::Sample(rng) => Ok(vec![run.sample(start, external, rng)?]),
    }
}

/// Collapses branches into an output distribution.
pub fn branch_distribution<O: KeyedOracle>(branches: &[QuantumBranch<O>]) -> BTreeMap<Output, f64> {
    let mut out = BTreeMap::new();
    for b in branches {
        *out.entry(b.output.clone()).or_insert(0.0) += b.weight;
    }
    out
}

#[derive(Clone, Debug)]
pub struct Component {
    pub choice: SimChoice,
    pub sign: f64,
    pub state: StateVector,
}

/// Every signed component of the reprogrammed-oracle final state.
///
/// Slot `v_j` is projected onto the hit or miss value of index `j` (x side on
/// forward slots, y side on backward slots). Each slot's oracle is `pi`
/// reprogrammed at the indices that fired earlier, plus the one firing there
/// with `Timing::Before`. The sign is `-1` per `Timing::After` index.
pub fn decompose_state<O: KeyedOracle>(
    adv: &QuantumAdversary,
    pi: &O,
    pi_star: &O,
    keys: &[usize],
    xs: &[usize],
    message: Option<usize>,
) -> Result<Vec<Component>> {
    let keys: Vec<usize> = if keys.is_empty() { vec![0; xs.len()] } else { keys.to_vec() };
    let hm = pi.hit_miss(pi_star, &keys, xs)?;
    let triples: Vec<Triple> = hm.iter().map(|h| Triple { key: h.key, x: h.x_hit, y: h.y_hit }).collect();
    let k = xs.len();
    let circuit = &adv.circuit;
    let init = adv.initial_digits(message)?;
    let regs = circuit.layout.query_registers();
    let mut cache: BTreeMap<u64, O> = BTreeMap::new();
    let mut out = Vec::new();
    for choice in SimChoice::enumerate(circuit.slots(), k, true) {
        let mut oracles = Vec::with_capacity(circuit.slots());
        let mut projections = Vec::with_capacity(circuit.slots());
        for (slot, tag) in circuit.tags.iter().enumerate() {
            let mut mask = 0u64;
            for (j, e) in choice.entries.iter().enumerate() {
                if let Some(f) = e {
                    if f.slot < slot || (f.slot == slot && f.timing == Timing::Before) {
                        mask |= 1 << j;
                    }
                }
            }
            if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(mask) {
                let set: Vec<Triple> = (0..k).filter(|j| mask >> j & 1 == 1).map(|j| triples[j]).collect();
                e.insert(pi.reprogrammed_seq(&set)?);
            }
            oracles.push(mask);
            projections.push(choice.fired_at(slot).map(|(j, f)| {
                let h = hm[j];
                let value = match (tag, f.kind) {
                    (Direction::Forward, HitOrMiss::Hit) => h.x_hit,
                    (Direction::Forward, HitOrMiss::Miss) => h.x_miss,
                    (Direction::Backward, HitOrMiss::Hit) => h.y_hit,
                    (Direction::Backward, HitOrMiss::Miss) => h.y_miss,
                };
                let digits = if circuit.layout.key.is_some() { vec![h.key, value] } else { vec![value] };
                Projector::new(regs.clone(), [digits])
            }));
        }
        let refs: Vec<&O> = oracles.iter().map(|m| &cache[m]).collect();
        let state = circuit.run_with_insertions(init.as_deref(), &refs, &projections)?;
        let after = choice.entries.iter().flatten().filter(|f| f.timing == Timing::After).count();
        let sign = if after % 2 == 0 { 1.0 } else { -1.0 };
        out.push(Component { choice, sign, state });
    }
    Ok(out)
}

/// Norm of `Σ sign·φ - |ψ_{π[x⃗*→y⃗*]}⟩`.
pub fn decomposition_residual<O: KeyedOracle>(
    adv: &QuantumAdversary,
    pi: &O,
    pi_star: &O,
    keys: &[usize],
    xs: &[usize],
    message: Option<usize>,
) -> Result<(usize, f64)> {
    let comps = decompose_state(adv, pi, pi_star, keys, xs, message)?;
    let keys: Vec<usize> = if keys.is_empty() { vec![0; xs.len()] } else { keys.to_vec() };
    let triples: Vec<Triple> =
        keys.iter().zip(xs).map(|(&key, &x)| Triple { key, x, y: pi_star.forward(key, x) }).collect();
    let target = adv.final_state(&pi.reprogrammed_seq(&triples)?, message)?;
    let mut sum = target.zeros_like();
    for c in &comps {
        sum.add_scaled(&c.state, c.sign)?;
    }
    Ok((comps.len(), sum.distance(&target)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use rand::SeedableRng;

    #[test]
    fn choice_space_counts() {
        for (q, k, w) in [(0, 1, true), (1, 1, true), (2, 2, false), (2, 2, true), (3, 2, true), (4, 1, false)] {
            let n = SimChoice::enumerate(q, k, w).len();
            assert_eq!(BigUint::from(n), SimChoice::space_size(q, k, w), "{q} {k} {w}");
        }
        assert_eq!(SimChoice::enumerate(1, 1, true).len(), 5);
        assert_eq!(SimChoice::enumerate(2, 2, true).len(), 49);
        assert_eq!(SimChoice::enumerate(0, 3, true), vec![SimChoice::none(3)]);
    }

    #[test]
    fn choice_validation() {
        let f = Fire { slot: 1, kind: HitOrMiss::Hit, timing: Timing::Before };
        assert!(SimChoice { entries: vec![Some(f), Some(f)] }.validate(2).is_err());
        assert!(SimChoice { entries: vec![Some(f)] }.validate(1).is_err());
        assert!(SimChoice { entries: vec![Some(f), None] }.validate(2).is_ok());
    }

    #[test]
    fn sampler_stays_in_space() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let c = SimChoice::sample(2, 2, true, &mut rng);
            assert!(c.validate(2).is_ok());
        }
    }

    struct QueryThenOutput(Query);

    impl ClassicalAdversary for QueryThenOutput {
        fn name(&self) -> String {
            "query-then-output".into()
        }
        fn budget(&self) -> usize {
            1
        }
        fn run(&self, port: &mut dyn QueryPort, _coins: usize) -> Result<Output> {
            let a = port.query(self.0)?;
            Ok(Output::new(vec![self.0.value()], a))
        }
    }

    #[test]
    fn classical_hit_and_miss_forward() {
        let pi = Permutation::from_cycles(4, &[&[0, 1, 2, 3]]).unwrap();
        let star = Permutation::from_cycles(4, &[&[0, 2]]).unwrap();
        let adv = QueryThenOutput(Query::forward(0));
        let hit = SimChoice { entries: vec![Some(Fire { slot: 0, kind: HitOrMiss::Hit, timing: Timing::Before })] };
        let mut ext = CountingPort::new(&star);
        let run = run_classical_sim(&adv, &pi, &mut ext, &hit, 0).unwrap();
        assert_eq!(run.output.z, star.apply(0));
        assert_eq!(run.oracle.current(), &pi.reprogram(0, star.apply(0)).unwrap());
        assert_eq!(ext.count, 1);

        let miss = SimChoice { entries: vec![Some(Fire { slot: 0, kind: HitOrMiss::Miss, timing: Timing::Before })] };
        let mut ext = CountingPort::new(&star);
        let run = run_classical_sim(&adv, &pi, &mut ext, &miss, 0).unwrap();
        let expect = pi.reprogram(star.apply_inverse(pi.apply(0)), pi.apply(0)).unwrap();
        // the answer comes from the reprogrammed oracle, which moved 0 to π(1)
        assert_eq!(run.output.z, expect.apply(0));
        assert_eq!(run.output.z, 2);
        assert_eq!(run.oracle.current(), &expect);
        assert_eq!(run.oracle.replay().unwrap(), expect);

        let mut ext = CountingPort::new(&star);
        let run = run_classical_sim(&adv, &pi, &mut ext, &SimChoice::none(1), 0).unwrap();
        assert_eq!(run.output.z, pi.apply(0));
        assert_eq!(ext.count, 0);
    }

    #[test]
    fn budget_is_enforced() {
        struct Greedy;
        impl ClassicalAdversary for Greedy {
            fn name(&self) -> String {
                "greedy".into()
            }
            fn budget(&self) -> usize {
                1
            }
            fn run(&self, port: &mut dyn QueryPort, _coins: usize) -> Result<Output> {
                port.query(Query::forward(0))?;
                port.query(Query::forward(1))?;
                Ok(Output::new(vec![0], 0))
            }
        }
        let pi = Permutation::identity(4);
        let mut ext = CountingPort::new(&pi);
        let r = run_classical_sim(&Greedy, &pi, &mut ext, &SimChoice::none(1), 0);
        assert!(matches!(r, Err(Error::Protocol(_))));
    }

    #[test]
    fn trace_serializes_as_json_lines() {
        let e = TraceEntry {
            slot: 0,
            direction: Direction::Forward,
            key: Some(0),
            value: Some(2),
            measured: true,
            reprogram: Some(Triple::new(0, 2, 1)),
            timing: Some(Timing::After),
            external: Some(Query::forward(2)),
        };
        let s = trace_to_jsonl(&[e.clone(), e]).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.starts_with(r#"{"slot":0,"direction":"forward""#));
    }
}
