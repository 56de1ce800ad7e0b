//! Search games: relations, exact optimal classical play, bound reports, and
//! one-round interactive challengers with view verification.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::constructions::{self, SpongeParams};
use crate::error::{Error, Result};
use crate::sim::{Output, Query, QueryPort};

type Pred = Arc<dyn Fn(&[usize], &[usize], usize) -> bool + Send + Sync>;
type OutPred = Arc<dyn Fn(&[usize]) -> bool + Send + Sync>;

/// `R ⊆ X^k × Y^k × Z`.
#[derive(Clone)]
pub struct Relation {
    pub name: String,
    pub k: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub z_size: usize,
    pred: Pred,
    output_pred: Option<OutPred>,
}

impl std::fmt::Debug for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Relation({}, k={}, |X|={}, |Y|={}, |Z|={})", self.name, self.k, self.x_size, self.y_size, self.z_size)
    }
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        k: usize,
        x_size: usize,
        y_size: usize,
        z_size: usize,
        pred: impl Fn(&[usize], &[usize], usize) -> bool + Send + Sync + 'static,
    ) -> Self {
        Relation { name: name.into(), k, x_size, y_size, z_size: z_size.max(1), pred: Arc::new(pred), output_pred: None }
    }

    /// Marks the relation as depending on `y⃗` only through `out`.
    pub fn with_output_predicate(mut self, out: impl Fn(&[usize]) -> bool + Send + Sync + 'static) -> Self {
        self.output_pred = Some(Arc::new(out));
        self
    }

    pub fn output_predicate(&self) -> Option<&OutPred> {
        self.output_pred.as_ref()
    }

    pub fn holds(&self, xs: &[usize], ys: &[usize], z: usize) -> bool {
        xs.len() == self.k && ys.len() == self.k && (self.pred)(xs, ys, z)
    }

    pub fn wins(&self, out: &Output, ys: &[usize]) -> bool {
        self.holds(&out.xs, ys, out.z)
    }

    pub fn fixed_point(n: usize) -> Self {
        Relation::new("fixed-point", 1, n, n, 1, |x, y, _| x[0] == y[0])
    }

    /// Both `x` and `y` end in `n_half` zero bits on `{0,1}^{2·n_half}`.
    pub fn double_sided_zero(n_half: usize) -> Result<Self> {
        if n_half == 0 || n_half > 12 {
            return Err(Error::Parameter(format!("zero search half-width {n_half} out of range")));
        }
        let size = 1 << (2 * n_half);
        let mask = (1usize << n_half) - 1;
        Ok(Relation::new("double-sided-zero", 1, size, size, 1, move |x, y, _| x[0] & mask == 0 && y[0] & mask == 0))
    }

    /// Zero search over a domain of total width `bits` (which must be even).
    pub fn double_sided_zero_bits(bits: usize) -> Result<Self> {
        if !bits.is_multiple_of(2) {
            return Err(Error::Parameter(format!("zero search needs an even width, got {bits}")));
        }
        Self::double_sided_zero(bits / 2)
    }

    pub fn from_pairs(name: impl Into<String>, n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        for &(x, y) in pairs {
            crate::error::check_domain(x, n)?;
            crate::error::check_domain(y, n)?;
        }
        let set: BTreeSet<(usize, usize)> = pairs.iter().copied().collect();
        Ok(Relation::new(name, 1, n, n, 1, move |x, y, _| set.contains(&(x[0], y[0]))))
    }

    /// Relation file: a JSON list of `[x, y]` pairs.
    pub fn from_json(name: impl Into<String>, n: usize, json: &str) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = serde_json::from_str(json)?;
        Self::from_pairs(name, n, &pairs)
    }

    pub fn load(path: &Path, n: usize) -> Result<Self> {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_json(format!("generalized:{name}"), n, &std::fs::read_to_string(path)?)
    }

    pub fn full(n: usize) -> Self {
        Relation::new("full", 1, n, n, 1, |_, _, _| true)
    }

    pub fn empty(n: usize) -> Self {
        Relation::new("empty", 1, n, n, 1, |_, _, _| false).with_output_predicate(|_| false)
    }

    /// `y = x ⊕ (n-1)`.
    pub fn complement(n: usize) -> Self {
        Relation::new("complement", 1, n, n, 1, move |x, y, _| y[0] == x[0] ^ (n - 1))
    }

    pub fn preimage(x_size: usize, y_size: usize, target: usize) -> Self {
        Relation::new("preimage", 1, x_size, y_size, 1, move |_, y, _| y[0] == target)
            .with_output_predicate(move |y| y[0] == target)
    }

    /// Distinct inputs with equal outputs.
    pub fn collision(x_size: usize, y_size: usize) -> Self {
        Relation::new("collision", 2, x_size, y_size, 1, |x, y, _| x[0] != x[1] && y[0] == y[1])
            .with_output_predicate(|y| y[0] == y[1])
    }

    pub fn multi_collision(k: usize, x_size: usize, y_size: usize) -> Self {
        Relation::new("multi-collision", k, x_size, y_size, 1, |x, y, _| {
            let distinct: BTreeSet<_> = x.iter().collect();
            distinct.len() == x.len() && y.iter().all(|v| *v == y[0])
        })
        .with_output_predicate(|y| y.iter().all(|v| *v == y[0]))
    }

    /// Arity-one relations registered for permutation games on `n` points.
    pub fn registry(n: usize) -> Vec<Relation> {
        let mut out = vec![Relation::fixed_point(n), Relation::complement(n)];
        let bits = n.trailing_zeros() as usize;
        if n.is_power_of_two() && bits.is_multiple_of(2) && bits > 0 {
            out.push(Relation::double_sided_zero(bits / 2).expect("even width"));
        }
        out
    }
}

/// Largest row or column count of an arity-one relation.
pub fn r_max(rel: &Relation) -> Result<usize> {
    if rel.k != 1 {
        return Err(Error::Capability(format!("r_max needs an arity-one relation, {} has arity {}", rel.name, rel.k)));
    }
    if rel.x_size * rel.y_size > 1 << 24 {
        return Err(Error::Capability("relation too large to enumerate".into()));
    }
    let member = |x, y| (0..rel.z_size).any(|z| rel.holds(&[x], &[y], z));
    let rows = (0..rel.x_size).map(|x| (0..rel.y_size).filter(|&y| member(x, y)).count()).max().unwrap_or(0);
    let cols = (0..rel.y_size).map(|y| (0..rel.x_size).filter(|&x| member(x, y)).count()).max().unwrap_or(0);
    Ok(rows.max(cols))
}

type Known = Vec<(usize, usize)>;

struct TreeSearch<'a> {
    rel: &'a Relation,
    n: usize,
    budget: usize,
    visited: usize,
    memo: HashMap<(Known, usize), BigRational>,
}

impl TreeSearch<'_> {
    fn output_value(&self, known: &Known) -> BigRational {
        let k = self.rel.k;
        let free_y: Vec<usize> = (0..self.n).filter(|y| !known.iter().any(|p| p.1 == *y)).collect();
        let mut best = BigRational::zero();
        let mut xs = vec![0usize; k];
        let total = self.n.pow(k as u32);
        for t in 0..total {
            let mut rem = t;
            for x in xs.iter_mut().rev() {
                *x = rem % self.n;
                rem /= self.n;
            }
            let unknown: Vec<usize> = {
                let mut u: Vec<usize> =
                    xs.iter().copied().filter(|x| !known.iter().any(|p| p.0 == *x)).collect();
                u.sort_unstable();
                u.dedup();
                u
            };
            let mut assignments = 0u64;
            let mut wins = vec![0u64; self.rel.z_size];
            let mut chosen = vec![usize::MAX; unknown.len()];
            let mut used = vec![false; free_y.len()];
            self.assign(known, &xs, &unknown, &free_y, &mut chosen, &mut used, 0, &mut assignments, &mut wins);
            let w = wins.into_iter().max().unwrap_or(0);
            let v = bounds::ratio(w, assignments.max(1));
            if v > best {
                best = v;
            }
        }
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn assign(
        &self,
        known: &Known,
        xs: &[usize],
        unknown: &[usize],
        free_y: &[usize],
        chosen: &mut Vec<usize>,
        used: &mut Vec<bool>,
        depth: usize,
        count: &mut u64,
        wins: &mut [u64],
    ) {
        if depth == unknown.len() {
            *count += 1;
            let ys: Vec<usize> = xs
                .iter()
                .map(|x| match known.iter().find(|p| p.0 == *x) {
                    Some(p) => p.1,
                    None => free_y[chosen[unknown.iter().position(|u| u == x).expect("listed")]],
                })
                .collect();
            for (z, w) in wins.iter_mut().enumerate() {
                if self.rel.holds(xs, &ys, z) {
                    *w += 1;
                }
            }
            return;
        }
        for i in 0..free_y.len() {
            if !used[i] {
                used[i] = true;
                chosen[depth] = i;
                self.assign(known, xs, unknown, free_y, chosen, used, depth + 1, count, wins);
                used[i] = false;
            }
        }
    }

    fn value(&mut self, known: Known, rem: usize) -> Result<BigRational> {
        if let Some(v) = self.memo.get(&(known.clone(), rem)) {
            return Ok(v.clone());
        }
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::Capability(format!("game tree search exceeded {} states", self.budget)));
        }
        let mut best = self.output_value(&known);
        if rem > 0 && known.len() < self.n {
            let free_x: Vec<usize> = (0..self.n).filter(|x| !known.iter().any(|p| p.0 == *x)).collect();
            let free_y: Vec<usize> = (0..self.n).filter(|y| !known.iter().any(|p| p.1 == *y)).collect();
            let m = free_x.len() as u64;
            for &x in &free_x {
                let mut acc = BigRational::zero();
                for &y in &free_y {
                    acc += self.value(with(&known, x, y), rem - 1)?;
                }
                acc /= bounds::int(m);
                if acc > best {
                    best = acc;
                }
            }
            for &y in &free_y {
                let mut acc = BigRational::zero();
                for &x in &free_x {
                    acc += self.value(with(&known, x, y), rem - 1)?;
                }
                acc /= bounds::int(m);
                if acc > best {
                    best = acc;
                }
            }
        }
        self.memo.insert((known, rem), best.clone());
        Ok(best)
    }
}

fn with(known: &Known, x: usize, y: usize) -> Known {
    let mut v = known.clone();
    v.push((x, y));
    v.sort_unstable();
    v
}

/// Exact optimal success of a `queries`-query adaptive classical adversary
/// against a uniformly random permutation on `n` points.
///
/// The search tracks the set of learned pairs; the posterior given them is
/// uniform over the consistent permutations.
pub fn best_k_classical(rel: &Relation, n: usize, queries: usize, budget: usize) -> Result<BigRational> {
    if rel.x_size != n || rel.y_size != n {
        return Err(Error::Precondition(format!("relation {} is not over {n} points", rel.name)));
    }
    if n > 8 {
        return Err(Error::Capability(format!("game tree search on {n} points is beyond desk scale")));
    }
    let mut search = TreeSearch { rel, n, budget, visited: 0, memo: HashMap::new() };
    search.value(Vec::new(), queries.min(n))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameParams {
    /// Domain size `N`, half-width, or block bits depending on the game.
    pub n: u64,
    pub q: u64,
    pub k: u64,
    pub r_max: Option<u64>,
    pub sponge: Option<SpongeParams>,
}

impl GameParams {
    pub fn simple(n: u64, q: u64) -> Self {
        GameParams { n, q, k: 1, r_max: None, sponge: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub game: String,
    pub params: String,
    pub q: u64,
    pub k: u64,
    pub raw_bound: String,
    pub clamped: String,
    pub raw_value: f64,
    pub clamped_value: f64,
    pub measured: Option<f64>,
    pub verdict: Option<bool>,
}

impl BoundReport {
    fn new(game: &str, params: String, q: u64, k: u64, raw: BigRational) -> Self {
        let c = bounds::clamp(&raw);
        BoundReport {
            game: game.to_string(),
            params,
            q,
            k,
            raw_bound: bounds::format(&raw),
            clamped: bounds::format(&c),
            raw_value: bounds::to_f64(&raw),
            clamped_value: bounds::to_f64(&c),
            measured: None,
            verdict: None,
        }
    }

    /// Records a measured success probability and whether it respects the bound.
    pub fn with_measurement(mut self, measured: f64, tolerance: f64) -> Self {
        self.verdict = Some(measured <= self.clamped_value + tolerance);
        self.measured = Some(measured);
        self
    }

    pub fn csv_header() -> &'static str {
        "game,params,q,k,raw_bound,clamped"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.game, self.params, self.q, self.k, self.raw_bound, self.clamped)
    }
}

pub const GAME_IDS: [&str; 8] = [
    "generalized",
    "double-sided-zero",
    "fixed-point",
    "sponge-preimage",
    "sponge-oneway",
    "sponge-collision",
    "sponge-multicollision",
    "icm-collision",
];

/// Evaluates the registered closed-form bound for a game.
pub fn game_bound(id: &str, p: &GameParams) -> Result<BoundReport> {
    let sponge = || p.sponge.ok_or_else(|| Error::Parameter(format!("{id} needs sponge parameters")));
    let (params, k, raw) = match id {
        "generalized" => {
            let r = p.r_max.ok_or_else(|| Error::Parameter("generalized needs r_max".into()))?;
            if p.n == 0 {
                return Err(Error::Parameter("N must be positive".into()));
            }
            (format!("N={};r_max={r}", p.n), 1, bounds::double_sided_search(p.q, r, p.n))
        }
        "double-sided-zero" => (format!("n={}", p.n), 1, bounds::double_sided_zero(p.n, p.q)),
        "fixed-point" => {
            if p.n == 0 {
                return Err(Error::Parameter("N must be positive".into()));
            }
            (format!("N={}", p.n), 1, bounds::fixed_point(p.n, p.q))
        }
        "sponge-preimage" => {
            let s = sponge()?;
            (s.label(), 1, bounds::sponge_preimage(&s, p.q))
        }
        "sponge-oneway" => {
            let s = sponge()?;
            (s.label(), 2, bounds::sponge_oneway(&s, p.q))
        }
        "sponge-collision" => {
            let s = sponge()?;
            (s.label(), 2, bounds::sponge_collision(&s, p.q))
        }
        "sponge-multicollision" => {
            let s = sponge()?;
            if p.k < 2 {
                return Err(Error::Parameter("multi-collisions need k >= 2".into()));
            }
            (s.label(), p.k, bounds::sponge_multicollision(&s, p.q, p.k))
        }
        "icm-collision" => (format!("n={}", p.n), 2, bounds::icm_collision(p.n, p.q)?),
        other => return Err(Error::UnknownGame(other.to_string())),
    };
    Ok(BoundReport::new(id, params, p.q, k, raw))
}

/// Sponge lifting bound for an explicit `p_max`.
pub fn sponge_lift_report(s: &SpongeParams, q: u64, k: u64, p_max: &BigRational) -> BoundReport {
    BoundReport::new("sponge-lift", s.label(), q, k, bounds::sponge_lift(s, q, k, p_max))
}

/// Exact `p_max` of the sponge preimage relation.
pub fn sponge_preimage_pmax(s: &SpongeParams) -> Result<BigRational> {
    constructions::p_max_bound(&Relation::preimage(1 << s.m, 1 << s.n, 0), constructions::PmaxKind::K1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    Challenge(usize),
    Reply(Output),
}

/// What a challenger saw: its queries, their answers, the messages, and its coins.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct View {
    pub coins: usize,
    pub queries: Vec<Query>,
    pub responses: Vec<usize>,
    pub transcript: Vec<Message>,
}

/// A deterministic one-round challenger: it may query, send one message,
/// read one reply, query again, and decide.
pub trait Challenger: Send + Sync {
    fn name(&self) -> String;
    fn budget(&self) -> usize;
    fn coin_space(&self) -> usize {
        1
    }
    fn open(&self, port: &mut dyn QueryPort, coins: usize) -> Result<Option<usize>>;
    fn decide(&self, port: &mut dyn QueryPort, coins: usize, message: Option<usize>, reply: &Output) -> Result<bool>;
}

struct RecordingPort<'a> {
    inner: &'a mut dyn QueryPort,
    queries: Vec<Query>,
    responses: Vec<usize>,
    budget: usize,
}

impl QueryPort for RecordingPort<'_> {
    fn query(&mut self, q: Query) -> Result<usize> {
        if self.queries.len() >= self.budget {
            return Err(Error::Protocol("challenger exceeded its query budget".into()));
        }
        let a = self.inner.query(q)?;
        self.queries.push(q);
        self.responses.push(a);
        Ok(a)
    }
}

/// Plays one interaction, returning the verdict and the challenger's view.
pub fn play(
    ch: &dyn Challenger,
    port: &mut dyn QueryPort,
    coins: usize,
    adversary: &mut dyn FnMut(Option<usize>) -> Result<Output>,
) -> Result<(bool, View)> {
    let mut rec = RecordingPort { inner: port, queries: Vec::new(), responses: Vec::new(), budget: ch.budget() };
    let msg = ch.open(&mut rec, coins)?;
    let reply = adversary(msg)?;
    let verdict = ch.decide(&mut rec, coins, msg, &reply)?;
    let mut transcript: Vec<Message> = msg.into_iter().map(Message::Challenge).collect();
    transcript.push(Message::Reply(reply));
    Ok((verdict, View { coins, queries: rec.queries, responses: rec.responses, transcript }))
}

struct ReplayPort<'a> {
    view: &'a View,
    pos: usize,
    ok: bool,
}

impl QueryPort for ReplayPort<'_> {
    fn query(&mut self, q: Query) -> Result<usize> {
        if self.view.queries.get(self.pos) != Some(&q) {
            self.ok = false;
            return Err(Error::Protocol("replayed query differs from the view".into()));
        }
        let a = self.view.responses[self.pos];
        self.pos += 1;
        Ok(a)
    }
}

/// Every recorded answer is consistent with a single permutation.
fn consistent(view: &View) -> bool {
    if view.queries.len() != view.responses.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut inv = HashMap::new();
    for (q, &a) in view.queries.iter().zip(&view.responses) {
        let (key, x, y) = match *q {
            Query::Forward { key, x } => (key, x, a),
            Query::Backward { key, y } => (key, a, y),
        };
        if *fwd.entry((key, x)).or_insert(y) != y || *inv.entry((key, y)).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Replays the challenger on the view; rejects on any inconsistency.
pub fn ver_view(ch: &dyn Challenger, view: &View) -> bool {
    if !consistent(view) || view.queries.len() > ch.budget() {
        return false;
    }
    let mut port = ReplayPort { view, pos: 0, ok: true };
    let Ok(msg) = ch.open(&mut port, view.coins) else {
        return false;
    };
    let expected_len = msg.is_some() as usize + 1;
    if view.transcript.len() != expected_len {
        return false;
    }
    if let Some(m) = msg {
        if view.transcript[0] != Message::Challenge(m) {
            return false;
        }
    }
    let Some(Message::Reply(reply)) = view.transcript.last() else {
        return false;
    };
    match ch.decide(&mut port, view.coins, msg, reply) {
        Ok(v) => port.ok && port.pos == view.queries.len() && v,
        Err(_) => false,
    }
}

/// Accepts iff the reply's `(x⃗, O(x⃗), z)` lies in the relation.
pub struct RelationChallenger {
    pub relation: Relation,
}

impl Challenger for RelationChallenger {
    fn name(&self) -> String {
        format!("relation:{}", self.relation.name)
    }

    fn budget(&self) -> usize {
        self.relation.k
    }

    fn open(&self, _port: &mut dyn QueryPort, _coins: usize) -> Result<Option<usize>> {
        Ok(None)
    }

    fn decide(&self, port: &mut dyn QueryPort, _coins: usize, _m: Option<usize>, reply: &Output) -> Result<bool> {
        if reply.xs.len() != self.relation.k {
            return Ok(false);
        }
        let ys = (0..reply.xs.len())
            .map(|j| port.query(Query::Forward { key: reply.key(j), x: reply.xs[j] }))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.relation.wins(reply, &ys))
    }
}

/// Samples `x`, sends `π(x)`, and accepts a preimage of it.
pub struct OneWayChallenger {
    pub n: usize,
}

impl Challenger for OneWayChallenger {
    fn name(&self) -> String {
        "one-way".into()
    }

    fn budget(&self) -> usize {
        2
    }

    fn coin_space(&self) -> usize {
        self.n
    }

    fn open(&self, port: &mut dyn QueryPort, coins: usize) -> Result<Option<usize>> {
        Ok(Some(port.query(Query::forward(coins))?))
    }

    fn decide(&self, port: &mut dyn QueryPort, _coins: usize, m: Option<usize>, reply: &Output) -> Result<bool> {
        let Some(&x) = reply.xs.first() else { return Ok(false) };
        if x >= self.n {
            return Ok(false);
        }
        Ok(Some(port.query(Query::forward(x))?) == m)
    }
}

/// Sends a uniformly random `y` and accepts a preimage of it.
pub struct InvertChallenger {
    pub n: usize,
}

impl Challenger for InvertChallenger {
    fn name(&self) -> String {
        "invert".into()
    }

    fn budget(&self) -> usize {
        1
    }

    fn coin_space(&self) -> usize {
        self.n
    }

    fn open(&self, _port: &mut dyn QueryPort, coins: usize) -> Result<Option<usize>> {
        Ok(Some(coins))
    }

    fn decide(&self, port: &mut dyn QueryPort, coins: usize, _m: Option<usize>, reply: &Output) -> Result<bool> {
        let Some(&x) = reply.xs.first() else { return Ok(false) };
        if x >= self.n {
            return Ok(false);
        }
        Ok(port.query(Query::forward(x))? == coins)
    }
}

/// Sends nothing, queries nothing, accepts.
pub struct NullChallenger;

impl Challenger for NullChallenger {
    fn name(&self) -> String {
        "null".into()
    }

    fn budget(&self) -> usize {
        0
    }

    fn open(&self, _port: &mut dyn QueryPort, _coins: usize) -> Result<Option<usize>> {
        Ok(None)
    }

    fn decide(&self, _port: &mut dyn QueryPort, _c: usize, _m: Option<usize>, _r: &Output) -> Result<bool> {
        Ok(true)
    }
}

/// Queries the reply's `x` twice and accepts if it is a fixed point.
pub struct EchoChallenger;

impl Challenger for EchoChallenger {
    fn name(&self) -> String {
        "echo".into()
    }

    fn budget(&self) -> usize {
        2
    }

    fn open(&self, _port: &mut dyn QueryPort, _coins: usize) -> Result<Option<usize>> {
        Ok(None)
    }

    fn decide(&self, port: &mut dyn QueryPort, _c: usize, _m: Option<usize>, reply: &Output) -> Result<bool> {
        let x = reply.xs[0];
        let a = port.query(Query::forward(x))?;
        let b = port.query(Query::forward(x))?;
        Ok(a == b && a == x)
    }
}
