//! Submodular set functions over edge keys.
//!
//! An [`Oracle`] evaluates `f` on key sets (duplicate keys collapse, so
//! parallel edges sharing a key add nothing the second time). A
//! [`StreamState`] keeps `f(S)` for an append-only accepted list so the
//! stream marginal `f(e:S)` costs one evaluation.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::instance::{Edge, EdgeId, Instance, Key};

/// Largest singleton spread `f_max / f_min` accepted at construction.
pub const MAX_SINGLETON_SPREAD: f64 = 1e12;

/// Default ground-set size for exhaustive submodularity checks.
pub const EXHAUSTIVE_LIMIT: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("unknown key {0}")]
    UnknownKey(Key),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("oracle spec line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("ground set of {size} elements exceeds the exhaustive limit {limit}")]
    GroundTooLarge { size: usize, limit: usize },
}

fn domain(msg: impl Into<String>) -> OracleError {
    OracleError::Domain(msg.into())
}

/// Anything that can be evaluated on a set of keys.
pub trait SetFunction {
    fn value(&self, keys: &[Key]) -> Result<f64, OracleError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Linear,
    Coverage,
    CovLin,
    Tight,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Linear => "linear",
            OracleKind::Coverage => "coverage",
            OracleKind::CovLin => "covlin",
            OracleKind::Tight => "tight",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TightParams {
    pub c: f64,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
struct CoverageFn {
    elem_weights: Vec<f64>,
    sets: HashMap<Key, Vec<u32>>,
    costs: HashMap<Key, f64>,
}

impl CoverageFn {
    fn cost(&self, key: Key) -> f64 {
        self.costs.get(&key).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
enum Family {
    Linear(HashMap<Key, f64>),
    Coverage(CoverageFn),
    Tight { params: TightParams, weights: Vec<f64> },
}

/// A nonnegative submodular function with an evaluation counter.
#[derive(Debug)]
pub struct Oracle {
    family: Family,
    kind: OracleKind,
    evaluations: AtomicU64,
}

impl Clone for Oracle {
    fn clone(&self) -> Self {
        Self {
            family: self.family.clone(),
            kind: self.kind,
            evaluations: AtomicU64::new(0),
        }
    }
}

impl Oracle {
    pub fn linear(weights: impl IntoIterator<Item = (Key, f64)>) -> Result<Self, OracleError> {
        let weights: HashMap<Key, f64> = weights.into_iter().collect();
        for (&k, &w) in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(domain(format!("weight of key {k} must be finite and nonnegative, got {w}")));
            }
        }
        Self::finish(Family::Linear(weights), OracleKind::Linear)
    }

    /// Weighted coverage: `f(T)` is the total weight of elements covered by
    /// the sets of `T`. `elem_weights` fixes the universe size.
    pub fn coverage(elem_weights: Vec<f64>, sets: impl IntoIterator<Item = (Key, Vec<u32>)>) -> Result<Self, OracleError> {
        let cov = Self::coverage_fn(elem_weights, sets, HashMap::new())?;
        Self::finish(Family::Coverage(cov), OracleKind::Coverage)
    }

    /// Coverage minus a per-key cost: `f(T) = cov(T) - Σ_{e∈T} c_e`.
    ///
    /// Nonnegativity is enforced through `c_e ≤ w(set_e) / k`, where `k` is
    /// the largest number of sets sharing one element.
    pub fn covlin(
        elem_weights: Vec<f64>,
        sets: impl IntoIterator<Item = (Key, Vec<u32>)>,
        costs: impl IntoIterator<Item = (Key, f64)>,
    ) -> Result<Self, OracleError> {
        let costs: HashMap<Key, f64> = costs.into_iter().collect();
        let cov = Self::coverage_fn(elem_weights, sets, costs)?;
        let mut freq = vec![0u32; cov.elem_weights.len()];
        for set in cov.sets.values() {
            for &x in set {
                freq[x as usize] += 1;
            }
        }
        let k = freq.iter().copied().max().unwrap_or(1).max(1) as f64;
        for (&key, &c) in &cov.costs {
            if !c.is_finite() || c < 0.0 {
                return Err(domain(format!("cost of key {key} must be finite and nonnegative, got {c}")));
            }
            let set = cov
                .sets
                .get(&key)
                .ok_or_else(|| domain(format!("cost given for key {key} without a set")))?;
            let w: f64 = set.iter().map(|&x| cov.elem_weights[x as usize]).sum();
            if c > w / k + crate::TOL {
                return Err(domain(format!(
                    "cost {c} of key {key} exceeds w(set)/k = {} (nonnegativity bound)",
                    w / k
                )));
            }
        }
        Self::finish(Family::Coverage(cov), OracleKind::CovLin)
    }

    fn coverage_fn(
        elem_weights: Vec<f64>,
        sets: impl IntoIterator<Item = (Key, Vec<u32>)>,
        costs: HashMap<Key, f64>,
    ) -> Result<CoverageFn, OracleError> {
        for (i, &a) in elem_weights.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(domain(format!("weight of element {i} must be finite and nonnegative, got {a}")));
            }
        }
        let mut map = HashMap::new();
        for (key, mut set) in sets {
            set.sort_unstable();
            set.dedup();
            if let Some(&x) = set.iter().find(|&&x| x as usize >= elem_weights.len()) {
                return Err(domain(format!("element {x} of key {key} outside universe of size {}", elem_weights.len())));
            }
            if map.insert(key, set).is_some() {
                return Err(domain(format!("key {key} given twice")));
            }
        }
        Ok(CoverageFn { elem_weights, sets: map, costs })
    }

    fn finish(family: Family, kind: OracleKind) -> Result<Self, OracleError> {
        let oracle = Self { family, kind, evaluations: AtomicU64::new(0) };
        let (f_max, f_min) = oracle.singleton_range();
        if f_max > 0.0 && f_min > 0.0 && f_max / f_min > MAX_SINGLETON_SPREAD {
            return Err(domain(format!("singleton values span {f_min}..{f_max}, beyond the supported range")));
        }
        Ok(oracle)
    }

    /// Builds the adversarial family on which the stack algorithm's ratio
    /// approaches `2C + C/(C-1)`, together with its graph.
    ///
    /// Vertices `x_0..x_n` are `0..=n`, `y_0..y_n` are `n+1..=2n+1`. The
    /// stream is `d_1..d_n, e_0, e_1..e_n` with `d_i = (x_0, x_i)` and
    /// `e_i = (x_i, y_i)`; keys equal 0-based arrival positions.
    pub fn tight(c: f64, n: usize, eps: f64, delta: f64) -> Result<(Self, Instance), OracleError> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(domain(format!("C must exceed 1, got {c}")));
        }
        if n < 1 {
            return Err(domain("n must be at least 1"));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(domain(format!("eps must lie in (0, 1), got {eps}")));
        }
        if !(delta >= 0.0 && delta < c - 1.0) {
            return Err(domain(format!("delta must lie in [0, C-1), got {delta}")));
        }
        let params = TightParams { c, n, eps, delta };
        let mut weights = vec![0.0; 2 * n + 1];
        for i in 1..=n {
            weights[i - 1] = (c + delta).powi(i as i32 - 1);
            weights[n + i] = if i == 1 { 1.0 + c - eps } else { c.powi(i as i32) - eps };
        }
        weights[n] = c.powi(n as i32) - eps;

        let x = |i: usize| i;
        let y = |i: usize| n + 1 + i;
        let mut edges = Vec::with_capacity(2 * n + 1);
        for i in 1..=n {
            edges.push(Edge { u: x(0), v: x(i), key: (i - 1) as Key });
        }
        edges.push(Edge { u: x(0), v: y(0), key: n as Key });
        for i in 1..=n {
            edges.push(Edge { u: x(i), v: y(i), key: (n + i) as Key });
        }
        let inst = Instance::uniform(2 * n + 2, 1, edges).expect("tight graph is valid");
        let oracle = Self::finish(Family::Tight { params, weights }, OracleKind::Tight)?;
        Ok((oracle, inst))
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn is_monotone(&self) -> bool {
        match &self.family {
            Family::Coverage(cov) => cov.costs.values().all(|&c| c == 0.0),
            _ => true,
        }
    }

    pub fn tight_params(&self) -> Option<TightParams> {
        match &self.family {
            Family::Tight { params, .. } => Some(*params),
            _ => None,
        }
    }

    /// Per-key weight of a linear oracle.
    pub fn linear_weight(&self, key: Key) -> Result<f64, OracleError> {
        match &self.family {
            Family::Linear(w) => w.get(&key).copied().ok_or(OracleError::UnknownKey(key)),
            _ => Err(domain(format!("{} oracle has no per-key weights", self.kind.name()))),
        }
    }

    /// Total number of set evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    fn count(&self, n: u64) {
        self.evaluations.fetch_add(n, Ordering::Relaxed);
    }

    pub fn contains_key(&self, key: Key) -> bool {
        match &self.family {
            Family::Linear(w) => w.contains_key(&key),
            Family::Coverage(cov) => cov.sets.contains_key(&key),
            Family::Tight { weights, .. } => (key as usize) < weights.len(),
        }
    }

    /// Checks that every edge key of `inst` is known.
    pub fn check_covers(&self, inst: &Instance) -> Result<(), OracleError> {
        match inst.edges().iter().find(|e| !self.contains_key(e.key)) {
            Some(e) => Err(OracleError::UnknownKey(e.key)),
            None => Ok(()),
        }
    }

    /// `f(T)`; increments the evaluation counter.
    pub fn eval(&self, keys: &[Key]) -> Result<f64, OracleError> {
        self.count(1);
        self.raw_eval(keys)
    }

    pub fn eval_edges(&self, inst: &Instance, ids: &[EdgeId]) -> Result<f64, OracleError> {
        self.eval(&inst.keys_of(ids))
    }

    fn raw_eval(&self, keys: &[Key]) -> Result<f64, OracleError> {
        let mut keys = keys.to_vec();
        keys.sort_unstable();
        keys.dedup();
        match &self.family {
            Family::Linear(w) => keys
                .iter()
                .map(|k| w.get(k).copied().ok_or(OracleError::UnknownKey(*k)))
                .sum(),
            Family::Coverage(cov) => {
                let mut covered = Vec::new();
                let mut cost = 0.0;
                for k in &keys {
                    let set = cov.sets.get(k).ok_or(OracleError::UnknownKey(*k))?;
                    covered.extend(set.iter().copied());
                    cost += cov.cost(*k);
                }
                // Sorted order keeps the floating-point sum reproducible.
                covered.sort_unstable();
                covered.dedup();
                let gained: f64 = covered.iter().map(|&x| cov.elem_weights[x as usize]).sum();
                Ok(gained - cost)
            }
            Family::Tight { params, weights } => {
                let n = params.n;
                let mut pair = vec![0.0; n + 1];
                let mut value = 0.0;
                for &k in &keys {
                    match tight_slot(n, weights.len(), k)? {
                        TightSlot::Apex => value += weights[n],
                        TightSlot::Pair(i) => pair[i] += weights[k as usize],
                    }
                }
                for i in 1..=n {
                    value += pair[i].min(weights[n + i]);
                }
                Ok(value)
            }
        }
    }

    /// `(f_max, smallest positive singleton value)` over all known keys.
    pub fn singleton_range(&self) -> (f64, f64) {
        let keys: Vec<Key> = match &self.family {
            Family::Linear(w) => w.keys().copied().collect(),
            Family::Coverage(cov) => cov.sets.keys().copied().collect(),
            Family::Tight { weights, .. } => (0..weights.len() as Key).collect(),
        };
        let mut f_max: f64 = 0.0;
        let mut f_min = f64::INFINITY;
        for k in keys {
            let v = self.raw_eval(&[k]).expect("known key");
            f_max = f_max.max(v);
            if v > 0.0 {
                f_min = f_min.min(v);
            }
        }
        (f_max, f_min)
    }

    /// A lower bound on every nonzero marginal `f(e | S)`, when one follows
    /// from the structure of the family.
    pub fn marginal_floor(&self) -> Option<f64> {
        let floor = match &self.family {
            Family::Linear(w) => w.values().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min),
            Family::Coverage(cov) if self.kind == OracleKind::Coverage => cov
                .sets
                .values()
                .flatten()
                .map(|&x| cov.elem_weights[x as usize])
                .filter(|&a| a > 0.0)
                .fold(f64::INFINITY, f64::min),
            _ => return None,
        };
        floor.is_finite().then_some(floor)
    }

    /// Exact smallest positive marginal `f(e | S)` over all `S ⊆ ground`.
    pub fn audit_f_min(&self, ground: &[Key], limit: usize) -> Result<Option<f64>, OracleError> {
        let values = subset_values(self, ground, limit)?;
        let mut best = f64::INFINITY;
        for mask in 0..values.len() {
            for (i, _) in ground.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    let gain = values[mask | (1 << i)] - values[mask];
                    if gain > crate::TOL {
                        best = best.min(gain);
                    }
                }
            }
        }
        Ok(best.is_finite().then_some(best))
    }

    pub fn new_state(&self) -> StreamState {
        let summary = match &self.family {
            Family::Linear(_) => Summary::Linear,
            Family::Coverage(cov) => Summary::Coverage { covered: vec![0; cov.elem_weights.len()] },
            Family::Tight { params, .. } => Summary::Tight { pair: vec![0.0; params.n + 1] },
        };
        StreamState { accepted: Vec::new(), present: HashSet::new(), value: 0.0, summary }
    }

    /// `f(e:S) = f(S ∪ {e}) - f(S)` where `state` holds `S`. One evaluation.
    pub fn stream_marginal(&self, state: &StreamState, key: Key) -> Result<f64, OracleError> {
        self.count(1);
        self.marginal_inner(state, key)
    }

    fn marginal_inner(&self, state: &StreamState, key: Key) -> Result<f64, OracleError> {
        if !self.contains_key(key) {
            return Err(OracleError::UnknownKey(key));
        }
        if state.present.contains(&key) {
            return Ok(0.0);
        }
        Ok(match (&self.family, &state.summary) {
            (Family::Linear(w), Summary::Linear) => w[&key],
            (Family::Coverage(cov), Summary::Coverage { covered }) => {
                let gained: f64 = cov.sets[&key]
                    .iter()
                    .filter(|&&x| covered[x as usize] == 0)
                    .map(|&x| cov.elem_weights[x as usize])
                    .sum();
                gained - cov.cost(key)
            }
            (Family::Tight { params, weights }, Summary::Tight { pair }) => {
                let n = params.n;
                match tight_slot(n, weights.len(), key)? {
                    TightSlot::Apex => weights[n],
                    TightSlot::Pair(i) => {
                        let cap = weights[n + i];
                        (pair[i] + weights[key as usize]).min(cap) - pair[i].min(cap)
                    }
                }
            }
            _ => unreachable!("state built by a different oracle family"),
        })
    }

    /// Appends `key` to the state and returns the marginal it contributed.
    pub fn push_accept(&self, state: &mut StreamState, key: Key) -> Result<f64, OracleError> {
        let gain = self.marginal_inner(state, key)?;
        state.accepted.push(key);
        if state.present.insert(key) {
            match (&self.family, &mut state.summary) {
                (Family::Coverage(cov), Summary::Coverage { covered }) => {
                    for &x in &cov.sets[&key] {
                        covered[x as usize] += 1;
                    }
                }
                (Family::Tight { params, weights }, Summary::Tight { pair }) => {
                    if let TightSlot::Pair(i) = tight_slot(params.n, weights.len(), key)? {
                        pair[i] += weights[key as usize];
                    }
                }
                _ => {}
            }
        }
        state.value += gain;
        Ok(gain)
    }

    /// Builds the state for `keys` in the given order, returning each key's
    /// stream marginal. Counts one evaluation per key.
    pub fn rebuild_state(&self, keys: &[Key]) -> Result<(StreamState, Vec<f64>), OracleError> {
        let mut state = self.new_state();
        let mut gains = Vec::with_capacity(keys.len());
        for &k in keys {
            gains.push(self.push_accept(&mut state, k)?);
        }
        self.count(keys.len() as u64);
        Ok((state, gains))
    }

    /// Text form accepted by [`parse_oracle`].
    pub fn to_spec_string(&self) -> String {
        let mut out = String::new();
        match &self.family {
            Family::Linear(w) => {
                out.push_str("oracle linear\n");
                let mut keys: Vec<_> = w.keys().copied().collect();
                keys.sort_unstable();
                for k in keys {
                    let _ = writeln!(out, "w {k} {}", w[&k]);
                }
            }
            Family::Coverage(cov) => {
                let _ = writeln!(out, "oracle {}", self.kind.name());
                let _ = writeln!(out, "universe {}", cov.elem_weights.len());
                for (i, &a) in cov.elem_weights.iter().enumerate() {
                    if a != 1.0 {
                        let _ = writeln!(out, "a {i} {a}");
                    }
                }
                let mut keys: Vec<_> = cov.sets.keys().copied().collect();
                keys.sort_unstable();
                for k in &keys {
                    let _ = write!(out, "set {k}");
                    for x in &cov.sets[k] {
                        let _ = write!(out, " {x}");
                    }
                    out.push('\n');
                }
                for k in &keys {
                    if let Some(c) = cov.costs.get(k) {
                        let _ = writeln!(out, "cost {k} {c}");
                    }
                }
            }
            Family::Tight { params, .. } => {
                let _ = writeln!(
                    out,
                    "oracle tight C {} n {} eps {} delta {}",
                    params.c, params.n, params.eps, params.delta
                );
            }
        }
        out
    }
}

impl SetFunction for Oracle {
    fn value(&self, keys: &[Key]) -> Result<f64, OracleError> {
        self.eval(keys)
    }
}

enum TightSlot {
    Apex,
    Pair(usize),
}

fn tight_slot(n: usize, len: usize, key: Key) -> Result<TightSlot, OracleError> {
    let k = key as usize;
    if k >= len {
        Err(OracleError::UnknownKey(key))
    } else if k < n {
        Ok(TightSlot::Pair(k + 1))
    } else if k == n {
        Ok(TightSlot::Apex)
    } else {
        Ok(TightSlot::Pair(k - n))
    }
}

#[derive(Clone, Debug)]
enum Summary {
    Linear,
    Coverage { covered: Vec<u32> },
    Tight { pair: Vec<f64> },
}

/// Accepted keys in arrival order plus a summary that makes marginals cheap.
#[derive(Clone, Debug)]
pub struct StreamState {
    accepted: Vec<Key>,
    present: HashSet<Key>,
    value: f64,
    summary: Summary,
}

impl StreamState {
    /// `f(S) - f(∅)` accumulated from pushes; equals `f(S)` for families
    /// with `f(∅) = 0`.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn accepted(&self) -> &[Key] {
        &self.accepted
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }
}

/// Parses an oracle spec document.
pub fn parse_oracle(text: &str) -> Result<Oracle, OracleError> {
    let err = |line: usize, message: String| OracleError::Parse { line, message };
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    });
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty oracle spec".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let num = |tok: &str, line: usize| -> Result<f64, OracleError> {
        tok.parse::<f64>().map_err(|_| err(line, format!("invalid number `{tok}`")))
    };
    let key = |tok: &str, line: usize| -> Result<Key, OracleError> {
        tok.parse::<Key>().map_err(|_| err(line, format!("invalid key `{tok}`")))
    };

    match tokens.as_slice() {
        ["oracle", "tight", "C", c, "n", n, "eps", eps, "delta", delta] => {
            let n = n.parse::<usize>().map_err(|_| err(hline, format!("invalid n `{n}`")))?;
            if let Some((line, extra)) = lines.next() {
                return Err(err(line, format!("unexpected line `{extra}` after tight header")));
            }
            Ok(Oracle::tight(num(c, hline)?, n, num(eps, hline)?, num(delta, hline)?)?.0)
        }
        ["oracle", "linear"] => {
            let mut weights = Vec::new();
            let mut seen = HashSet::new();
            for (line, l) in lines {
                match l.split_whitespace().collect::<Vec<_>>()[..] {
                    ["w", k, v] => {
                        let k = key(k, line)?;
                        if !seen.insert(k) {
                            return Err(err(line, format!("key {k} given twice")));
                        }
                        weights.push((k, num(v, line)?));
                    }
                    _ => return Err(err(line, format!("expected `w <key> <value>`, got `{l}`"))),
                }
            }
            Oracle::linear(weights)
        }
        ["oracle", kind @ ("coverage" | "covlin")] => {
            let mut universe = None;
            let mut elem_weights: Vec<(usize, f64, usize)> = Vec::new();
            let mut sets = Vec::new();
            let mut costs = Vec::new();
            for (line, l) in lines {
                let toks: Vec<&str> = l.split_whitespace().collect();
                match toks.as_slice() {
                    ["universe", n] if universe.is_none() => {
                        universe = Some(n.parse::<usize>().map_err(|_| err(line, format!("invalid universe size `{n}`")))?);
                    }
                    ["a", x, w] => {
                        let x = x.parse::<usize>().map_err(|_| err(line, format!("invalid element `{x}`")))?;
                        elem_weights.push((x, num(w, line)?, line));
                    }
                    ["set", k, elems @ ..] => {
                        let elems = elems
                            .iter()
                            .map(|t| t.parse::<u32>().map_err(|_| err(line, format!("invalid element `{t}`"))))
                            .collect::<Result<Vec<_>, _>>()?;
                        sets.push((key(k, line)?, elems));
                    }
                    ["cost", k, c] if *kind == "covlin" => costs.push((key(k, line)?, num(c, line)?)),
                    _ => return Err(err(line, format!("unexpected line `{l}` in {kind} block"))),
                }
            }
            let n = universe.ok_or_else(|| err(hline, "missing `universe <N>` line".into()))?;
            let mut weights = vec![1.0; n];
            for (x, w, line) in elem_weights {
                *weights.get_mut(x).ok_or_else(|| err(line, format!("element {x} outside universe")))? = w;
            }
            if *kind == "coverage" {
                Oracle::coverage(weights, sets)
            } else {
                Oracle::covlin(weights, sets, costs)
            }
        }
        _ => Err(err(hline, format!("unknown oracle header `{header}`"))),
    }
}

/// A violated diminishing-returns triple: `f_{S}(e) < f_{T}(e)` with `S ⊆ T`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmodularityWitness {
    pub smaller: Vec<Key>,
    pub larger: Vec<Key>,
    pub element: Key,
    pub gain_smaller: f64,
    pub gain_larger: f64,
}

/// Exhaustive diminishing-returns check over all subsets of `ground`.
///
/// Uses the local form `f_S(a) ≥ f_{S+b}(a)`, which is equivalent to the
/// general `S ⊆ T` statement.
pub fn verify_submodular<F: SetFunction + ?Sized>(
    f: &F,
    ground: &[Key],
    limit: usize,
) -> Result<Option<SubmodularityWitness>, OracleError> {
    let values = subset_values(f, ground, limit)?;
    let n = ground.len();
    let subset = |mask: usize| -> Vec<Key> { (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ground[i]).collect() };
    for mask in 0..values.len() {
        for a in 0..n {
            if mask & (1 << a) != 0 {
                continue;
            }
            let gain_small = values[mask | (1 << a)] - values[mask];
            for b in 0..n {
                if b == a || mask & (1 << b) != 0 {
                    continue;
                }
                let big = mask | (1 << b);
                let gain_big = values[big | (1 << a)] - values[big];
                if gain_small < gain_big - crate::TOL {
                    return Ok(Some(SubmodularityWitness {
                        smaller: subset(mask),
                        larger: subset(big),
                        element: ground[a],
                        gain_smaller: gain_small,
                        gain_larger: gain_big,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Exhaustive monotonicity check; returns a pair `(S, S+e)` with `f` dropping.
pub fn verify_monotone<F: SetFunction + ?Sized>(
    f: &F,
    ground: &[Key],
    limit: usize,
) -> Result<Option<(Vec<Key>, Key)>, OracleError> {
    let values = subset_values(f, ground, limit)?;
    let n = ground.len();
    for mask in 0..values.len() {
        for a in 0..n {
            if mask & (1 << a) == 0 && values[mask | (1 << a)] < values[mask] - crate::TOL {
                let s = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ground[i]).collect();
                return Ok(Some((s, ground[a])));
            }
        }
    }
    Ok(None)
}

fn subset_values<F: SetFunction + ?Sized>(f: &F, ground: &[Key], limit: usize) -> Result<Vec<f64>, OracleError> {
    if ground.len() > limit || ground.len() >= usize::BITS as usize {
        return Err(OracleError::GroundTooLarge { size: ground.len(), limit });
    }
    let mut values = Vec::with_capacity(1 << ground.len());
    let mut buf = Vec::with_capacity(ground.len());
    for mask in 0usize..(1 << ground.len()) {
        buf.clear();
        buf.extend((0..ground.len()).filter(|i| mask & (1 << i) != 0).map(|i| ground[i]));
        values.push(f.value(&buf)?);
    }
    Ok(values)
}
