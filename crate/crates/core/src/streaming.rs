//! The primal-dual stack algorithm.
//!
//! Each arriving edge `e = (u, v)` is compared against its endpoints'
//! potentials. If its stream marginal `g = f(e:S)` beats `C·(φ_u + φ_v)` the
//! edge is pushed (with probability `q`) and the surplus `g - φ_u - φ_v` is
//! split as `b_u·w_eu = b_v·w_ev`. After the pass the stack is unwound in
//! reverse order into a b-matching.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::AlgoError;
use crate::instance::{BMatching, EdgeId, Instance, VertexId};
use crate::oracle::{Oracle, StreamState};
use crate::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SkipRule {
    /// Skip when `C·Σφ ≥ g`.
    Nonstrict,
    /// Skip when `C·Σφ > g`; ties are pushed.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlgoParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub q: f64,
    pub skip_rule: SkipRule,
    pub seed: u64,
}

impl AlgoParams {
    pub fn new(c: f64, q: f64) -> Result<Self, AlgoError> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(AlgoError::InvalidParams(format!("C must exceed 1, got {c}")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(AlgoError::InvalidParams(format!("q must lie in (0, 1], got {q}")));
        }
        Ok(Self { c, q, skip_rule: SkipRule::Nonstrict, seed: 0 })
    }

    /// `C = 1 + 1/√2`, `q = 1`.
    pub fn monotone() -> Self {
        Self::new(1.0 + std::f64::consts::FRAC_1_SQRT_2, 1.0).unwrap()
    }

    /// `C = 1 + √3/2`, `q = 1/(2C + 1)`.
    pub fn nonmonotone() -> Self {
        let c = 1.0 + 3f64.sqrt() / 2.0;
        Self::new(c, 1.0 / (2.0 * c + 1.0)).unwrap()
    }

    /// `C = 1 + ε`, `q = 1`.
    pub fn mwm_linear(eps: f64) -> Result<Self, AlgoError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(AlgoError::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        Self::new(1.0 + eps, 1.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_skip_rule(mut self, rule: SkipRule) -> Self {
        self.skip_rule = rule;
        self
    }

    pub fn is_deterministic(&self) -> bool {
        self.q >= 1.0
    }

    fn skips(&self, potential_sum: f64, gain: f64) -> bool {
        match self.skip_rule {
            SkipRule::Nonstrict => self.c * potential_sum >= gain - TOL,
            SkipRule::Strict => self.c * potential_sum > gain + TOL,
        }
    }
}

/// `2C + C/(C-1)`: approximation factor of the deterministic stack algorithm.
pub fn stack_factor(c: f64) -> f64 {
    2.0 * c + c / (c - 1.0)
}

/// `(4C² - 1)/(2C - 2)`: the stack factor divided by `1 - q` at `q = 1/(2C+1)`.
pub fn nonmonotone_factor(c: f64) -> f64 {
    (4.0 * c * c - 1.0) / (2.0 * c - 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StackEntry {
    pub edge: EdgeId,
    /// `f(e:S)` at push time.
    pub gain: f64,
    /// `w_eu, w_ev`, aligned with `Edge::endpoints`.
    pub increments: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Skipped,
    Pushed,
    SampledOut,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArrivalRecord {
    pub edge: EdgeId,
    pub gain: f64,
    /// `Σ_{x∈e} φ_x^(t-1)`.
    pub potential_sum: f64,
    pub decision: Decision,
}

/// Full per-arrival history kept in certify mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trace {
    pub arrivals: Vec<ArrivalRecord>,
    /// Per vertex: `(t, φ_v^(t))` at every arrival that changed `φ_v`.
    pub trajectories: Vec<Vec<(usize, f64)>>,
}

impl Trace {
    /// `φ_v^(t)`.
    pub fn potential_at(&self, v: VertexId, t: usize) -> f64 {
        let traj = &self.trajectories[v];
        match traj.partition_point(|&(s, _)| s <= t) {
            0 => 0.0,
            i => traj[i - 1].1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Counters {
    pub marginal_queries: u64,
    pub set_evaluations: u64,
    pub peak_stack: usize,
    /// Stack entries plus nonzero potentials, maximised over the pass.
    pub peak_memory_proxy: usize,
    /// Number of stack edges at each vertex.
    pub incidence: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub params: AlgoParams,
    pub stack: Vec<StackEntry>,
    /// `φ_v^(|E|)`.
    pub potentials: Vec<f64>,
    pub matching: BMatching,
    /// `f(M)`.
    pub value: f64,
    /// `f(S)`.
    pub stack_value: f64,
    pub counters: Counters,
    pub trace: Option<Trace>,
}

impl RunRecord {
    pub fn stack_edges(&self) -> Vec<EdgeId> {
        self.stack.iter().map(|s| s.edge).collect()
    }

    /// `Σ_{e∈S} Σ_{v∈e} b_v·w_ev`.
    pub fn weighted_increment_sum(&self, inst: &Instance) -> f64 {
        self.stack
            .iter()
            .map(|s| {
                let e = inst.edge(s.edge);
                s.increments[0] * inst.capacity(e.u) as f64 + s.increments[1] * inst.capacity(e.v) as f64
            })
            .sum()
    }

    /// `Σ_v b_v·φ_v^(|E|)`.
    pub fn weighted_potential_sum(&self, inst: &Instance) -> f64 {
        self.potentials.iter().enumerate().map(|(v, p)| inst.capacity(v) as f64 * p).sum()
    }
}

/// State left after the pass, before the unwind.
#[derive(Clone, Debug, PartialEq)]
pub struct StackPhase {
    pub params: AlgoParams,
    pub stack: Vec<StackEntry>,
    /// `φ_v^(|E|)`.
    pub potentials: Vec<f64>,
    /// `f(S)`.
    pub stack_value: f64,
    pub counters: Counters,
    pub trace: Option<Trace>,
}

/// Drives the stack algorithm one arrival at a time.
pub struct StackRunner<'a> {
    inst: &'a Instance,
    oracle: &'a Oracle,
    params: AlgoParams,
    rng: ChaCha8Rng,
    state: StreamState,
    potentials: HashMap<VertexId, f64>,
    stack: Vec<StackEntry>,
    next: usize,
    counters: Counters,
    evals_at_start: u64,
    trace: Option<Trace>,
}

impl<'a> StackRunner<'a> {
    pub fn new(inst: &'a Instance, oracle: &'a Oracle, params: AlgoParams, certify: bool) -> Result<Self, AlgoError> {
        AlgoParams::new(params.c, params.q)?;
        oracle.check_covers(inst)?;
        let trace = certify.then(|| Trace {
            arrivals: Vec::with_capacity(inst.num_edges()),
            trajectories: vec![Vec::new(); inst.num_vertices()],
        });
        Ok(Self {
            inst,
            oracle,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            state: oracle.new_state(),
            potentials: HashMap::new(),
            stack: Vec::new(),
            next: 0,
            counters: Counters { incidence: vec![0; inst.num_vertices()], ..Counters::default() },
            evals_at_start: oracle.evaluations(),
            trace,
        })
    }

    fn potential(&self, v: VertexId) -> f64 {
        self.potentials.get(&v).copied().unwrap_or(0.0)
    }

    /// Processes the next edge of the stream; `None` once it is exhausted.
    pub fn arrival_step(&mut self) -> Result<Option<(EdgeId, Decision)>, AlgoError> {
        if self.next == self.inst.num_edges() {
            return Ok(None);
        }
        let id = EdgeId(self.next);
        self.next += 1;
        let e = *self.inst.edge(id);
        let g = self.oracle.stream_marginal(&self.state, e.key)?;
        self.counters.marginal_queries += 1;
        let psum = self.potential(e.u) + self.potential(e.v);

        let decision = if self.params.skips(psum, g) {
            Decision::Skipped
        } else if self.rng.gen::<f64>() < self.params.q {
            let surplus = (g - psum).max(0.0);
            let mut increments = [0.0; 2];
            for (slot, v) in e.endpoints().into_iter().enumerate() {
                let w = surplus / self.inst.capacity(v) as f64;
                increments[slot] = w;
                if w > 0.0 {
                    *self.potentials.entry(v).or_insert(0.0) += w;
                }
                self.counters.incidence[v] += 1;
            }
            self.oracle.push_accept(&mut self.state, e.key)?;
            self.stack.push(StackEntry { edge: id, gain: g, increments });
            Decision::Pushed
        } else {
            Decision::SampledOut
        };

        self.counters.peak_stack = self.counters.peak_stack.max(self.stack.len());
        self.counters.peak_memory_proxy =
            self.counters.peak_memory_proxy.max(self.stack.len() + self.potentials.len());
        if let Some(trace) = &mut self.trace {
            trace.arrivals.push(ArrivalRecord { edge: id, gain: g, potential_sum: psum, decision });
            if decision == Decision::Pushed {
                for v in e.endpoints() {
                    let p = self.potentials.get(&v).copied().unwrap_or(0.0);
                    trace.trajectories[v].push((id.arrival(), p));
                }
            }
        }
        Ok(Some((id, decision)))
    }

    /// Ends the pass without unwinding.
    pub fn into_phase(mut self) -> StackPhase {
        self.counters.set_evaluations = self.oracle.evaluations() - self.evals_at_start;
        let mut potentials = vec![0.0; self.inst.num_vertices()];
        for (&v, &p) in &self.potentials {
            potentials[v] = p;
        }
        StackPhase {
            params: self.params,
            stack: self.stack,
            potentials,
            stack_value: self.state.value(),
            counters: self.counters,
            trace: self.trace,
        }
    }

    /// Unwinds the stack and evaluates the output.
    pub fn finish(self) -> Result<RunRecord, AlgoError> {
        let (inst, oracle) = (self.inst, self.oracle);
        let phase = self.into_phase();
        let matching = unwind(inst, &phase.stack);
        let value = oracle.eval_edges(inst, matching.edges())?;
        Ok(RunRecord {
            params: phase.params,
            stack: phase.stack,
            potentials: phase.potentials,
            matching,
            value,
            stack_value: phase.stack_value,
            counters: phase.counters,
            trace: phase.trace,
        })
    }
}

/// One pass over the stream followed by the unwind.
///
/// `certify` keeps the per-arrival history needed for dual certificates;
/// memory is then linear in the stream length.
pub fn run(inst: &Instance, oracle: &Oracle, params: AlgoParams, certify: bool) -> Result<RunRecord, AlgoError> {
    let mut runner = StackRunner::new(inst, oracle, params, certify)?;
    while runner.arrival_step()?.is_some() {}
    runner.finish()
}

/// Pops the stack in reverse and keeps every edge whose endpoints both have
/// residual capacity.
pub fn unwind(inst: &Instance, stack: &[StackEntry]) -> BMatching {
    let mut m = BMatching::empty(inst.num_vertices());
    for entry in stack.iter().rev() {
        if m.can_add(inst, entry.edge) {
            m.insert(inst, entry.edge).expect("checked by can_add");
        }
    }
    m
}

/// Measured resource use of a certify-off run against the explicit bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResourceAudit {
    pub f_max: f64,
    pub f_min: f64,
    /// Vertices whose stack incidence exceeds the per-vertex bound, with
    /// `(vertex, incidence, bound)`.
    pub incidence_violations: Vec<(VertexId, u32, f64)>,
    /// Largest `incidence / bound` over vertices with nonzero incidence.
    pub worst_incidence_ratio: f64,
    pub stack_size: usize,
    /// `|G| + Σ_{u saturated by G} min(deg(u), bound_u)`, `G` the greedy
    /// maximal b-matching.
    pub stack_bound: f64,
    pub greedy_size: usize,
    pub peak_memory_proxy: usize,
    pub memory_bound: f64,
    /// `peak_memory_proxy / (|G| · max(1, ln(f_max/f_min)))`.
    pub memory_constant: f64,
    pub marginal_queries: u64,
    pub set_evaluations: u64,
    pub arrivals: usize,
}

impl ResourceAudit {
    pub fn passes(&self) -> bool {
        self.incidence_violations.is_empty()
            && self.stack_size as f64 <= self.stack_bound + TOL
            && self.peak_memory_proxy as f64 <= self.memory_bound + TOL
            && self.marginal_queries == self.arrivals as u64
            && self.set_evaluations <= 2 * self.arrivals as u64
    }
}

/// `1 + (ln(b·f_max/f_min) + ln((1+ε)/ε)) / ln(1 + ε/b)`, `ε = C - 1`.
///
/// Bounds the number of stack edges at a vertex of capacity `b`: a vertex's
/// potential starts at no less than `ε·f_min/((1+ε)·b)`, grows by a factor
/// `1 + ε/b` per push and never exceeds `f_max`.
pub fn incidence_bound(c: f64, b: u32, f_max: f64, f_min: f64) -> f64 {
    let eps = c - 1.0;
    let b = b as f64;
    1.0 + ((b * f_max / f_min).ln() + ((1.0 + eps) / eps).ln()) / (1.0 + eps / b).ln()
}

/// Checks a monotone, nonstrict run against the stack-size and call-count
/// contracts. `f_min` must lower-bound every nonzero stream marginal.
pub fn audit_resources(inst: &Instance, record: &RunRecord, f_max: f64, f_min: f64) -> ResourceAudit {
    let c = record.params.c;
    let eps = c - 1.0;
    let bound = |v: VertexId| incidence_bound(c, inst.capacity(v), f_max, f_min);

    let mut violations = Vec::new();
    let mut worst: f64 = 0.0;
    for (v, &k) in record.counters.incidence.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let kb = bound(v);
        worst = worst.max(k as f64 / kb);
        if k as f64 > kb + TOL {
            violations.push((v, k, kb));
        }
    }

    let greedy = crate::instance::greedy_maximal(inst);
    let degrees = inst.degrees();
    let saturated: Vec<VertexId> =
        (0..inst.num_vertices()).filter(|&v| greedy.degree(v) == inst.capacity(v)).collect();
    let stack_bound = greedy.len() as f64
        + saturated.iter().map(|&u| (degrees[u] as f64).min(bound(u).floor())).sum::<f64>();

    // Every stack edge outside G has a G-saturated endpoint; nonzero
    // potentials sit on stack-edge endpoints.
    let g = greedy.len() as f64;
    let lambda = (0..inst.num_vertices())
        .map(|v| (inst.capacity(v) as f64 * f_max * (1.0 + eps) / (eps * f_min)).ln())
        .fold(0.0, f64::max);
    let memory_bound = 9.0 * g * (1.0 + lambda * (1.0 + eps) / eps);
    let log_range = (f_max / f_min).ln().max(1.0);

    ResourceAudit {
        f_max,
        f_min,
        incidence_violations: violations,
        worst_incidence_ratio: worst,
        stack_size: record.stack.len(),
        stack_bound,
        greedy_size: greedy.len(),
        peak_memory_proxy: record.counters.peak_memory_proxy,
        memory_bound,
        memory_constant: if g > 0.0 { record.counters.peak_memory_proxy as f64 / (g * log_range) } else { 0.0 },
        marginal_queries: record.counters.marginal_queries,
        set_evaluations: record.counters.set_evaluations,
        arrivals: inst.num_edges(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Edge;

    fn path(b: Vec<u32>, edges: &[(usize, usize)]) -> Instance {
        let edges = edges.iter().enumerate().map(|(i, &(u, v))| Edge { u, v, key: i as u64 }).collect();
        Instance::new(b, edges).unwrap()
    }

    fn params(c: f64) -> AlgoParams {
        AlgoParams::new(c, 1.0).unwrap()
    }

    #[test]
    fn presets() {
        let m = AlgoParams::monotone();
        assert!((m.c - 1.707_106_781_186_547_6).abs() < 1e-12);
        assert_eq!(m.q, 1.0);
        assert!((stack_factor(m.c) - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9);
        let n = AlgoParams::nonmonotone();
        assert!((n.c - 1.866_025_403_784_438_6).abs() < 1e-12);
        assert!((n.q - 0.211_324_865_405_187_1).abs() < 1e-9);
        assert!((nonmonotone_factor(n.c) - (4.0 + 2.0 * 3f64.sqrt())).abs() < 1e-9);
        assert_eq!(AlgoParams::mwm_linear(0.1).unwrap().c, 1.1);
        assert_eq!(stack_factor(2.0), 6.0);
        assert!(AlgoParams::new(1.0, 1.0).is_err());
        assert!(AlgoParams::new(2.0, 0.0).is_err());
        assert!(AlgoParams::mwm_linear(0.0).is_err());
    }

    #[test]
    fn first_edge_is_pushed() {
        let inst = path(vec![1, 1], &[(0, 1)]);
        let o = Oracle::linear([(0, 5.0)]).unwrap();
        let r = run(&inst, &o, params(2.0), true).unwrap();
        assert_eq!(r.stack[0].increments, [5.0, 5.0]);
        assert_eq!(r.potentials, vec![5.0, 5.0]);
        assert_eq!(r.value, 5.0);
    }

    #[test]
    fn skip_rule_ties() {
        // path a-b-c, weights 1 then 1.5, C = 1.5: g = 1.5 = C·1
        let inst = path(vec![1; 3], &[(0, 1), (1, 2)]);
        let o = Oracle::linear([(0, 1.0), (1, 1.5)]).unwrap();
        let r = run(&inst, &o, params(1.5), true).unwrap();
        assert_eq!(r.stack.len(), 1);
        let r = run(&inst, &o, params(1.5).with_skip_rule(SkipRule::Strict), true).unwrap();
        assert_eq!(r.stack.len(), 2);
        assert!((r.stack[1].increments[0] - 0.5).abs() < TOL);
    }

    #[test]
    fn unwind_examples() {
        let inst = path(vec![1; 3], &[(0, 1), (1, 2)]);
        let stack: Vec<StackEntry> =
            (0..2).map(|i| StackEntry { edge: EdgeId(i), gain: 1.0, increments: [0.0; 2] }).collect();
        assert_eq!(unwind(&inst, &stack).edges(), &[EdgeId(1)]);
        let inst = path(vec![1, 2, 1], &[(0, 1), (1, 2)]);
        assert_eq!(unwind(&inst, &stack).edges(), &[EdgeId(0), EdgeId(1)]);
    }

    #[test]
    fn capacity_splits_the_surplus() {
        let inst = path(vec![1, 4], &[(0, 1)]);
        let o = Oracle::linear([(0, 8.0)]).unwrap();
        let r = run(&inst, &o, params(2.0), false).unwrap();
        assert_eq!(r.stack[0].increments, [8.0, 2.0]);
        assert_eq!(r.weighted_increment_sum(&inst), 16.0);
        assert!(r.trace.is_none());
    }

    #[test]
    fn empty_stream() {
        let inst = Instance::uniform(2, 1, vec![]).unwrap();
        let o = Oracle::linear([]).unwrap();
        let r = run(&inst, &o, params(2.0), true).unwrap();
        assert!(r.matching.is_empty());
        assert_eq!(r.value, 0.0);
        assert_eq!(r.counters.marginal_queries, 0);
    }

    #[test]
    fn sampling_is_seeded() {
        let inst = path(vec![1; 7], &[(0, 1), (2, 3), (4, 5), (5, 6), (1, 2)]);
        let o = Oracle::linear((0..5).map(|k| (k, 1.0 + k as f64))).unwrap();
        let p = AlgoParams::new(1.5, 0.5).unwrap().with_seed(11);
        let a = run(&inst, &o, p, true).unwrap();
        let b = run(&inst, &o, p, true).unwrap();
        assert_eq!(a, b);
        let sampled_out = (0..64)
            .map(|s| run(&inst, &o, p.with_seed(s), true).unwrap())
            .flat_map(|r| r.trace.unwrap().arrivals)
            .filter(|a| a.decision == Decision::SampledOut)
            .count();
        assert!(sampled_out > 0);
    }

    #[test]
    fn trajectory_lookup() {
        let inst = path(vec![1; 3], &[(0, 1), (1, 2)]);
        let o = Oracle::linear([(0, 1.0), (1, 3.0)]).unwrap();
        let r = run(&inst, &o, params(1.5), true).unwrap();
        let t = r.trace.unwrap();
        assert_eq!(t.potential_at(1, 0), 0.0);
        assert_eq!(t.potential_at(1, 1), 1.0);
        assert_eq!(t.potential_at(1, 2), 3.0);
        assert_eq!(t.potential_at(2, 1), 0.0);
    }

    #[test]
    fn incidence_bound_grows_with_capacity() {
        assert!(incidence_bound(1.5, 1, 4.0, 1.0) < incidence_bound(1.5, 3, 4.0, 1.0));
        assert!(incidence_bound(1.5, 1, 4.0, 1.0) > 1.0);
    }
}
