//! Maximum-weight b-matching: the stack pass with `C = 1 + ε/2`, then an
//! exact b-matching on the stack subgraph.
//!
//! Weights are per edge position, so parallel edges are independent items
//! even when they share an oracle key.

use crate::error::AlgoError;
use crate::instance::{BMatching, Edge, EdgeId, Instance};
use crate::oracle::Oracle;
use crate::streaming::{unwind, AlgoParams, StackPhase, StackRunner};
use crate::TOL;

/// Default edge limit for [`exact_mwbm`].
pub const EXACT_LIMIT: usize = 24;

/// Output of the stack pass under linear weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedStack {
    pub eps: f64,
    pub phase: StackPhase,
    /// `w_e` for every edge of the instance, by position.
    pub weights: Vec<f64>,
}

impl WeightedStack {
    pub fn c(&self) -> f64 {
        self.phase.params.c
    }

    pub fn stack_edges(&self) -> Vec<EdgeId> {
        self.phase.stack.iter().map(|s| s.edge).collect()
    }

    /// `Σ_v b_v·φ_v` with `φ_v = C·φ_v^(|E|)`.
    pub fn dual_cost(&self, inst: &Instance) -> f64 {
        let c = self.c();
        self.phase.potentials.iter().enumerate().map(|(v, p)| c * p * inst.capacity(v) as f64).sum()
    }
}

/// Per-position weights read from a linear oracle.
pub fn linear_weights(inst: &Instance, oracle: &Oracle) -> Result<Vec<f64>, AlgoError> {
    inst.edges().iter().map(|e| Ok(oracle.linear_weight(e.key)?)).collect()
}

/// Runs the stack pass with `C = 1 + ε/2`, `q = 1`, stopping before the unwind.
pub fn run_stack_phase(inst: &Instance, weights: &[f64], eps: f64, certify: bool) -> Result<WeightedStack, AlgoError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AlgoError::InvalidParams(format!("eps must be positive, got {eps}")));
    }
    if weights.len() != inst.num_edges() {
        return Err(AlgoError::InvalidParams(format!(
            "{} weights given for {} edges",
            weights.len(),
            inst.num_edges()
        )));
    }
    let rekeyed = inst.rekeyed_by_position();
    let oracle = Oracle::linear(weights.iter().enumerate().map(|(i, &w)| (i as u64, w)))?;
    let params = AlgoParams::new(1.0 + eps / 2.0, 1.0)?;
    let mut runner = StackRunner::new(&rekeyed, &oracle, params, certify)?;
    while runner.arrival_step()?.is_some() {}
    Ok(WeightedStack { eps, phase: runner.into_phase(), weights: weights.to_vec() })
}

/// Maximum-weight feasible b-matching over `candidates` by branch and bound.
///
/// Edges are branched in decreasing weight order; a branch is cut when its
/// value plus all remaining positive weight cannot beat the incumbent.
pub fn exact_mwbm(
    inst: &Instance,
    candidates: &[EdgeId],
    weights: &[f64],
    limit: usize,
) -> Result<(BMatching, f64), AlgoError> {
    if candidates.len() > limit {
        return Err(AlgoError::TooLarge { size: candidates.len(), limit });
    }
    let mut order: Vec<(EdgeId, f64)> =
        candidates.iter().map(|&id| (id, weights[id.0])).filter(|&(_, w)| w > 0.0).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut suffix = vec![0.0; order.len() + 1];
    for i in (0..order.len()).rev() {
        suffix[i] = suffix[i + 1] + order[i].1;
    }

    struct Search<'a> {
        inst: &'a Instance,
        order: &'a [(EdgeId, f64)],
        suffix: &'a [f64],
        degree: Vec<u32>,
        chosen: Vec<EdgeId>,
        best: f64,
        best_set: Vec<EdgeId>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, value: f64) {
            if value > self.best + TOL {
                self.best = value;
                self.best_set = self.chosen.clone();
            }
            if i == self.order.len() || value + self.suffix[i] <= self.best + TOL {
                return;
            }
            let (id, w) = self.order[i];
            let Edge { u, v, .. } = *self.inst.edge(id);
            if self.degree[u] < self.inst.capacity(u) && self.degree[v] < self.inst.capacity(v) {
                self.degree[u] += 1;
                self.degree[v] += 1;
                self.chosen.push(id);
                self.go(i + 1, value + w);
                self.chosen.pop();
                self.degree[u] -= 1;
                self.degree[v] -= 1;
            }
            self.go(i + 1, value);
        }
    }

    let mut search = Search {
        inst,
        order: &order,
        suffix: &suffix,
        degree: vec![0; inst.num_vertices()],
        chosen: Vec::new(),
        best: 0.0,
        best_set: Vec::new(),
    };
    search.go(0, 0.0);
    let value = search.best_set.iter().map(|id| weights[id.0]).sum();
    Ok((BMatching::from_edges(inst, search.best_set)?, value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MwbmOutcome {
    pub stack: WeightedStack,
    pub matching: BMatching,
    /// `w(M)`.
    pub value: f64,
    /// `w` of the greedy unwind of the same stack.
    pub unwind_value: f64,
    /// False when the stack exceeded the exact limit and the unwind was used.
    pub exact: bool,
}

/// Stack pass followed by an exact b-matching on the stack; falls back to
/// the greedy unwind when the stack exceeds `exact_limit`.
pub fn run_mwbm(
    inst: &Instance,
    weights: &[f64],
    eps: f64,
    exact_limit: usize,
    certify: bool,
) -> Result<MwbmOutcome, AlgoError> {
    let stack = run_stack_phase(inst, weights, eps, certify)?;
    let greedy = unwind(inst, &stack.phase.stack);
    let unwind_value: f64 = greedy.edges().iter().map(|id| weights[id.0]).sum();
    let (matching, value, exact) = match exact_mwbm(inst, &stack.stack_edges(), weights, exact_limit) {
        Ok((m, v)) => (m, v, true),
        Err(AlgoError::TooLarge { .. }) => (greedy, unwind_value, false),
        Err(e) => return Err(e),
    };
    Ok(MwbmOutcome { stack, matching, value, unwind_value, exact })
}
