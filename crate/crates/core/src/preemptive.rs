//! Preemptive matching: an arriving edge evicts its blockers when its
//! marginal beats `C` times their combined marginals.
//!
//! Only plain matchings (`b ≡ 1`) are supported. The weight `f(e':M)` of a
//! matched edge is its stream marginal against the earlier-arrived edges of
//! the current matching, so `f(M)` is the sum of matched weights.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::AlgoError;
use crate::instance::{BMatching, EdgeId, Instance};
use crate::oracle::{Oracle, StreamState};
use crate::streaming::Decision;
use crate::TOL;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PreemptiveParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub q: f64,
    pub seed: u64,
}

impl PreemptiveParams {
    pub fn new(c: f64, q: f64) -> Result<Self, AlgoError> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(AlgoError::InvalidParams(format!("C must exceed 1, got {c}")));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(AlgoError::InvalidParams(format!("q must lie in (0, 1], got {q}")));
        }
        Ok(Self { c, q, seed: 0 })
    }

    /// `C = 2`, `q = 1`.
    pub fn monotone() -> Self {
        Self::new(2.0, 1.0).unwrap()
    }

    /// `C = 1 + √6/2`, `q = 1/(2C + 1)`; minimises `(2C² + C)/(C - 1)`.
    pub fn nonmonotone() -> Self {
        let c = 1.0 + 6f64.sqrt() / 2.0;
        Self::new(c, 1.0 / (2.0 * c + 1.0)).unwrap()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// `2C + 2C/(C-1)`.
pub fn preemptive_factor(c: f64) -> f64 {
    2.0 * c + 2.0 * c / (c - 1.0)
}

/// `(2C² + C)/(C-1)`.
pub fn preemptive_nonmonotone_factor(c: f64) -> f64 {
    (2.0 * c * c + c) / (c - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreemptiveStep {
    pub edge: EdgeId,
    /// `f(e:M)`.
    pub gain: f64,
    /// `B(e)`.
    pub blocking: f64,
    pub decision: Decision,
    /// Evicted edges with their frozen weights.
    pub evicted: Vec<(EdgeId, f64)>,
    /// `f(e:S)` against the admitted set, for edges never admitted.
    pub admitted_marginal: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PreemptiveTrace {
    pub steps: Vec<PreemptiveStep>,
    /// `S`, in admission order.
    pub admitted: Vec<EdgeId>,
    /// `P` with frozen weights.
    pub preempted: Vec<(EdgeId, f64)>,
    /// `f(S)`.
    pub admitted_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreemptiveRecord {
    pub params: PreemptiveParams,
    pub matching: BMatching,
    /// `f(e:M)` aligned with `matching.edges()`.
    pub matching_weights: Vec<f64>,
    pub value: f64,
    pub admitted_count: usize,
    pub preempted_count: usize,
    pub peak_matching: usize,
    pub marginal_queries: u64,
    pub set_evaluations: u64,
    pub trace: Option<PreemptiveTrace>,
}

impl PreemptiveRecord {
    /// `φ_v / C = max{w_e : v ∈ e ∈ S}`.
    pub fn max_weights(&self, inst: &Instance) -> Result<Vec<f64>, AlgoError> {
        let trace = self.trace.as_ref().ok_or(AlgoError::NotCertified)?;
        let mut phi = vec![0.0f64; inst.num_vertices()];
        let all = self.matching.edges().iter().copied().zip(self.matching_weights.iter().copied());
        for (id, w) in all.chain(trace.preempted.iter().copied()) {
            for v in inst.edge(id).endpoints() {
                phi[v] = phi[v].max(w);
            }
        }
        Ok(phi)
    }
}

struct Current {
    members: Vec<EdgeId>,
    weight: HashMap<EdgeId, f64>,
    owner: Vec<Option<EdgeId>>,
    state: StreamState,
}

/// One pass of the preemptive algorithm.
pub fn run_preemptive(
    inst: &Instance,
    oracle: &Oracle,
    params: PreemptiveParams,
    certify: bool,
) -> Result<PreemptiveRecord, AlgoError> {
    PreemptiveParams::new(params.c, params.q)?;
    if !inst.is_matching_instance() {
        return Err(AlgoError::Unsupported("preemptive matching requires b ≡ 1".into()));
    }
    oracle.check_covers(inst)?;
    let evals_at_start = oracle.evaluations();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cur = Current {
        members: Vec::new(),
        weight: HashMap::new(),
        owner: vec![None; inst.num_vertices()],
        state: oracle.new_state(),
    };
    let mut trace = certify.then(PreemptiveTrace::default);
    let mut admitted_state = certify.then(|| oracle.new_state());
    let mut admitted_count = 0;
    let mut preempted_count = 0;
    let mut peak = 0;
    let mut marginal_queries = 0;
    let mut certify_evals = 0;

    for id in inst.edge_ids() {
        let e = *inst.edge(id);
        let g = oracle.stream_marginal(&cur.state, e.key)?;
        marginal_queries += 1;
        let mut blockers: Vec<EdgeId> = e.endpoints().iter().filter_map(|&v| cur.owner[v]).collect();
        blockers.dedup();
        let blocking: f64 = blockers.iter().map(|b| cur.weight[b]).sum();

        let decision = if g <= params.c * blocking + TOL {
            Decision::Skipped
        } else if rng.gen::<f64>() < params.q {
            Decision::Pushed
        } else {
            Decision::SampledOut
        };

        let mut evicted = Vec::new();
        if decision == Decision::Pushed {
            evicted = blockers.iter().map(|&b| (b, cur.weight[&b])).collect();
            admit(inst, oracle, &mut cur, id, &blockers)?;
            admitted_count += 1;
            preempted_count += blockers.len();
            peak = peak.max(cur.members.len());
        }

        if let Some(trace) = &mut trace {
            let st = admitted_state.as_mut().expect("certify mode");
            let admitted_marginal = if decision == Decision::Pushed {
                oracle.push_accept(st, e.key)?;
                trace.admitted.push(id);
                trace.preempted.extend(evicted.iter().copied());
                None
            } else {
                certify_evals += 1;
                Some(oracle.stream_marginal(st, e.key)?)
            };
            trace.steps.push(PreemptiveStep { edge: id, gain: g, blocking, decision, evicted, admitted_marginal });
        }
    }

    let set_evaluations = oracle.evaluations() - evals_at_start - certify_evals;
    if let (Some(trace), Some(st)) = (&mut trace, &admitted_state) {
        trace.admitted_value = st.value();
    }
    let matching = BMatching::from_edges(inst, cur.members.iter().copied())?;
    let matching_weights = matching.edges().iter().map(|id| cur.weight[id]).collect();
    Ok(PreemptiveRecord {
        params,
        value: cur.state.value(),
        matching,
        matching_weights,
        admitted_count,
        preempted_count,
        peak_matching: peak,
        marginal_queries,
        set_evaluations,
        trace,
    })
}

fn admit(inst: &Instance, oracle: &Oracle, cur: &mut Current, id: EdgeId, evict: &[EdgeId]) -> Result<(), AlgoError> {
    if !evict.is_empty() {
        cur.members.retain(|m| !evict.contains(m));
        for b in evict {
            cur.weight.remove(b);
            for v in inst.edge(*b).endpoints() {
                cur.owner[v] = None;
            }
        }
        // Removing earlier edges raises the marginals of the later ones.
        let keys = inst.keys_of(&cur.members);
        let (state, gains) = oracle.rebuild_state(&keys)?;
        cur.state = state;
        for (m, g) in cur.members.iter().zip(gains) {
            cur.weight.insert(*m, g);
        }
    }
    let e = inst.edge(id);
    let gain = oracle.push_accept(&mut cur.state, e.key)?;
    cur.members.push(id);
    cur.weight.insert(id, gain);
    for v in e.endpoints() {
        cur.owner[v] = Some(id);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Edge;

    fn path3(w: [f64; 2]) -> (Instance, Oracle) {
        let inst = Instance::uniform(3, 1, vec![Edge { u: 0, v: 1, key: 0 }, Edge { u: 1, v: 2, key: 1 }]).unwrap();
        (inst, Oracle::linear([(0, w[0]), (1, w[1])]).unwrap())
    }

    #[test]
    fn presets() {
        let m = PreemptiveParams::monotone();
        assert_eq!((m.c, m.q), (2.0, 1.0));
        assert_eq!(preemptive_factor(2.0), 8.0);
        let n = PreemptiveParams::nonmonotone();
        assert!((preemptive_nonmonotone_factor(n.c) - (5.0 + 2.0 * 6f64.sqrt())).abs() < 1e-9);
        assert!((n.q - 1.0 / (2.0 * n.c + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn eviction_threshold() {
        let (inst, o) = path3([3.0, 7.0]);
        let r = run_preemptive(&inst, &o, PreemptiveParams::monotone(), true).unwrap();
        assert_eq!(r.matching.edges(), &[EdgeId(1)]);
        let t = r.trace.unwrap();
        assert_eq!(t.preempted, vec![(EdgeId(0), 3.0)]);
        assert_eq!(t.steps[1].blocking, 3.0);

        let (inst, o) = path3([3.0, 6.0]);
        let r = run_preemptive(&inst, &o, PreemptiveParams::monotone(), true).unwrap();
        assert_eq!(r.matching.edges(), &[EdgeId(0)]);
        assert_eq!(r.trace.unwrap().steps[1].decision, Decision::Skipped);
    }

    #[test]
    fn first_edge_admitted() {
        let inst = Instance::uniform(2, 1, vec![Edge { u: 0, v: 1, key: 0 }]).unwrap();
        let o = Oracle::linear([(0, 5.0)]).unwrap();
        let r = run_preemptive(&inst, &o, PreemptiveParams::monotone(), true).unwrap();
        assert_eq!(r.value, 5.0);
        assert!(r.trace.unwrap().steps[0].evicted.is_empty());
    }

    #[test]
    fn empty_stream_and_capacity_check() {
        let inst = Instance::uniform(2, 1, vec![]).unwrap();
        let o = Oracle::linear([]).unwrap();
        assert!(run_preemptive(&inst, &o, PreemptiveParams::monotone(), false).unwrap().matching.is_empty());
        let inst = Instance::uniform(2, 2, vec![]).unwrap();
        assert!(matches!(
            run_preemptive(&inst, &o, PreemptiveParams::monotone(), false),
            Err(AlgoError::Unsupported(_))
        ));
    }

    #[test]
    fn eviction_raises_later_marginals() {
        // a-b (key 0) and c-d (key 1) overlap in coverage; (b,e) evicts a-b,
        // so c-d regains the shared element.
        let inst = Instance::uniform(
            5,
            1,
            vec![Edge { u: 0, v: 1, key: 0 }, Edge { u: 2, v: 3, key: 1 }, Edge { u: 1, v: 4, key: 2 }],
        )
        .unwrap();
        let o = Oracle::coverage(vec![1.0; 4], [(0, vec![0]), (1, vec![0, 1]), (2, vec![2, 3])]).unwrap();
        let r = run_preemptive(&inst, &o, PreemptiveParams::new(1.5, 1.0).unwrap(), true).unwrap();
        assert_eq!(r.matching.edges(), &[EdgeId(1), EdgeId(2)]);
        assert_eq!(r.matching_weights, vec![2.0, 2.0]);
        assert_eq!(r.value, 4.0);
        assert_eq!(r.max_weights(&inst).unwrap()[0], 1.0);
    }
}
