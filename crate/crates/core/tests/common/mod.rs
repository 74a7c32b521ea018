#![allow(dead_code)]

use msbm_core::generators::{generate, Capacities, GenSpec, Generated, RandomSpec};
use msbm_core::instance::{EdgeId, Instance};
use msbm_core::oracle::Oracle;

/// Depth-first enumeration of every feasible b-matching; returns the best
/// value and one maximizer. Independent of the library's search.
pub fn naive_opt(inst: &Instance, value: &dyn Fn(&[EdgeId]) -> f64) -> (f64, Vec<EdgeId>) {
    fn go(
        inst: &Instance,
        value: &dyn Fn(&[EdgeId]) -> f64,
        i: usize,
        deg: &mut [u32],
        chosen: &mut Vec<EdgeId>,
        best: &mut (f64, Vec<EdgeId>),
    ) {
        if i == inst.num_edges() {
            let v = value(chosen);
            if v > best.0 {
                *best = (v, chosen.clone());
            }
            return;
        }
        go(inst, value, i + 1, deg, chosen, best);
        let e = inst.edges()[i];
        if deg[e.u] < inst.capacity(e.u) && deg[e.v] < inst.capacity(e.v) {
            deg[e.u] += 1;
            deg[e.v] += 1;
            chosen.push(EdgeId(i));
            go(inst, value, i + 1, deg, chosen, best);
            chosen.pop();
            deg[e.u] -= 1;
            deg[e.v] -= 1;
        }
    }
    let mut best = (0.0, Vec::new());
    go(inst, value, 0, &mut vec![0; inst.num_vertices()], &mut Vec::new(), &mut best);
    best
}

/// `max f(T)` over feasible `T`, evaluating `f` through the oracle.
pub fn naive_opt_oracle(inst: &Instance, oracle: &Oracle) -> (f64, Vec<EdgeId>) {
    naive_opt(inst, &|t| oracle.eval(&inst.keys_of(t)).unwrap())
}

/// `max Σ w_e` over feasible `T ⊆ allowed`.
pub fn naive_weighted(inst: &Instance, weights: &[f64], allowed: &[bool]) -> f64 {
    naive_opt(inst, &|t| {
        if t.iter().all(|id| allowed[id.0]) {
            t.iter().map(|id| weights[id.0]).sum()
        } else {
            f64::NEG_INFINITY
        }
    })
    .0
}

fn small(i: u64, max_edges: usize, caps: Capacities, salt: u64) -> RandomSpec {
    RandomSpec {
        vertices: 4 + (i % 5) as usize,
        edges: max_edges - (i % 6) as usize,
        capacities: caps,
        universe: 10,
        max_set: 4,
        weight_lo: 1.0,
        weight_hi: 10.0,
        seed: salt.wrapping_mul(1_000_003).wrapping_add(i),
    }
}

pub fn coverage_family(count: u64, caps: Capacities, salt: u64) -> Vec<Generated> {
    (0..count).map(|i| generate(GenSpec::Coverage(small(i, 14, caps, salt))).unwrap()).collect()
}

pub fn covlin_family(count: u64, salt: u64) -> Vec<Generated> {
    (0..count).map(|i| generate(GenSpec::Covlin(small(i, 12, Capacities::Uniform(1), salt))).unwrap()).collect()
}

pub fn linear_family(count: u64, caps: Capacities, salt: u64) -> Vec<Generated> {
    (0..count).map(|i| generate(GenSpec::Linear(small(i, 14, caps, salt))).unwrap()).collect()
}
