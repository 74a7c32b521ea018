mod common;

use common::naive_opt_oracle;
use msbm_core::certificates::{brute_force_opt, build_dual, check_feasibility, SubsetMode, OPT_LIMIT};
use msbm_core::generators::{generate, GenSpec};
use msbm_core::instance::EdgeId;
use msbm_core::streaming::{run, stack_factor, AlgoParams, Decision};

const C: f64 = 2.0;

fn small() -> msbm_core::generators::Generated {
    generate(GenSpec::Tight { c: C, n: 3, eps: 0.1, delta: 0.01 }).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn d2_is_pushed_and_e2_is_skipped() {
    let g = small();
    let inst = &g.instance;
    let r = run(inst, &g.oracle, AlgoParams::new(C, 1.0).unwrap(), true).unwrap();
    let trace = r.trace.as_ref().unwrap();
    let by_key = |k: u64| trace.arrivals.iter().find(|a| inst.key(a.edge) == k).unwrap();
    // keys: d_i = i - 1, e_0 = n, e_i = n + i; vertices x_i = i, y_i = n + 1 + i
    let d2 = by_key(1);
    assert_eq!(d2.decision, Decision::Pushed);
    assert!(close(d2.potential_sum, 1.0) && close(d2.gain, 2.01));

    let e2 = by_key(5);
    assert_eq!(e2.decision, Decision::Skipped);
    let t = e2.edge.arrival() - 1;
    assert!(close(trace.potential_at(2, t), 1.01));
    assert!(close(e2.gain, 3.9 - 2.01));
    assert!(e2.gain <= C * e2.potential_sum);

    let cert = build_dual(inst, &g.oracle, &r).unwrap();
    assert!(close(cert.phi[2], 2.02));
    assert!(close(cert.lambda[e2.edge.0], 1.89));
    assert!(check_feasibility(&cert, inst, &g.oracle, SubsetMode::Exhaustive).unwrap().passes());
}

#[test]
fn output_and_optimum() {
    let g = small();
    let inst = &g.instance;
    let r = run(inst, &g.oracle, AlgoParams::new(C, 1.0).unwrap(), true).unwrap();
    let d3 = inst.edge_ids().find(|&id| inst.key(id) == 2).unwrap();
    assert_eq!(r.matching.edges(), [d3]);
    assert!(close(r.value, 2.01 * 2.01));

    let (opt, witness) = naive_opt_oracle(inst, &g.oracle);
    assert!(close(opt, 22.6));
    let mut keys = inst.keys_of(&witness);
    keys.sort_unstable();
    assert_eq!(keys, vec![3, 4, 5, 6]);
    assert!(close(brute_force_opt(inst, &g.oracle, OPT_LIMIT).unwrap().value, opt));

    let ratio = opt / r.value;
    assert!((ratio - 5.594).abs() < 1e-3);
    assert!(ratio <= stack_factor(C));
}

#[test]
fn stack_holds_exactly_the_d_edges() {
    for n in [1, 2, 5, 12] {
        let g = generate(GenSpec::tight(C, n, 1e-3)).unwrap();
        let r = run(&g.instance, &g.oracle, AlgoParams::new(C, 1.0).unwrap(), false).unwrap();
        let keys: Vec<u64> = r.stack.iter().map(|s| g.instance.key(s.edge)).collect();
        assert_eq!(keys, (0..n as u64).collect::<Vec<_>>());
        assert_eq!(r.matching.len(), 1);
        assert_eq!(r.matching.edges(), [EdgeId(r.stack.last().unwrap().edge.0)]);
    }
}
