//! Dual certificates, ratio checks, brute-force optima and Monte-Carlo
//! estimates for the expected-case statements.
//!
//! The dual program, for a set function `g` and capacities `b`:
//!
//! ```text
//! min  μ + Σ_v b_v·φ_v
//! s.t. μ + Σ_{e∈T} λ_e ≥ g(T)   for all T ⊆ E
//!      Σ_{v∈e} φ_v ≥ λ_e         for all e ∈ E
//!      φ ≥ 0
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::AlgoError;
use crate::instance::{BMatching, EdgeId, Instance, Key};
use crate::mwbm::WeightedStack;
use crate::oracle::{Oracle, StreamState};
use crate::preemptive::{preemptive_factor, PreemptiveRecord};
use crate::streaming::{run, stack_factor, AlgoParams, Decision, RunRecord};
use crate::TOL;

/// Default edge limit for exhaustive subset checks.
pub const SUBSET_LIMIT: usize = 20;

/// Default edge limit for [`brute_force_opt`].
pub const OPT_LIMIT: usize = 32;

/// Feasible sets [`brute_force_opt`] visits before giving up.
pub const OPT_BUDGET: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DualMode {
    /// `μ = f(S)`, `φ = C·φ^(|E|)`, `λ_e = f(e:S)` off the stack.
    Stack,
    /// `φ_v = C·max{w_e : v ∈ e ∈ S}` over admitted edges.
    Preemptive,
    /// `(0, C·φ^(|E|), w)` for the function `T ↦ w(T ∖ S)`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualCertificate {
    pub mode: DualMode,
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Membership of each edge in `S`.
    pub in_s: Vec<bool>,
}

impl DualCertificate {
    /// `μ + Σ_v b_v·φ_v`.
    pub fn cost(&self, inst: &Instance) -> f64 {
        self.mu + self.phi.iter().enumerate().map(|(v, p)| inst.capacity(v) as f64 * p).sum::<f64>()
    }

    pub fn s_keys(&self, inst: &Instance) -> Vec<Key> {
        inst.edge_ids().filter(|id| self.in_s[id.0]).map(|id| inst.key(id)).collect()
    }

    /// Right-hand side `g(T)` of the subset constraint.
    fn g(&self, inst: &Instance, oracle: &Oracle, s_keys: &[Key], t: &[EdgeId]) -> Result<f64, AlgoError> {
        Ok(match self.mode {
            DualMode::Stack | DualMode::Preemptive => {
                let mut keys = s_keys.to_vec();
                keys.extend(t.iter().map(|&id| inst.key(id)));
                oracle.eval(&keys)?
            }
            DualMode::Linear => {
                let outside: Vec<EdgeId> = t.iter().copied().filter(|id| !self.in_s[id.0]).collect();
                oracle.eval_edges(inst, &outside)?
            }
        })
    }
}

/// Dual of a stack run. Needs a certify-mode record.
pub fn build_dual(inst: &Instance, oracle: &Oracle, run: &RunRecord) -> Result<DualCertificate, AlgoError> {
    let trace = run.trace.as_ref().ok_or(AlgoError::NotCertified)?;
    let c = run.params.c;
    let mut lambda = vec![0.0; inst.num_edges()];
    let mut in_s = vec![false; inst.num_edges()];
    for a in &trace.arrivals {
        match a.decision {
            Decision::Pushed => in_s[a.edge.0] = true,
            Decision::Skipped | Decision::SampledOut => lambda[a.edge.0] = a.gain,
        }
    }
    let mu = oracle.eval_edges(inst, &run.stack_edges())?;
    Ok(DualCertificate {
        mode: DualMode::Stack,
        c,
        mu,
        phi: run.potentials.iter().map(|p| c * p).collect(),
        lambda,
        in_s,
    })
}

/// Dual of a preemptive run. Needs a certify-mode record.
pub fn build_preemptive_dual(inst: &Instance, run: &PreemptiveRecord) -> Result<DualCertificate, AlgoError> {
    let trace = run.trace.as_ref().ok_or(AlgoError::NotCertified)?;
    let c = run.params.c;
    let mut lambda = vec![0.0; inst.num_edges()];
    let mut in_s = vec![false; inst.num_edges()];
    for step in &trace.steps {
        match step.admitted_marginal {
            Some(m) => lambda[step.edge.0] = m,
            None => in_s[step.edge.0] = true,
        }
    }
    Ok(DualCertificate {
        mode: DualMode::Preemptive,
        c,
        mu: trace.admitted_value,
        phi: run.max_weights(inst)?.into_iter().map(|w| c * w).collect(),
        lambda,
        in_s,
    })
}

/// `(0, C·φ^(|E|), w)` with `λ_e = w_e` off the stack and `0` on it.
pub fn build_linear_dual(inst: &Instance, stack: &WeightedStack) -> DualCertificate {
    let c = stack.c();
    let mut in_s = vec![false; inst.num_edges()];
    for id in stack.stack_edges() {
        in_s[id.0] = true;
    }
    let lambda = (0..inst.num_edges()).map(|i| if in_s[i] { 0.0 } else { stack.weights[i] }).collect();
    DualCertificate {
        mode: DualMode::Linear,
        c,
        mu: 0.0,
        phi: stack.phase.potentials.iter().map(|p| c * p).collect(),
        lambda,
        in_s,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsetMode {
    /// Every `T ⊆ E`; edges in `S` never change either side, so only
    /// subsets of `E ∖ S` are enumerated.
    Exhaustive,
    /// `λ_e ≥ g(S + e) - g(S)` for every `e ∉ S`, which implies all subset
    /// constraints by submodularity.
    Sufficient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeVerdict {
    pub edge: EdgeId,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetVerdict {
    pub mode: SubsetMode,
    pub checked: usize,
    pub violations: usize,
    /// Constraint with the smallest slack: `(T, lhs, rhs)`.
    pub tightest: Option<(Vec<EdgeId>, f64, f64)>,
    pub pass: bool,
}

/// `factor · f_M ≥ dual_cost`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioVerdict {
    pub name: String,
    pub factor: f64,
    #[serde(rename = "f_M")]
    pub f_m: f64,
    pub dual_cost: f64,
    pub pass: bool,
}

impl RatioVerdict {
    pub fn new(name: &str, factor: f64, f_m: f64, dual_cost: f64) -> Self {
        Self { name: name.into(), factor, f_m, dual_cost, pass: factor * f_m >= dual_cost - TOL }
    }

    pub fn slack(&self) -> f64 {
        self.factor * self.f_m - self.dual_cost
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub edges: Vec<EdgeVerdict>,
    pub subsets: Option<SubsetVerdict>,
    pub ratios: Vec<RatioVerdict>,
}

impl FeasibilityReport {
    pub fn edge_violations(&self) -> usize {
        self.edges.iter().filter(|v| !v.pass).count()
    }

    pub fn passes(&self) -> bool {
        self.edge_violations() == 0
            && self.subsets.as_ref().is_none_or(|s| s.pass)
            && self.ratios.iter().all(|r| r.pass)
    }
}

/// Checks both constraint families of the dual program.
pub fn check_feasibility(
    cert: &DualCertificate,
    inst: &Instance,
    oracle: &Oracle,
    mode: SubsetMode,
) -> Result<FeasibilityReport, AlgoError> {
    let edges = inst
        .edge_ids()
        .map(|id| {
            let e = inst.edge(id);
            let lhs = cert.phi[e.u] + cert.phi[e.v];
            let rhs = cert.lambda[id.0];
            EdgeVerdict { edge: id, lhs, rhs, pass: lhs >= rhs - TOL }
        })
        .collect();

    let s_keys = cert.s_keys(inst);
    let outside: Vec<EdgeId> = inst.edge_ids().filter(|id| !cert.in_s[id.0]).collect();
    let mut checked = 0;
    let mut violations = 0;
    let mut tightest: Option<(Vec<EdgeId>, f64, f64)> = None;
    let mut record = |t: Vec<EdgeId>, lhs: f64, rhs: f64| {
        checked += 1;
        if lhs < rhs - TOL {
            violations += 1;
        }
        if tightest.as_ref().is_none_or(|(_, l, r)| lhs - rhs < l - r) {
            tightest = Some((t, lhs, rhs));
        }
    };

    match mode {
        SubsetMode::Exhaustive => {
            if inst.num_edges() > SUBSET_LIMIT {
                return Err(AlgoError::TooLarge { size: inst.num_edges(), limit: SUBSET_LIMIT });
            }
            for mask in 0u64..(1 << outside.len()) {
                let t: Vec<EdgeId> =
                    (0..outside.len()).filter(|i| mask & (1 << i) != 0).map(|i| outside[i]).collect();
                let lhs = cert.mu + t.iter().map(|id| cert.lambda[id.0]).sum::<f64>();
                let rhs = cert.g(inst, oracle, &s_keys, &t)?;
                record(t, lhs, rhs);
            }
        }
        SubsetMode::Sufficient => {
            let base = cert.g(inst, oracle, &s_keys, &[])?;
            if cert.mu < base - TOL {
                record(vec![], cert.mu, base);
            }
            for &id in &outside {
                let gain = cert.g(inst, oracle, &s_keys, &[id])? - base;
                record(vec![id], cert.lambda[id.0], gain);
            }
        }
    }

    Ok(FeasibilityReport {
        edges,
        subsets: Some(SubsetVerdict { mode, checked, violations, tightest, pass: violations == 0 }),
        ratios: Vec::new(),
    })
}

/// The inequalities relating `f(M)` to the stack-mode dual.
pub fn check_stack_ratios(inst: &Instance, run: &RunRecord, cert: &DualCertificate) -> Vec<RatioVerdict> {
    let c = run.params.c;
    let phi_cost = cert.cost(inst) - cert.mu;
    vec![
        RatioVerdict::new("increments", 2.0, run.value, run.weighted_increment_sum(inst)),
        RatioVerdict::new("potentials", 2.0 * c, run.value, phi_cost),
        RatioVerdict::new("stack_value", c / (c - 1.0), run.value, cert.mu),
        RatioVerdict::new("combined", stack_factor(c), run.value, phi_cost + cert.mu),
    ]
}

/// The inequalities relating `f(M)` to the preemptive-mode dual.
pub fn check_preemptive_ratios(
    inst: &Instance,
    run: &PreemptiveRecord,
    cert: &DualCertificate,
) -> Result<Vec<RatioVerdict>, AlgoError> {
    let trace = run.trace.as_ref().ok_or(AlgoError::NotCertified)?;
    let c = run.params.c;
    let w_m: f64 = run.matching_weights.iter().sum();
    let w_p: f64 = trace.preempted.iter().map(|p| p.1).sum();
    let phi_cost = cert.cost(inst) - cert.mu;
    let identity = RatioVerdict {
        pass: (run.value - w_m).abs() <= TOL * (1.0 + w_m.abs()),
        ..RatioVerdict::new("matched_weight_identity", 1.0, run.value, w_m)
    };
    Ok(vec![
        identity,
        RatioVerdict::new("preempted_weight", 1.0 / (c - 1.0), w_m, w_p),
        RatioVerdict::new("admitted_value", c / (c - 1.0), run.value, cert.mu),
        RatioVerdict::new("potentials", stack_factor(c), run.value, phi_cost),
        RatioVerdict::new("combined", preemptive_factor(c), run.value, phi_cost + cert.mu),
    ])
}

/// An optimal feasible b-matching and its value.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub matching: BMatching,
    pub value: f64,
}

/// Exhaustive search over feasible b-matchings. Among optima within the
/// tolerance, the lexicographically smallest arrival-index list wins.
///
/// Fails with [`AlgoError::SearchBudget`] after [`OPT_BUDGET`] feasible sets.
pub fn brute_force_opt(inst: &Instance, oracle: &Oracle, limit: usize) -> Result<Optimum, AlgoError> {
    if inst.num_edges() > limit {
        return Err(AlgoError::TooLarge { size: inst.num_edges(), limit });
    }
    oracle.check_covers(inst)?;

    struct Search<'a> {
        inst: &'a Instance,
        oracle: &'a Oracle,
        degree: Vec<u32>,
        chosen: Vec<EdgeId>,
        best: f64,
        best_set: Vec<EdgeId>,
        visited: usize,
    }

    impl Search<'_> {
        // Visits feasible sets in lexicographic order, so the first optimum
        // found is the lexicographically smallest.
        fn go(&mut self, from: usize, state: &StreamState) -> Result<(), AlgoError> {
            self.visited += 1;
            if self.visited > OPT_BUDGET {
                return Err(AlgoError::SearchBudget(OPT_BUDGET));
            }
            if state.value() > self.best + TOL {
                self.best = state.value();
                self.best_set = self.chosen.clone();
            }
            for j in from..self.inst.num_edges() {
                let e = *self.inst.edge(EdgeId(j));
                if self.degree[e.u] < self.inst.capacity(e.u) && self.degree[e.v] < self.inst.capacity(e.v) {
                    let mut next = state.clone();
                    self.oracle.push_accept(&mut next, e.key)?;
                    self.degree[e.u] += 1;
                    self.degree[e.v] += 1;
                    self.chosen.push(EdgeId(j));
                    self.go(j + 1, &next)?;
                    self.chosen.pop();
                    self.degree[e.u] -= 1;
                    self.degree[e.v] -= 1;
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        inst,
        oracle,
        degree: vec![0; inst.num_vertices()],
        chosen: Vec::new(),
        best: f64::NEG_INFINITY,
        best_set: Vec::new(),
        visited: 0,
    };
    search.go(0, &oracle.new_state())?;
    let value = oracle.eval_edges(inst, &search.best_set)?;
    Ok(Optimum { matching: BMatching::from_edges(inst, search.best_set)?, value })
}

/// SplitMix64 finaliser; derives independent per-trial seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial))
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Running mean and squared deviations (Welford), mergeable across chunks.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn estimate(&self) -> Estimate {
        if self.n == 0.0 {
            return Estimate::default();
        }
        let var = if self.n > 1.0 { (self.m2 / (self.n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean: self.mean, se: (var / self.n).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEdge {
    pub edge: EdgeId,
    /// `Σ_{v∈e} φ_v`.
    pub phi_sum: Estimate,
    pub lambda: Estimate,
    /// Paired difference `Σ_{v∈e} φ_v - λ_e`.
    pub difference: Estimate,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub trials: usize,
    /// Whether `q ∈ [1/(2C+1), 1/2]`.
    pub within_hypothesis: bool,
    pub label: String,
    pub edges: Vec<McEdge>,
    pub flagged: usize,
    /// `f(M)` over trials.
    pub value: Estimate,
    /// `μ + Σ_v b_v·φ_v` over trials.
    pub dual_cost: Estimate,
    /// Trials on which the increment or potential inequality failed.
    pub ratio_failures: usize,
}

const CHUNK: usize = 256;

/// Runs the stack algorithm `trials` times and estimates both sides of every
/// edge constraint. An edge is flagged when the mean difference is below
/// zero by more than three standard errors.
pub fn mc_expected_feasibility(
    inst: &Instance,
    oracle: &Oracle,
    params: AlgoParams,
    trials: usize,
) -> Result<McReport, AlgoError> {
    let m = inst.num_edges();
    let chunks: Vec<(usize, usize)> = (0..trials).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(trials))).collect();
    // Fixed chunks summed in order keep the result independent of scheduling.
    let partials = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = vec![[Moments::default(); 3]; m];
            let mut value = Moments::default();
            let mut cost = Moments::default();
            let mut failures = 0;
            for i in lo..hi {
                let p = params.with_seed(trial_seed(params.seed, i as u64));
                let r = run(inst, oracle, p, true)?;
                let cert = build_dual(inst, oracle, &r)?;
                for id in inst.edge_ids() {
                    let e = inst.edge(id);
                    let phi = cert.phi[e.u] + cert.phi[e.v];
                    let lambda = cert.lambda[id.0];
                    acc[id.0][0].push(phi);
                    acc[id.0][1].push(lambda);
                    acc[id.0][2].push(phi - lambda);
                }
                value.push(r.value);
                cost.push(cert.cost(inst));
                let ratios = check_stack_ratios(inst, &r, &cert);
                if !ratios[..2].iter().all(|v| v.pass) {
                    failures += 1;
                }
            }
            Ok((acc, value, cost, failures))
        })
        .collect::<Result<Vec<_>, AlgoError>>()?;

    let mut acc = vec![[Moments::default(); 3]; m];
    let mut value = Moments::default();
    let mut cost = Moments::default();
    let mut ratio_failures = 0;
    for (a, v, c, f) in &partials {
        ratio_failures += f;
        for (dst, src) in acc.iter_mut().zip(a) {
            for k in 0..3 {
                dst[k].merge(&src[k]);
            }
        }
        value.merge(v);
        cost.merge(c);
    }

    let edges: Vec<McEdge> = inst
        .edge_ids()
        .map(|id| {
            let [phi, lambda, diff] = acc[id.0].map(|x| x.estimate());
            McEdge { edge: id, phi_sum: phi, lambda, difference: diff, flagged: diff.mean < -(3.0 * diff.se + TOL) }
        })
        .collect();
    let c = params.c;
    let within = params.q >= 1.0 / (2.0 * c + 1.0) - TOL && params.q <= 0.5 + TOL;
    Ok(McReport {
        trials,
        within_hypothesis: within,
        label: if within { "within lemma hypothesis" } else { "outside lemma hypothesis" }.into(),
        flagged: edges.iter().filter(|e| e.flagged).count(),
        edges,
        value: value.estimate(),
        dual_cost: cost.estimate(),
        ratio_failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsampleReport {
    pub q: f64,
    pub trials: usize,
    /// `h(∅) = f(anchor)`.
    pub h_empty: f64,
    /// `h(B) = f(B ∪ anchor)` with `B` a `q`-sample of the base set.
    pub h_sample: Estimate,
    /// `(1 - q)·h(∅)`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks `E[h(B)] ≥ (1 - q)·h(∅)` for `h(B) = f(B ∪ anchor)` and `B`
/// containing each base element independently with probability `q`.
pub fn subsample_lemma_check(
    oracle: &Oracle,
    base: &[Key],
    anchor: &[Key],
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<SubsampleReport, AlgoError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(AlgoError::InvalidParams(format!("q must lie in [0, 1], got {q}")));
    }
    let h_empty = oracle.eval(anchor)?;
    let chunks: Vec<(usize, usize)> = (0..trials).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(trials))).collect();
    let partials = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut mom = Moments::default();
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, i as u64));
                let mut keys = anchor.to_vec();
                keys.extend(base.iter().copied().filter(|_| rng.gen::<f64>() < q));
                mom.push(oracle.eval(&keys)?);
            }
            Ok(mom)
        })
        .collect::<Result<Vec<_>, AlgoError>>()?;
    let mut mom = Moments::default();
    for p in &partials {
        mom.merge(p);
    }
    let h_sample = mom.estimate();
    let bound = (1.0 - q) * h_empty;
    Ok(SubsampleReport { q, trials, h_empty, h_sample, bound, pass: h_sample.mean >= bound - 3.0 * h_sample.se - TOL })
}
