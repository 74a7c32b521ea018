//! Single runs and their JSON report.

use std::time::Instant;

use anyhow::{bail, Result};
use msbm_core::certificates::{
    brute_force_opt, build_dual, build_linear_dual, build_preemptive_dual, check_feasibility,
    check_preemptive_ratios, check_stack_ratios, mc_expected_feasibility, DualCertificate, FeasibilityReport,
    RatioVerdict, SubsetMode, OPT_LIMIT,
};
use msbm_core::instance::{EdgeId, Instance};
use msbm_core::mwbm::{linear_weights, run_mwbm, EXACT_LIMIT};
use msbm_core::oracle::{Oracle, OracleKind};
use msbm_core::preemptive::{preemptive_factor, run_preemptive, PreemptiveParams};
use msbm_core::streaming::{run, stack_factor, AlgoParams, SkipRule};
use msbm_core::TOL;
use serde::Serialize;

/// Largest instance certified with exhaustive subset enumeration.
const EXHAUSTIVE_EDGES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Algorithm {
    Msbm,
    Preemptive,
    Mwbm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Msbm => "msbm",
            Algorithm::Preemptive => "preemptive",
            Algorithm::Mwbm => "mwbm",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub c: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub seed: u64,
    pub certify: bool,
    pub opt: bool,
    pub trials: Option<usize>,
    pub strict: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamsReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub q: f64,
    pub eps: Option<f64>,
    pub skip_rule: Option<&'static str>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    /// `stack`, `preemptive`, `linear` or `expected`.
    pub mode: &'static str,
    pub subset_mode: Option<SubsetMode>,
    pub mu: Option<f64>,
    pub dual_cost: Option<f64>,
    pub edge_violations: Option<usize>,
    pub subsets_checked: Option<usize>,
    pub subset_violations: Option<usize>,
    pub flagged_edges: Option<usize>,
    pub ratios: Vec<RatioVerdict>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialsReport {
    pub count: usize,
    pub mean_value: f64,
    pub standard_error: f64,
    pub label: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub algorithm: &'static str,
    pub params: ParamsReport,
    pub memory_profile: &'static str,
    pub value: f64,
    pub matching: Vec<EdgeId>,
    pub matching_size: usize,
    pub stack_size: Option<usize>,
    pub preempted: Option<usize>,
    pub peak_memory_proxy: usize,
    pub oracle_evaluations: u64,
    pub wall_time_ms: f64,
    pub opt: Option<f64>,
    pub ratio: Option<f64>,
    pub guarantee: Option<f64>,
    pub certificate: Option<CertificateReport>,
    pub trials: Option<TrialsReport>,
    pub checks_passed: bool,
}

fn certificate(mode: &'static str, cert: &DualCertificate, inst: &Instance, feas: Option<FeasibilityReport>, ratios: Vec<RatioVerdict>) -> CertificateReport {
    let pass = feas.as_ref().is_none_or(|f| f.passes()) && ratios.iter().all(|r| r.pass);
    let subsets = feas.as_ref().and_then(|f| f.subsets.as_ref());
    CertificateReport {
        mode,
        subset_mode: subsets.map(|s| s.mode),
        mu: Some(cert.mu),
        dual_cost: Some(cert.cost(inst)),
        edge_violations: feas.as_ref().map(|f| f.edge_violations()),
        subsets_checked: subsets.map(|s| s.checked),
        subset_violations: subsets.map(|s| s.violations),
        flagged_edges: None,
        ratios,
        pass,
    }
}

fn subset_mode(inst: &Instance) -> SubsetMode {
    if inst.num_edges() <= EXHAUSTIVE_EDGES {
        SubsetMode::Exhaustive
    } else {
        SubsetMode::Sufficient
    }
}

fn ratio(opt: f64, value: f64) -> f64 {
    if opt <= TOL && value <= TOL {
        1.0
    } else {
        opt / value
    }
}

/// Runs `algorithm` once (or `trials` times) and assembles the report.
pub fn execute(inst: &Instance, oracle: &Oracle, algorithm: Algorithm, opts: &RunOptions) -> Result<RunReport> {
    oracle.check_covers(inst)?;
    if opts.trials.is_some() && algorithm != Algorithm::Msbm {
        bail!("--trials applies to msbm only");
    }
    if opts.strict && algorithm != Algorithm::Msbm {
        bail!("--strict applies to msbm only");
    }
    let start = Instant::now();
    let opt = if opts.opt { Some(brute_force_opt(inst, oracle, OPT_LIMIT)?.value) } else { None };
    let mut report = match algorithm {
        Algorithm::Msbm => msbm(inst, oracle, opts, opt)?,
        Algorithm::Preemptive => preemptive(inst, oracle, opts, opt)?,
        Algorithm::Mwbm => mwbm(inst, oracle, opts, opt)?,
    };
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

fn profile(certify: bool) -> &'static str {
    if certify {
        "non-streaming memory profile"
    } else {
        "streaming"
    }
}

fn finish(mut report: RunReport, opt: Option<f64>) -> RunReport {
    report.opt = opt;
    report.ratio = opt.map(|o| ratio(o, report.value));
    let bound_ok = match (opt, report.guarantee, &report.trials) {
        (Some(o), Some(g), None) => o <= g * report.value + TOL,
        (Some(o), Some(g), Some(t)) => t.mean_value >= o / g - 3.0 * t.standard_error - TOL,
        _ => true,
    };
    report.checks_passed = bound_ok && report.certificate.as_ref().is_none_or(|c| c.pass);
    report
}

fn msbm(inst: &Instance, oracle: &Oracle, opts: &RunOptions, opt: Option<f64>) -> Result<RunReport> {
    let preset = if oracle.is_monotone() { AlgoParams::monotone() } else { AlgoParams::nonmonotone() };
    let c = opts.c.unwrap_or(preset.c);
    let q = opts.q.unwrap_or(if opts.c.is_some() && !oracle.is_monotone() { 1.0 / (2.0 * c + 1.0) } else { preset.q });
    let rule = if opts.strict { SkipRule::Strict } else { SkipRule::Nonstrict };
    let params = AlgoParams::new(c, q)?.with_seed(opts.seed).with_skip_rule(rule);
    let within = q >= 1.0 / (2.0 * c + 1.0) - TOL && q <= 0.5 + TOL;

    let record = run(inst, oracle, params, opts.certify)?;
    let mut cert_report = None;
    if opts.certify {
        let cert = build_dual(inst, oracle, &record)?;
        let ratios = check_stack_ratios(inst, &record, &cert);
        cert_report = Some(if q == 1.0 {
            let feas = check_feasibility(&cert, inst, oracle, subset_mode(inst))?;
            certificate("stack", &cert, inst, Some(feas), ratios)
        } else {
            // Per-realization feasibility is not expected when sampling.
            certificate("stack", &cert, inst, None, ratios[..2].to_vec())
        });
    }

    let mut trials = None;
    let mut guarantee = (q == 1.0 && oracle.is_monotone()).then(|| stack_factor(c));
    if let Some(n) = opts.trials {
        let mc = mc_expected_feasibility(inst, oracle, params, n)?;
        trials = Some(TrialsReport {
            count: n,
            mean_value: mc.value.mean,
            standard_error: mc.value.se,
            label: mc.label.clone(),
        });
        if within {
            guarantee = Some(stack_factor(c) / (1.0 - q));
        }
        if opts.certify {
            cert_report = Some(CertificateReport {
                mode: "expected",
                subset_mode: None,
                mu: None,
                dual_cost: Some(mc.dual_cost.mean),
                edge_violations: None,
                subsets_checked: None,
                subset_violations: None,
                flagged_edges: Some(mc.flagged),
                ratios: Vec::new(),
                pass: mc.flagged == 0 && mc.ratio_failures == 0,
            });
        }
    }

    let report = RunReport {
        algorithm: Algorithm::Msbm.name(),
        params: ParamsReport { c, q, eps: None, skip_rule: Some(if opts.strict { "strict" } else { "nonstrict" }), seed: opts.seed },
        memory_profile: profile(opts.certify),
        value: record.value,
        matching: record.matching.edges().to_vec(),
        matching_size: record.matching.len(),
        stack_size: Some(record.stack.len()),
        preempted: None,
        peak_memory_proxy: record.counters.peak_memory_proxy,
        oracle_evaluations: record.counters.set_evaluations,
        wall_time_ms: 0.0,
        opt: None,
        ratio: None,
        guarantee,
        certificate: cert_report,
        trials,
        checks_passed: true,
    };
    Ok(finish(report, opt))
}

fn preemptive(inst: &Instance, oracle: &Oracle, opts: &RunOptions, opt: Option<f64>) -> Result<RunReport> {
    if !inst.is_matching_instance() {
        bail!("preemptive requires every capacity to be 1");
    }
    let preset = if oracle.is_monotone() { PreemptiveParams::monotone() } else { PreemptiveParams::nonmonotone() };
    let c = opts.c.unwrap_or(preset.c);
    let q = opts.q.unwrap_or(if opts.c.is_some() && !oracle.is_monotone() { 1.0 / (2.0 * c + 1.0) } else { preset.q });
    let params = PreemptiveParams::new(c, q)?.with_seed(opts.seed);
    let record = run_preemptive(inst, oracle, params, opts.certify)?;

    let cert_report = if opts.certify {
        let cert = build_preemptive_dual(inst, &record)?;
        let ratios = check_preemptive_ratios(inst, &record, &cert)?;
        Some(if q == 1.0 {
            let feas = check_feasibility(&cert, inst, oracle, subset_mode(inst))?;
            certificate("preemptive", &cert, inst, Some(feas), ratios)
        } else {
            certificate("preemptive", &cert, inst, None, ratios[..1].to_vec())
        })
    } else {
        None
    };

    let report = RunReport {
        algorithm: Algorithm::Preemptive.name(),
        params: ParamsReport { c, q, eps: None, skip_rule: None, seed: opts.seed },
        memory_profile: profile(opts.certify),
        value: record.value,
        matching: record.matching.edges().to_vec(),
        matching_size: record.matching.len(),
        stack_size: None,
        preempted: Some(record.preempted_count),
        peak_memory_proxy: record.peak_matching,
        oracle_evaluations: record.set_evaluations,
        wall_time_ms: 0.0,
        opt: None,
        ratio: None,
        guarantee: (q == 1.0 && oracle.is_monotone()).then(|| preemptive_factor(c)),
        certificate: cert_report,
        trials: None,
        checks_passed: true,
    };
    Ok(finish(report, opt))
}

fn mwbm(inst: &Instance, oracle: &Oracle, opts: &RunOptions, opt: Option<f64>) -> Result<RunReport> {
    if oracle.kind() != OracleKind::Linear {
        bail!("mwbm requires a linear oracle, got {}", oracle.kind().name());
    }
    if opts.c.is_some() || opts.q.is_some() {
        bail!("mwbm takes --eps; C is fixed to 1 + eps/2 and q to 1");
    }
    let eps = opts.eps.unwrap_or(0.1);
    let weights = linear_weights(inst, oracle)?;
    let out = run_mwbm(inst, &weights, eps, EXACT_LIMIT, opts.certify)?;
    let c = out.stack.c();

    let cert_report = if opts.certify {
        let cert = build_linear_dual(inst, &out.stack);
        let feas = check_feasibility(&cert, inst, oracle, subset_mode(inst))?;
        let ratios = vec![RatioVerdict::new("potentials", 2.0 * c, out.value, out.stack.dual_cost(inst))];
        Some(certificate("linear", &cert, inst, Some(feas), ratios))
    } else {
        None
    };

    let counters = &out.stack.phase.counters;
    let report = RunReport {
        algorithm: Algorithm::Mwbm.name(),
        params: ParamsReport { c, q: 1.0, eps: Some(eps), skip_rule: Some("nonstrict"), seed: opts.seed },
        memory_profile: profile(opts.certify),
        value: out.value,
        matching: out.matching.edges().to_vec(),
        matching_size: out.matching.len(),
        stack_size: Some(out.stack.phase.stack.len()),
        preempted: None,
        peak_memory_proxy: counters.peak_memory_proxy,
        oracle_evaluations: counters.set_evaluations,
        wall_time_ms: 0.0,
        opt: None,
        ratio: None,
        guarantee: out.exact.then_some(3.0 + eps),
        certificate: cert_report,
        trials: None,
        checks_passed: true,
    };
    Ok(finish(report, opt))
}
