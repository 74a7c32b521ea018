//! Manifest-driven batch runs with CSV output.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use msbm_core::instance::parse_stream;
use msbm_core::oracle::parse_oracle;
use msbm_core::preemptive::PreemptiveParams;
use msbm_core::streaming::AlgoParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{execute, Algorithm, RunOptions, RunReport};

#[derive(Clone, Debug, Deserialize)]
struct ManifestRow {
    instance: String,
    oracle: String,
    algorithm: String,
    #[serde(rename = "C", default)]
    c: String,
    #[serde(default)]
    q: String,
    #[serde(default)]
    eps: String,
    #[serde(default)]
    seed: String,
    #[serde(default)]
    flags: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BenchRow {
    pub kind: &'static str,
    pub row: usize,
    pub repeat: Option<usize>,
    pub instance: String,
    pub oracle: String,
    pub algorithm: String,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub value: Option<f64>,
    pub matching_size: Option<usize>,
    pub stack_size: Option<usize>,
    pub preempted: Option<usize>,
    pub peak_memory_proxy: Option<usize>,
    pub oracle_evaluations: Option<u64>,
    pub wall_time_ms: Option<f64>,
    pub opt: Option<f64>,
    pub ratio: Option<f64>,
    pub checks_passed: Option<bool>,
    pub mean_value: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub error: String,
}

struct Job {
    algorithm: Algorithm,
    opts: RunOptions,
    instance: PathBuf,
    oracle: PathBuf,
}

fn number<T: std::str::FromStr>(cell: &str, name: &str) -> Result<Option<T>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| anyhow!("bad {name} value {cell:?}"))
}

fn job(row: &ManifestRow, base: &Path) -> Result<Job> {
    let algorithm = match row.algorithm.trim() {
        "msbm" => Algorithm::Msbm,
        "preemptive" => Algorithm::Preemptive,
        "mwbm" => Algorithm::Mwbm,
        other => bail!("unknown algorithm {other:?}"),
    };
    let mut opts = RunOptions { seed: number(&row.seed, "seed")?.unwrap_or(0), ..RunOptions::default() };
    match (row.c.trim(), algorithm) {
        ("monotone", Algorithm::Msbm) => (opts.c, opts.q) = (Some(AlgoParams::monotone().c), Some(1.0)),
        ("nonmonotone", Algorithm::Msbm) => {
            let p = AlgoParams::nonmonotone();
            (opts.c, opts.q) = (Some(p.c), Some(p.q));
        }
        ("monotone", Algorithm::Preemptive) => (opts.c, opts.q) = (Some(2.0), Some(1.0)),
        ("nonmonotone", Algorithm::Preemptive) => {
            let p = PreemptiveParams::nonmonotone();
            (opts.c, opts.q) = (Some(p.c), Some(p.q));
        }
        (cell, _) => opts.c = number(cell, "C")?,
    }
    if let Some(q) = number(&row.q, "q")? {
        opts.q = Some(q);
    }
    opts.eps = number(&row.eps, "eps")?;
    for flag in row.flags.split([' ', ';']).filter(|f| !f.is_empty()) {
        match flag {
            "certify" => opts.certify = true,
            "opt" => opts.opt = true,
            "strict" => opts.strict = true,
            f if f.starts_with("trials=") => opts.trials = number(&f[7..], "trials")?,
            f => bail!("unknown flag {f:?}"),
        }
    }
    Ok(Job { algorithm, opts, instance: base.join(row.instance.trim()), oracle: base.join(row.oracle.trim()) })
}

fn execute_job(job: &Job, seed: u64) -> Result<RunReport> {
    let text = std::fs::read_to_string(&job.instance).with_context(|| format!("reading {}", job.instance.display()))?;
    let inst = parse_stream(&text)?;
    let text = std::fs::read_to_string(&job.oracle).with_context(|| format!("reading {}", job.oracle.display()))?;
    let oracle = parse_oracle(&text)?;
    execute(&inst, &oracle, job.algorithm, &RunOptions { seed, ..job.opts.clone() })
}

fn data_row(index: usize, repeat: usize, row: &ManifestRow, outcome: Result<RunReport>) -> BenchRow {
    let mut out = BenchRow {
        kind: "data",
        row: index,
        repeat: Some(repeat),
        instance: row.instance.clone(),
        oracle: row.oracle.clone(),
        algorithm: row.algorithm.clone(),
        ..BenchRow::default()
    };
    match outcome {
        Ok(r) => {
            out.c = Some(r.params.c);
            out.q = Some(r.params.q);
            out.eps = r.params.eps;
            out.seed = Some(r.params.seed);
            out.value = Some(r.value);
            out.matching_size = Some(r.matching_size);
            out.stack_size = r.stack_size;
            out.preempted = r.preempted;
            out.peak_memory_proxy = Some(r.peak_memory_proxy);
            out.oracle_evaluations = Some(r.oracle_evaluations);
            out.wall_time_ms = Some(r.wall_time_ms);
            out.opt = r.opt;
            out.ratio = r.ratio;
            out.checks_passed = Some(r.checks_passed);
        }
        Err(e) => out.error = format!("{e:#}"),
    }
    out
}

fn aggregate(index: usize, row: &ManifestRow, data: &[BenchRow]) -> BenchRow {
    let values: Vec<f64> = data.iter().filter_map(|d| d.value).collect();
    let ratios: Vec<f64> = data.iter().filter_map(|d| d.ratio).collect();
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let failed = data.iter().filter(|d| !d.error.is_empty()).count();
    BenchRow {
        kind: "aggregate",
        row: index,
        instance: row.instance.clone(),
        oracle: row.oracle.clone(),
        algorithm: row.algorithm.clone(),
        c: data.iter().find_map(|d| d.c),
        q: data.iter().find_map(|d| d.q),
        eps: data.iter().find_map(|d| d.eps),
        checks_passed: (failed < data.len()).then(|| data.iter().all(|d| d.checks_passed == Some(true))),
        mean_value: mean(&values),
        mean_ratio: mean(&ratios),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        error: if failed > 0 { format!("{failed} of {} repeats failed", data.len()) } else { String::new() },
        ..BenchRow::default()
    }
}

/// Runs every manifest row `repeat` times; repeat `r` uses seed `seed + r`.
/// Returns the rows in manifest order and whether all of them passed.
pub fn bench(manifest: &Path, repeat: usize) -> Result<(Vec<BenchRow>, bool)> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let rows: Vec<ManifestRow> = reader.deserialize().collect::<Result<_, _>>().context("malformed manifest")?;

    let tasks: Vec<(usize, usize)> = (0..rows.len()).flat_map(|i| (0..repeat).map(move |r| (i, r))).collect();
    let jobs: Vec<Result<Job>> = rows.iter().map(|r| job(r, base)).collect();
    let data: Vec<BenchRow> = tasks
        .par_iter()
        .map(|&(i, r)| {
            let outcome = match &jobs[i] {
                Ok(job) => execute_job(job, job.opts.seed.wrapping_add(r as u64)),
                Err(e) => Err(anyhow!("{e:#}")),
            };
            data_row(i + 1, r + 1, &rows[i], outcome)
        })
        .collect();

    let mut out = Vec::with_capacity(data.len() + rows.len());
    let mut all_pass = true;
    for (i, row) in rows.iter().enumerate() {
        let group = &data[i * repeat..(i + 1) * repeat];
        all_pass &= group.iter().all(|d| d.error.is_empty() && d.checks_passed == Some(true));
        out.extend_from_slice(group);
        out.push(aggregate(i + 1, row, group));
    }
    Ok((out, all_pass))
}

pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        // Serialized headers need a record, so write them from a blank one.
        let mut buf = csv::Writer::from_writer(Vec::new());
        buf.serialize(BenchRow::default())?;
        let text = String::from_utf8(buf.into_inner()?)?;
        let header = text.lines().next().unwrap_or_default();
        w.write_record(header.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
