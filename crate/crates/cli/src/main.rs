//! `msbm`: run, certify, generate and benchmark streaming b-matching.

mod bench;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msbm_core::generators::{default_delta, generate, Capacities, GenSpec, RandomSpec};
use msbm_core::instance::parse_stream;
use msbm_core::oracle::parse_oracle;

use report::{Algorithm, RunOptions};

#[derive(Parser)]
#[command(name = "msbm", version, about = "Streaming submodular b-matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on a stream and oracle; prints a JSON report.
    Run(RunArgs),
    /// Write a generated instance as `<out>.msbm` and `<out>.oracle`.
    Gen(GenArgs),
    /// Run every row of a CSV manifest; prints a CSV table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    instance: PathBuf,
    oracle: PathBuf,
    #[arg(value_enum)]
    algorithm: Algorithm,
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// mwbm only.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the full history and check the dual certificate.
    #[arg(long)]
    certify: bool,
    /// Attach the brute-force optimum and check the ratio bound.
    #[arg(long)]
    opt: bool,
    /// Repeat the msbm run with derived seeds and report the mean.
    #[arg(long)]
    trials: Option<usize>,
    /// Skip only when C times the potentials strictly exceeds the marginal.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Tight,
    Coverage,
    Covlin,
    Linear,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "C", default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Defaults to 1e-4·(C - 1).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 8)]
    vertices: usize,
    #[arg(long, default_value_t = 10)]
    edges: usize,
    /// Uniform capacity.
    #[arg(long, default_value_t = 1, conflicts_with = "b_max")]
    b: u32,
    /// Capacities drawn uniformly from 1..=b_max.
    #[arg(long)]
    b_max: Option<u32>,
    #[arg(long, default_value_t = 12)]
    universe: usize,
    #[arg(long, default_value_t = 4)]
    max_set: usize,
    #[arg(long, default_value_t = 1.0)]
    wmin: f64,
    #[arg(long, default_value_t = 10.0)]
    wmax: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let inst = parse_stream(&read(&args.instance)?).with_context(|| format!("parsing {}", args.instance.display()))?;
    let oracle = parse_oracle(&read(&args.oracle)?).with_context(|| format!("parsing {}", args.oracle.display()))?;
    let opts = RunOptions {
        c: args.c,
        q: args.q,
        eps: args.eps,
        seed: args.seed,
        certify: args.certify,
        opt: args.opt,
        trials: args.trials,
        strict: args.strict,
    };
    let report = report::execute(&inst, &oracle, args.algorithm, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.checks_passed)
}

fn cmd_gen(args: GenArgs) -> Result<bool> {
    let random = RandomSpec {
        vertices: args.vertices,
        edges: args.edges,
        capacities: args.b_max.map_or(Capacities::Uniform(args.b), Capacities::RandomUpTo),
        universe: args.universe,
        max_set: args.max_set,
        weight_lo: args.wmin,
        weight_hi: args.wmax,
        seed: args.seed,
    };
    let spec = match args.family {
        Family::Tight => {
            GenSpec::Tight { c: args.c, n: args.n, eps: args.eps, delta: args.delta.unwrap_or(default_delta(args.c)) }
        }
        Family::Coverage => GenSpec::Coverage(random),
        Family::Covlin => GenSpec::Covlin(random),
        Family::Linear => GenSpec::Linear(random),
    };
    let g = generate(spec)?;
    let stem = args.out.as_os_str().to_owned();
    for (ext, text) in [("msbm", g.stream_text()), ("oracle", g.oracle_text())] {
        let mut path = stem.clone();
        path.push(format!(".{ext}"));
        let path = PathBuf::from(path);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(true)
}

fn cmd_bench(args: BenchArgs) -> Result<bool> {
    let (rows, pass) = bench::bench(&args.manifest, args.repeat)?;
    bench::write_csv(&rows, std::io::stdout().lock())?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
