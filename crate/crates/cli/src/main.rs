//! `povmlab` command line: build catalog observables, run analyzers and
//! write JSON reports.
//!
//! Exit codes: 0 all checks passed, 1 some check failed (the `failures`
//! list is in the stdout JSON and repeated on stderr), 2 invalid input,
//! 3 numerical or output failure.

mod analyzers;
mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use povmlab::catalog::parse_observable;
use povmlab::kernels::{continuity_modulus, gaussian_lipschitz_constant, lipschitz_excess, MarkovKernel};
use povmlab::report::Report;
use povmlab::reproduce::{run as reproduce, ReproduceConfig};
use povmlab::sets::MeasurableSet;
use povmlab::Error;

use analyzers::Plan;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "povmlab", version, about = "Analyze POVMs built from smeared spectral measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run analyzers on one observable and emit a JSON report per analyzer.
    Analyze(AnalyzeArgs),
    /// Uniform-continuity probe along a shrinking family.
    Probe(ProbeArgs),
    /// Sample measurement outcomes and export the histogram.
    Sample(SampleArgs),
    /// Continuity modulus and axioms of a Markov kernel.
    Kernel(KernelArgs),
    /// Run the full claims table.
    ReproducePaper(ReproduceArgs),
}

#[derive(Args, Default)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observable spec, e.g. `phase-can:dim=256`.
    #[arg(long)]
    observable: Option<String>,
    /// Seed (POVMLAB_SEED takes precedence).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated analyzers: norm1, uc-probe, abs-cont, commute,
    /// covariance, scaling, sample, kernel-axioms.
    #[arg(long, value_delimiter = ',')]
    analyzer: Vec<String>,
    /// Shrinking family spec, e.g. `escaping-halfline:first=-1,step=1`.
    #[arg(long)]
    family: Vec<String>,
    #[arg(long)]
    count: Option<usize>,
    /// Explicit set; repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    /// Reference measure, e.g. `weighted:scale=1.5,lo=-1,hi=1`.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    probe_set: Option<String>,
    /// `uniform`, `basis:k=3` or `random[:seed=1]`.
    #[arg(long)]
    state: Option<String>,
    /// Cell breaks `b0,b1,...`, or a cutoff on the naturals.
    #[arg(long)]
    cells: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    kernel: Option<String>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    /// Write `i,set,norm` rows here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    cells: Option<String>,
    #[arg(long, short = 'n')]
    samples: Option<u64>,
    /// Histogram CSV (`cell,lower,upper,count`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Histogram JSON with metadata.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel spec, e.g. `gaussian:l=1`.
    #[arg(long)]
    kernel: String,
    /// Set whose kernel values are probed.
    #[arg(long)]
    set: String,
    /// Grid `lo,hi,count`.
    #[arg(long, default_value = "-3,3,601", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Lipschitz constant to test; defaults to the Gaussian bound.
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Replaces the dimension lists of the scaling rows.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Checks(Vec<serde_json::Value>),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes to stdout, ignoring a closed pipe (`povmlab ... | head`) so the
/// exit code still reflects the checks.
fn stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load(common: &CommonArgs, flags: RunConfig) -> Result<RunConfig, Error> {
    let file = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    Ok(file.overridden_by(RunConfig {
        observable: common.observable.clone(),
        seed: common.seed,
        out: common.out.clone(),
        ..flags
    }))
}

fn plan(config: RunConfig) -> Result<Plan, Error> {
    let spec = config
        .observable
        .clone()
        .ok_or_else(|| Error::Parse { input: String::new(), reason: "missing --observable".into() })?;
    let seed = config.resolved_seed()?;
    let povm = parse_observable(&spec)?;
    Ok(Plan { spec, povm, config, seed })
}

fn failure_entry(r: &Report) -> serde_json::Value {
    json!({ "analyzer": r.analyzer, "verdict": r.verdict })
}

/// Prints reports (or writes them under `out`) and collects failures.
fn emit(reports: Vec<(String, Report)>, out: Option<&Path>) -> Result<Vec<serde_json::Value>, Error> {
    let failures: Vec<_> = reports.iter().filter(|(_, r)| !r.passed).map(|(_, r)| failure_entry(r)).collect();
    match out {
        Some(dir) => {
            let mut written = Vec::new();
            for (name, r) in &reports {
                let path = dir.join(format!("{name}.json"));
                write_file(&path, &r.to_json()?)?;
                written.push(path.display().to_string());
            }
            stdout(&format!("{}\n", serde_json::to_string_pretty(&json!({ "written": written, "failures": failures })).unwrap()));
        }
        None => {
            let values = reports
                .iter()
                .map(|(_, r)| {
                    povmlab::report::validate_report(&r.to_value())?;
                    Ok(r.to_value())
                })
                .collect::<Result<Vec<_>, Error>>()?;
            stdout(&format!("{}\n", serde_json::to_string_pretty(&json!({ "reports": values, "failures": failures })).unwrap()));
        }
    }
    Ok(failures)
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let flags = RunConfig {
        analyzers: args.analyzer,
        families: args.family,
        count: args.count,
        sets: args.sets,
        dims: args.dims,
        reference: args.reference,
        probe_set: args.probe_set,
        state: args.state,
        cells: args.cells,
        samples: args.samples,
        kernel: args.kernel,
        ..Default::default()
    };
    let config = load(&args.common, flags)?;
    if config.analyzers.is_empty() {
        return Err(Error::Parse { input: String::new(), reason: "no analyzers requested".into() }.into());
    }
    let plan = plan(config)?;
    analyzers::validate(&plan)?;
    let results = povmlab::exec::Exec::default()
        .try_map(&plan.config.analyzers, |a| analyzers::run(&plan, a))?;
    let failures = emit(results.into_iter().flatten().collect(), plan.config.out.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn probe(args: ProbeArgs) -> Result<(), Failure> {
    let flags = RunConfig {
        analyzers: vec!["uc-probe".into()],
        families: args.family.into_iter().collect(),
        count: args.count,
        ..Default::default()
    };
    let config = load(&args.common, flags)?;
    let plan = plan(config)?;
    analyzers::validate(&plan)?;
    let reports = analyzers::run(&plan, "uc-probe")?;
    if let Some(path) = &args.csv {
        let r = &reports[0].1;
        let sets = r.details["sets"].as_array().cloned().unwrap_or_default();
        let mut text = String::from("i,set,norm\n");
        for (i, (s, n)) in sets.iter().zip(&r.sequence).enumerate() {
            text.push_str(&format!("{},\"{}\",{:?}\n", i + 1, s.as_str().unwrap_or_default(), n));
        }
        write_file(path, &text)?;
    }
    let failures = emit(reports, plan.config.out.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let flags = RunConfig {
        analyzers: vec!["sample".into()],
        state: args.state,
        cells: args.cells,
        samples: args.samples,
        ..Default::default()
    };
    let config = load(&args.common, flags)?;
    let plan = plan(config)?;
    let outcome = analyzers::sample(&plan)?;
    if let Some(path) = &args.csv {
        write_file(path, &outcome.histogram.to_csv())?;
    }
    if let Some(path) = &args.json {
        write_file(path, &outcome.histogram.to_json())?;
    }
    let failures = emit(vec![("sample".into(), outcome.report)], plan.config.out.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn kernel(args: KernelArgs) -> Result<(), Failure> {
    let k: MarkovKernel = args.kernel.parse()?;
    let set: MeasurableSet = args.set.parse()?;
    let parts: Vec<&str> = args.grid.split(',').map(str::trim).collect();
    let bad_grid = || Error::Parse { input: args.grid.clone(), reason: "grid must be lo,hi,count".into() };
    let [lo, hi, count] = parts[..] else { return Err(bad_grid().into()) };
    let (lo, hi, count) = (
        lo.parse::<f64>().map_err(|_| bad_grid())?,
        hi.parse::<f64>().map_err(|_| bad_grid())?,
        count.parse::<usize>().map_err(|_| bad_grid())?,
    );
    if count < 2 || !(lo < hi) {
        return Err(bad_grid().into());
    }
    let grid: Vec<f64> = (0..count).map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64).collect();
    let modulus = continuity_modulus(&k, &set, &grid, args.delta)?;
    let lipschitz = args.lipschitz.or(match k {
        MarkovKernel::Gaussian { width } => Some(gaussian_lipschitz_constant(width)),
        _ => None,
    });
    let excess = match (lipschitz, modulus.modulus()) {
        (Some(l), Some(_)) => Some(lipschitz_excess(&k, &set, &grid, args.delta, l)?),
        _ => None,
    };
    let tol = 1e-9;
    let mut r = Report::new("kernel", None).tolerance("lipschitz_excess", tol);
    r.inputs = json!({ "kernel": k.to_string(), "set": set.to_string(), "grid": [lo, hi, count], "delta": args.delta,
                       "lipschitz": lipschitz });
    r.sequence = modulus.modulus().into_iter().collect();
    r.passed = excess.is_none_or(|e| e <= tol);
    r.verdict = match (modulus.modulus(), excess) {
        (None, _) => "not-applicable",
        (Some(_), Some(e)) if e > tol => "lipschitz-violated",
        (Some(_), Some(_)) => "lipschitz-holds",
        (Some(_), None) => "measured",
    }
    .into();
    r.details = json!({ "modulus": modulus, "lipschitz_excess": excess });
    let failures = emit(vec![("kernel".into(), r)], args.out.as_deref())?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn reproduce_paper(args: ReproduceArgs) -> Result<(), Failure> {
    let seed = RunConfig { seed: args.seed, ..Default::default() }.resolved_seed()?;
    let config = ReproduceConfig {
        eps: args.eps,
        dims: (!args.dims.is_empty()).then_some(args.dims),
        seed,
    };
    let table = reproduce(&config)?;
    stdout(&table.to_text());
    if let Some(path) = &args.out {
        write_file(path, &serde_json::to_string_pretty(&table).expect("table serializes"))?;
    }
    let failures: Vec<_> = table
        .rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| json!({ "claim": r.id, "verdict": r.verdict }))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Probe(a) => probe(a),
        Command::Sample(a) => sample(a),
        Command::Kernel(a) => kernel(a),
        Command::ReproducePaper(a) => reproduce_paper(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(list)) => {
            eprintln!("{}", serde_json::to_string(&json!({ "failures": list })).unwrap());
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
