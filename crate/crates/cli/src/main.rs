//! Batch entry point: instance generation, solving, oracles, MILP export,
//! benchmarking and parameter tuning.
//!
//! Exit codes: 1 usage error, 2 io/parse error, 3 infeasibility.

mod params;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rckrmsf::engine::{self, AlnsParams};
use rckrmsf::exact::{self, milp, BRUTE_FORCE_MAX_DEMANDS};
use rckrmsf::instance::Instance;
use rckrmsf::instances::{
    self, read_instance, write_instance, write_solution, ConstraintSpec, Family, GenSpec,
};
use rckrmsf::tuner::{self, GaConfig};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<params::ParamFileError> for CliError {
    fn from(e: params::ParamFileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<instances::ReadError> for CliError {
    fn from(e: instances::ReadError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<instances::GenError> for CliError {
    fn from(e: instances::GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<engine::EngineError> for CliError {
    fn from(e: engine::EngineError) -> Self {
        match e {
            engine::EngineError::Params(p) => CliError::Usage(p.to_string()),
            engine::EngineError::Construct(c) => CliError::Infeasible(c.to_string()),
        }
    }
}

impl From<exact::ExactError> for CliError {
    fn from(e: exact::ExactError) -> Self {
        match e {
            exact::ExactError::TooLarge(_) => CliError::Usage(e.to_string()),
            exact::ExactError::Infeasible => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<tuner::TuneError> for CliError {
    fn from(e: tuner::TuneError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "rckrmsf",
    version,
    about = "Reliability-constrained k-rooted minimum spanning forest solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances.
    Generate(GenerateArgs),
    /// Solve an instance with the adaptive search.
    Solve(SolveArgs),
    /// Exact results at desk scale: exhaustive optimum or contracted MST.
    Oracle(OracleArgs),
    /// Export the flow MILP of an instance in MPS format.
    ExportMilp(ExportMilpArgs),
    /// Solve a directory of instances and tabulate costs, gaps and times.
    Bench(BenchArgs),
    /// Tune engine parameters with the genetic meta-tuner.
    Tune(TuneArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Family: euclidean, nonmetric, tr, tc or te.
    #[arg(long)]
    family: String,
    /// Total vertex count.
    #[arg(long)]
    n: usize,
    /// Supply vertex count (must be 1 for tr/tc/te).
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Minimum path reliability (euclidean/nonmetric families).
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest arc delay W (tr/tc/te families).
    #[arg(long)]
    max_delay: Option<u32>,
    /// Path delay bound L (tr/tc/te families).
    #[arg(long)]
    bound: Option<f64>,
    /// Seed of the first instance; instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances to generate.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Engine parameter overrides; flags win over the parameter file.
#[derive(Args, Clone)]
struct ParamOverrides {
    /// Parameter file (key=value lines).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    zeta1: Option<f64>,
    #[arg(long)]
    zeta2: Option<f64>,
    #[arg(long)]
    zeta3: Option<f64>,
    #[arg(long)]
    phi1: Option<usize>,
    #[arg(long)]
    phi2: Option<usize>,
    #[arg(long)]
    far_threshold: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl ParamOverrides {
    fn resolve(&self) -> Result<AlnsParams, CliError> {
        let mut p = match &self.params {
            Some(path) => params::load_params(path, AlnsParams::default())?,
            None => AlnsParams::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { p.$field = v; })*
            };
        }
        apply!(theta0, epsilon, lambda, eta, zeta1, zeta2, zeta3, phi1, phi2, restarts);
        if let Some(v) = self.far_threshold {
            p.far_threshold = Some(v);
        }
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    #[arg(long)]
    instance: PathBuf,
    /// Master seed for the restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solution file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    overrides: ParamOverrides,
}

#[derive(Args)]
struct OracleArgs {
    /// Instance file.
    #[arg(long)]
    instance: PathBuf,
    /// brute-force or contracted-msf.
    #[arg(long, default_value = "brute-force")]
    method: String,
    /// Solution file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportMilpArgs {
    /// Instance file.
    #[arg(long)]
    instance: PathBuf,
    /// MPS file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of .rck instance files.
    #[arg(long)]
    dir: PathBuf,
    /// Master seed; instance i (in name order) uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: ParamOverrides,
}

#[derive(Args)]
struct TuneArgs {
    /// Directory of .rck tuning instances.
    #[arg(long)]
    dir: PathBuf,
    /// Grid file: one `name=v1,v2,...` line per tuned parameter.
    #[arg(long)]
    grids: PathBuf,
    #[arg(long, default_value_t = 20)]
    population: usize,
    #[arg(long, default_value_t = 30)]
    generations: usize,
    /// Truncation share s: top 1/s get s copies in the mating pool.
    #[arg(long, default_value_t = 2)]
    share: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: ParamOverrides,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Oracle(args) => oracle(args),
        Command::ExportMilp(args) => export_milp(args),
        Command::Bench(args) => bench(args),
        Command::Tune(args) => tune(args),
    }
}

fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let family = Family::from_name(&args.family)
        .ok_or_else(|| CliError::Usage(format!("unknown family {:?}", args.family)))?;
    let constraint = if family.is_delay() {
        let (Some(max_delay), Some(bound)) = (args.max_delay, args.bound) else {
            return Err(CliError::Usage(
                "delay families need --max-delay and --bound".into(),
            ));
        };
        ConstraintSpec::Delay { max_delay, bound }
    } else {
        let Some(alpha) = args.alpha else {
            return Err(CliError::Usage(
                "reliability families need --alpha".into(),
            ));
        };
        ConstraintSpec::Reliability { alpha }
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    for i in 0..args.count {
        let seed = args.seed + i;
        let spec = GenSpec {
            family,
            n: args.n,
            m: args.m,
            constraint,
            seed,
        };
        let inst = instances::generate(&spec)?;
        let tag = match constraint {
            ConstraintSpec::Reliability { alpha } => format!("a{alpha}"),
            ConstraintSpec::Delay { max_delay, bound } => format!("w{max_delay}_l{bound}"),
        };
        let path = args.out_dir.join(format!(
            "{}_n{}_m{}_{}_s{}.rck",
            family.name(),
            args.n,
            args.m,
            tag,
            seed
        ));
        write_instance(&inst, &path).map_err(|e| io_err(&path, e))?;
        println!("{}", path.display());
    }
    Ok(())
}

/// Oracle gap header lines for desk-scale instances.
fn oracle_gap_lines(inst: &Instance, best_cost: f64) -> Result<String, CliError> {
    if inst.demand_count() > BRUTE_FORCE_MAX_DEMANDS {
        return Ok(String::new());
    }
    let (_, opt) = exact::brute_force(inst)?;
    let gap = if opt > 0.0 {
        100.0 * (best_cost - opt) / opt
    } else {
        0.0
    };
    let mut out = String::new();
    writeln!(out, "oracle_cost: {opt:.6}").unwrap();
    writeln!(out, "gap_vs_oracle: {:.2}%", round2(gap)).unwrap();
    Ok(out)
}

fn solve(args: SolveArgs) -> Result<(), CliError> {
    let params = args.overrides.resolve()?;
    let inst = read_instance(&args.instance)?;
    let outcome = engine::solve(&inst, &params, args.seed)?;
    if let Some(out) = &args.out {
        write_solution(&outcome.best, &inst, out).map_err(|e| io_err(out, e))?;
    }
    let label = args.instance.display().to_string();
    let mut report = format!("instance: {label}\n");
    report.push_str(&oracle_gap_lines(&inst, outcome.best_cost)?);
    report.push_str(&engine::render_report(&outcome, &label));
    match &args.report {
        Some(path) => std::fs::write(path, report).map_err(|e| io_err(path, e))?,
        None => print!("{report}"),
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let (forest, cost, method) = match args.method.as_str() {
        "brute-force" => {
            let (f, c) = exact::brute_force(&inst)?;
            (f, c, "brute-force")
        }
        "contracted-msf" => {
            let (f, c) = exact::contracted_msf(&inst);
            (f, c, "contracted-msf")
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown method {other:?}; use brute-force or contracted-msf"
            )))
        }
    };
    println!("method: {method}");
    println!("cost: {cost:.6}");
    for v in inst.demands() {
        let p = forest.parent(v).expect("oracle forests are complete");
        println!("{} {}", v + 1, p + 1);
    }
    if let Some(out) = &args.out {
        write_solution(&forest, &inst, out).map_err(|e| io_err(out, e))?;
    }
    Ok(())
}

fn export_milp(args: ExportMilpArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    milp::export_milp(&inst, &args.out).map_err(|e| io_err(&args.out, e))?;
    println!("{}", args.out.display());
    Ok(())
}

/// Rounds to two decimals and drops the sign of a negative zero, which
/// float noise around an exact oracle match would otherwise produce.
fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

struct BenchRow {
    name: String,
    best: f64,
    avg: f64,
    worst: f64,
    gap_best: Option<f64>,
    gap_avg: Option<f64>,
    time_s: f64,
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let params = args.overrides.resolve()?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .map_err(|e| io_err(&args.dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "rck"))
        .collect();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .rck instances in {}",
            args.dir.display()
        )));
    }
    paths.sort();

    let rows: Vec<Result<BenchRow, CliError>> = paths
        .par_iter()
        .enumerate()
        .map(|(idx, path)| bench_one(path, &params, args.seed + idx as u64))
        .collect();

    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        table.push(row?);
    }

    println!("instance best avg worst gap_best% gap_avg% time_s");
    let fmt_gap = |g: Option<f64>| g.map_or("-".to_string(), |v| format!("{:.2}", round2(v)));
    for row in &table {
        println!(
            "{} {:.2} {:.2} {:.2} {} {} {:.2}",
            row.name,
            row.best,
            row.avg,
            row.worst,
            fmt_gap(row.gap_best),
            fmt_gap(row.gap_avg),
            row.time_s
        );
    }
    let count = table.len() as f64;
    let mean = |f: fn(&BenchRow) -> f64| table.iter().map(f).sum::<f64>() / count;
    let gaps_best: Vec<f64> = table.iter().filter_map(|r| r.gap_best).collect();
    let gaps_avg: Vec<f64> = table.iter().filter_map(|r| r.gap_avg).collect();
    let mean_opt = |v: &[f64]| {
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    println!(
        "average {:.2} {:.2} {:.2} {} {} {:.2}",
        mean(|r| r.best),
        mean(|r| r.avg),
        mean(|r| r.worst),
        fmt_gap(mean_opt(&gaps_best)),
        fmt_gap(mean_opt(&gaps_avg)),
        mean(|r| r.time_s)
    );
    Ok(())
}

fn bench_one(path: &Path, params: &AlnsParams, seed: u64) -> Result<BenchRow, CliError> {
    let inst = read_instance(path)?;
    let outcome = engine::solve(&inst, params, seed)?;
    let costs: Vec<f64> = outcome.runs.iter().map(|r| r.best_cost).collect();
    let best = outcome.best_cost;
    let avg = costs.iter().sum::<f64>() / costs.len() as f64;
    let worst = costs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let reference = if inst.demand_count() <= BRUTE_FORCE_MAX_DEMANDS {
        Some(exact::brute_force(&inst)?.1)
    } else {
        None
    };
    let gap = |ub: f64| {
        reference.map(|r| if r > 0.0 { 100.0 * (ub - r) / r } else { 0.0 })
    };
    let time_s = outcome
        .runs
        .iter()
        .map(|r| r.wall_time.as_secs_f64())
        .sum::<f64>()
        / outcome.runs.len() as f64;
    Ok(BenchRow {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
        best,
        avg,
        worst,
        gap_best: gap(best),
        gap_avg: gap(avg),
        time_s,
    })
}

fn tune(args: TuneArgs) -> Result<(), CliError> {
    let base = args.overrides.resolve()?;
    let grids = params::load_grids(&args.grids)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)
        .map_err(|e| io_err(&args.dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "rck"))
        .collect();
    paths.sort();
    let instances: Vec<Instance> = paths
        .iter()
        .map(|p| read_instance(p).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let config = GaConfig {
        population: args.population,
        generations: args.generations,
        selection_share: args.share,
    };
    let report = tuner::ga_tune(&instances, &grids, &config, &base, args.seed)?;
    print!("{}", report.render(&grids));
    Ok(())
}
