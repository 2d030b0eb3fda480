//! Command-line front end: case generation, time-series aggregation, single
//! solves with reconstruction reports, and full benchmark sweeps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use storax::bench::{emit_report, run_sweep, SweepSpec};
use storax::casegen::{generate, CaseConfig, Variant};
use storax::esom::{backend_from_env, build_model, emit_lp, solve, LpFormat, SolveStatus};
use storax::io::{load_instance, load_timeseries, save_instance, save_json, save_timeseries};
use storax::reconstruct::reconstruct_report;
use storax_core::aggregation::{
    aggregate_crh, aggregate_rd, aggregate_rh, aggregation_error, full_resolution, Aggregation,
    AggregationMode,
};
use storax_core::formulation::{ExponentRule, Method};
use storax_core::timeseries::HOURS_PER_DAY;

#[derive(Parser)]
#[command(name = "storax", version, about = "Storage-aware time-series aggregation benchmarks")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic case (time series CSV + instance JSON).
    Gen(GenArgs),
    /// Aggregate a time series and report the fit error.
    Aggregate(AggregateArgs),
    /// Solve one (method, level) cell and write a reconstruction report.
    Solve(SolveArgs),
    /// Run the full benchmark sweep.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    nodes: usize,
    #[arg(long, default_value_t = 8760)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    variant: VariantArg,
    #[arg(long, default_value = "case")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Standard,
    NoTransport,
    NoDispatchable,
    ElectricityOnly,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::NoTransport => Variant::NoTransport,
            VariantArg::NoDispatchable => Variant::NoDispatchable,
            VariantArg::ElectricityOnly => Variant::ElectricityOnly,
        }
    }
}

#[derive(Args)]
struct AggregateArgs {
    /// Case directory holding timeseries.csv.
    #[arg(long, default_value = "case")]
    case: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Representative steps: hours for rh/crh, total hours (days * 24) for rd.
    #[arg(long)]
    steps: usize,
    /// Optional JSON output path for the aggregation.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rd,
    Rh,
    Crh,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "case")]
    case: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Representative hours; ignored for the full-resolution method.
    #[arg(long, default_value_t = 96)]
    level: usize,
    /// Optional LP/MPS export path (format chosen by extension).
    #[arg(long)]
    export: Option<PathBuf>,
    /// Where to write the reconstruction report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Keep full hourly level profiles in the report.
    #[arg(long)]
    keep_levels: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Proposed,
    Superposition,
    MinMax,
    Full,
    Chrono,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Proposed => Method::Proposed,
            MethodArg::Superposition => Method::Superposition,
            MethodArg::MinMax => Method::MinMax,
            MethodArg::Full => Method::FullResolution,
            MethodArg::Chrono => Method::Chrono,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "case")]
    case: PathBuf,
    /// Representative-hour levels, ascending.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Run cells one at a time for clean timing.
    #[arg(long)]
    sequential_timing: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

/// Optional TOML file mirroring the sweep flags.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    levels: Option<Vec<usize>>,
    methods: Option<Vec<Method>>,
    repetitions: Option<usize>,
    sequential_timing: Option<bool>,
    workers: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args, file),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let config = CaseConfig {
        seed: args.seed,
        num_nodes: args.nodes,
        horizon: args.horizon,
        variant: args.variant.into(),
    };
    let (series, instance) = generate(&config)?;
    std::fs::create_dir_all(&args.out)?;
    save_timeseries(&series, &args.out.join("timeseries.csv"))?;
    save_instance(&instance, &args.out.join("instance.json"))?;
    println!(
        "wrote {} ({} attributes, {} hours, {} nodes)",
        args.out.display(),
        series.attributes().len(),
        series.horizon(),
        instance.nodes.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn build_aggregation(
    series: &storax_core::timeseries::FullTimeSeries,
    mode: AggregationMode,
    steps: usize,
) -> Result<Aggregation> {
    Ok(match mode {
        AggregationMode::Rh => aggregate_rh(series, steps)?,
        AggregationMode::Rd => {
            if steps % HOURS_PER_DAY != 0 {
                bail!("representative-day aggregation needs steps divisible by 24");
            }
            aggregate_rd(series, steps / HOURS_PER_DAY)?
        }
        AggregationMode::Crh => aggregate_crh(series, steps)?,
        AggregationMode::Full => full_resolution(series),
    })
}

fn cmd_aggregate(args: AggregateArgs) -> Result<ExitCode> {
    let series = load_timeseries(&args.case.join("timeseries.csv"))?;
    let mode = match args.mode {
        ModeArg::Rd => AggregationMode::Rd,
        ModeArg::Rh => AggregationMode::Rh,
        ModeArg::Crh => AggregationMode::Crh,
    };
    let agg = build_aggregation(&series, mode, args.steps)?;
    let per_attr = aggregation_error(&series, &agg);
    let rmse = (per_attr.iter().map(|e| e * e).sum::<f64>() / per_attr.len() as f64).sqrt();
    println!(
        "mode={mode:?} steps={} horizon={} rmse={rmse:.6}",
        agg.step_count,
        agg.horizon()
    );
    if let Some(out) = args.out {
        save_json(&agg, &out)?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let series = load_timeseries(&args.case.join("timeseries.csv"))?;
    let instance = load_instance(&args.case.join("instance.json"))?;
    let method: Method = args.method.into();
    let agg = build_aggregation(&series, method.aggregation_mode(), args.level)?;
    let lp = build_model(&instance, &agg, method, ExponentRule::Corrected)?;
    if let Some(path) = &args.export {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("mps") => LpFormat::Mps,
            _ => LpFormat::LpFile,
        };
        emit_lp(&lp, path, format)?;
        println!("wrote {}", path.display());
    }
    let backend = backend_from_env();
    let solution = solve(&lp, &backend)?;
    println!(
        "method={} level={} status={:?} objective={:.4} vars={} rows={} ({:.3}s)",
        method.label(),
        agg.step_count,
        solution.status,
        solution.objective,
        lp.variables.len(),
        lp.rows.len(),
        solution.solve_seconds
    );
    if solution.status != SolveStatus::Optimal {
        return Ok(ExitCode::FAILURE);
    }
    let report = reconstruct_report(&solution, &instance, &agg, method, args.keep_levels)?;
    for unit in &report.units {
        println!(
            "  {}: E={:.3} C={:.3} audit={} cycles={}",
            unit.key,
            unit.energy_cap,
            unit.power_cap,
            if unit.audit.passed { "pass" } else { "FAIL" },
            unit.cycles.map_or("n/a".to_string(), |c| format!("{c:.2}")),
        );
    }
    if let Some(path) = &args.report {
        save_json(&report, path)?;
        println!("wrote {}", path.display());
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_sweep(args: SweepArgs, file: FileConfig) -> Result<ExitCode> {
    let series = load_timeseries(&args.case.join("timeseries.csv"))?;
    let instance = load_instance(&args.case.join("instance.json"))?;
    let defaults = SweepSpec::default();
    let spec = SweepSpec {
        levels: if args.levels.is_empty() {
            file.levels.unwrap_or(defaults.levels)
        } else {
            args.levels
        },
        methods: if args.methods.is_empty() {
            file.methods.unwrap_or(defaults.methods)
        } else {
            args.methods.into_iter().map(Method::from).collect()
        },
        repetitions: if args.reps != 5 {
            args.reps
        } else {
            file.repetitions.unwrap_or(defaults.repetitions)
        },
        sequential_timing: args.sequential_timing
            || file.sequential_timing.unwrap_or(defaults.sequential_timing),
        workers: args.workers.or(file.workers),
    };
    let backend = backend_from_env();
    let result = run_sweep(&instance, &series, &spec, &backend)?;
    emit_report(&result, &args.out)?;
    let failed: Vec<String> = result
        .records
        .iter()
        .filter(|r| !r.ok())
        .map(|r| format!("{}@{} ({})", r.method, r.level, r.status))
        .collect();
    println!(
        "reference objective {:.4}; {} cells, {} failed; report in {}",
        result.reference.objective,
        result.records.len(),
        failed.len(),
        args.out.display()
    );
    for f in &failed {
        println!("  failed: {f}");
    }
    Ok(if result.all_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
