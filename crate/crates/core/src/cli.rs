//! The `cafe` command-line driver.
//!
//! Exit codes: 0 ok, 1 audit violations, 2 unknown instance or invalid
//! arguments, 3 I/O, 4 schema, 5 resource guard.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audit::{audit, read_kappa_table, read_trace_csv, FairnessKind, FairnessSpec, Kappa};
use crate::catalog::{self, Params};
use crate::error::Error;
use crate::fmt_decimal;
use crate::model::{ContextSet, Instance, Metric};
use crate::sim::{
    benchmark_values, dp_optimal_value, monte_carlo, write_results_csv, ExperimentSpec, PolicySpec,
    PriorChoice,
};
use crate::solver::{solve_lipschitz_optimal, DEFAULT_GRID};

/// Environment variable naming the default directory for `simulate` output.
pub const OUTPUT_DIR_ENV: &str = "CAFE_OUTPUT_DIR";

pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATIONS: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const SCHEMA: i32 = 4;
    pub const RESOURCE: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(
    name = "cafe",
    version,
    about = "Fair sequential decision-making: solve, simulate, audit, dp"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal static K-Lipschitz rule and its expected utility.
    Solve(SolveArgs),
    /// Monte Carlo regret experiment, written as CSV.
    Simulate(SimulateArgs),
    /// Check a trace CSV for fairness violations.
    Audit(AuditArgs),
    /// Exact small-horizon optimal values under FH and FT.
    Dp(DpArgs),
    /// List catalog instances and their parameters.
    List,
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Catalog instance name (see `list`).
    #[arg(long)]
    instance: String,
    /// Builder parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Override the instance's Lipschitz fairness constant.
    #[arg(long = "k")]
    k: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// True parameter, by index or label.
    #[arg(long, default_value = "0")]
    w: String,
    /// Decision grid points.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Lower bound of the decision space.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Also write the rule as `context,decision` CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyName {
    Cafe,
    StaticOracle,
    FtCommitted,
    Unconstrained,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    policy: PolicyName,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', required = true)]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Fixed CaFE exploration decision instead of the horizon schedule.
    #[arg(long)]
    epsilon: Option<f64>,
    /// FT-committed prior: `uniform`, `wrong`, or a parameter index/label.
    #[arg(long, default_value = "uniform")]
    prior: String,
    /// Restrict to these true parameters (indices or labels).
    #[arg(long, value_delimiter = ',')]
    w: Vec<String>,
    /// Results CSV path; defaults to $CAFE_OUTPUT_DIR/results.csv, else stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write one trace CSV per episode into this directory.
    #[arg(long)]
    dump_traces: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Ft,
    Fh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Trace CSV with header `t,context,decision,utility`.
    #[arg(long)]
    trace: PathBuf,
    /// Take contexts, metric and K from a catalog instance.
    #[arg(long, conflicts_with = "metric")]
    instance: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE", requires = "instance")]
    params: Vec<String>,
    /// Metric CSV: header `context,<label>...`, then one row per context.
    #[arg(long)]
    metric: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Constant Lipschitz constant.
    #[arg(long = "k", conflicts_with = "kappa_table")]
    k: Option<f64>,
    /// Step-function K(s) as `s,value` rows.
    #[arg(long)]
    kappa_table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct DpArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value = "0")]
    w: String,
}

/// Map a library error to its documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => exit::IO,
        Error::Schema { .. } | Error::UnknownContext(_) => exit::SCHEMA,
        Error::Resource(_) => exit::RESOURCE,
        _ => exit::USAGE,
    }
}

fn parse_params(raw: &[String]) -> Result<Params, Error> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Model(format!("expected KEY=VALUE, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Model(format!("parameter `{k}`: {e}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn load_instance(args: &InstanceArgs) -> Result<Instance, Error> {
    let inst = catalog::build(&args.instance, &parse_params(&args.params)?)?;
    match args.k {
        Some(k) => inst.with_k(k),
        None => Ok(inst),
    }
}

fn resolve_param(inst: &Instance, raw: &str) -> Result<usize, Error> {
    if let Some(i) = inst.model.param_index(raw) {
        return Ok(i);
    }
    match raw.parse::<usize>() {
        Ok(i) if i < inst.num_params() => Ok(i),
        Ok(i) => Err(Error::UnknownParameter(i)),
        Err(_) => Err(Error::Model(format!(
            "unknown parameter `{raw}` (known: {:?})",
            inst.model.params()
        ))),
    }
}

fn create(path: &Path) -> Result<io::BufWriter<fs::File>, Error> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<fs::File, Error> {
    fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let inst = load_instance(&args.instance)?;
    let w = resolve_param(&inst, &args.w)?;
    let rep = solve_lipschitz_optimal(&inst, w, args.epsilon, args.grid)?;
    let rule: Vec<String> = rep
        .rule
        .values
        .iter()
        .enumerate()
        .map(|(c, x)| format!("{}={}", inst.contexts.label(c), fmt_decimal(*x)))
        .collect();
    writeln!(out, "instance: {}", inst.name)?;
    writeln!(out, "w: {}", inst.model.params()[w])?;
    writeln!(out, "K: {}", fmt_decimal(inst.k))?;
    writeln!(out, "method: {}", rep.method.as_str())?;
    writeln!(out, "grid_step: {}", fmt_decimal(rep.grid_step))?;
    writeln!(out, "rule: {}", rule.join(" "))?;
    writeln!(out, "value: {}", fmt_decimal(rep.value))?;
    if let Some(path) = &args.output {
        let mut wtr = csv::Writer::from_writer(create(path)?);
        wtr.write_record(["context", "decision"])?;
        for (c, x) in rep.rule.values.iter().enumerate() {
            wtr.write_record([inst.contexts.label(c).to_string(), fmt_decimal(*x)])?;
        }
        wtr.flush()?;
    }
    Ok(exit::OK)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let inst = load_instance(&args.instance)?;
    let policy = match args.policy {
        PolicyName::Cafe => PolicySpec::Cafe {
            epsilon: args.epsilon,
        },
        PolicyName::StaticOracle => PolicySpec::StaticOracle,
        PolicyName::Unconstrained => PolicySpec::Unconstrained,
        PolicyName::FtCommitted => PolicySpec::FtCommitted {
            prior: match args.prior.as_str() {
                "uniform" => PriorChoice::Uniform,
                "wrong" => PriorChoice::Wrong,
                other => PriorChoice::Fixed(resolve_param(&inst, other)?),
            },
        },
    };
    let mut spec = ExperimentSpec::new(&inst, policy, args.horizons.clone(), args.reps, args.seed);
    spec.grid = args.grid;
    spec.jobs = args.jobs;
    spec.trace_dir = args.dump_traces.clone();
    if !args.w.is_empty() {
        spec.params = Some(
            args.w
                .iter()
                .map(|w| resolve_param(&inst, w))
                .collect::<Result<_, _>>()?,
        );
    }
    // Fail on an unwritable destination before simulating.
    let output = args
        .output
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(|d| PathBuf::from(d).join("results.csv")));
    let file = output.as_deref().map(create).transpose()?;

    let result = monte_carlo(&spec)?;
    match file {
        Some(f) => write_results_csv(&result.records, inst.model.params(), f)?,
        None => write_results_csv(&result.records, inst.model.params(), &mut *out)?,
    }
    for cell in &result.cells {
        writeln!(
            err,
            "T={} w={} mean_regret={} std={} max={} mean_explore={} misid={}",
            cell.horizon,
            inst.model.params()[cell.w],
            fmt_decimal(cell.mean_regret),
            fmt_decimal(cell.std_regret),
            fmt_decimal(cell.max_regret),
            fmt_decimal(cell.mean_explore_len),
            cell.misidentification_rate
                .map(fmt_decimal)
                .unwrap_or_else(|| "-".into()),
        )?;
    }
    Ok(exit::OK)
}

/// Parse a metric CSV: header `context,<l1>,...,<ln>`, then rows `<li>,d...`.
pub fn read_metric_csv<R: io::Read>(input: R) -> Result<(ContextSet, Metric), Error> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let labels: Vec<String> = rdr
        .headers()?
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let contexts = ContextSet::new(labels.clone()).map_err(|e| Error::Schema {
        line: 1,
        message: e.to_string(),
    })?;
    let mut d = vec![Vec::new(); labels.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let label = rec.get(0).unwrap_or("").trim();
        let row = contexts.index_of(label).ok_or_else(|| Error::Schema {
            line,
            message: format!("unknown context `{label}`"),
        })?;
        d[row] = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Schema {
                line,
                message: e.to_string(),
            })?;
    }
    let metric = Metric::new(d).map_err(|e| Error::Schema {
        line: 0,
        message: e.to_string(),
    })?;
    Ok((contexts, metric))
}

fn cmd_audit(args: &AuditArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let (contexts, metric, default_k) = match (&args.instance, &args.metric) {
        (Some(name), _) => {
            let inst = catalog::build(name, &parse_params(&args.params)?)?;
            (inst.contexts.clone(), inst.metric.clone(), Some(inst.k))
        }
        (None, Some(path)) => {
            let (c, m) = read_metric_csv(open(path)?)?;
            (c, m, None)
        }
        (None, None) => {
            return Err(Error::Model("either --instance or --metric is required".into()));
        }
    };
    let kappa = match (&args.kappa_table, args.k.or(default_k)) {
        (Some(path), _) => read_kappa_table(open(path)?)?,
        (None, Some(k)) => Kappa::Constant(k),
        (None, None) => {
            return Err(Error::Model(
                "--k or --kappa-table is required with --metric".into(),
            ))
        }
    };
    let trace = read_trace_csv(open(&args.trace)?, &contexts)?;
    let spec = FairnessSpec {
        kind: match args.kind {
            KindArg::Ft => FairnessKind::AcrossTime,
            KindArg::Fh => FairnessKind::InHindsight,
        },
        kappa,
        metric,
    };
    let violations = audit(&trace, &spec)?;
    match args.format {
        FormatArg::Csv => {
            let mut wtr = csv::Writer::from_writer(&mut *out);
            wtr.write_record(["t", "t_prime", "slack"])?;
            for v in &violations {
                wtr.write_record([v.earlier.to_string(), v.later.to_string(), fmt_decimal(v.slack)])?;
            }
            wtr.flush()?;
        }
        FormatArg::Text => {
            for v in &violations {
                writeln!(
                    out,
                    "violation t={} t'={} slack={}",
                    v.earlier,
                    v.later,
                    fmt_decimal(v.slack)
                )?;
            }
            writeln!(out, "{} steps, {} violations", trace.len(), violations.len())?;
        }
    }
    Ok(if violations.is_empty() {
        exit::OK
    } else {
        exit::VIOLATIONS
    })
}

fn cmd_dp(args: &DpArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let inst = load_instance(&args.instance)?;
    let w = resolve_param(&inst, &args.w)?;
    let fh = dp_optimal_value(&inst, w, args.horizon, FairnessKind::InHindsight, args.grid)?;
    let ft = dp_optimal_value(&inst, w, args.horizon, FairnessKind::AcrossTime, args.grid)?;
    let u_k = benchmark_values(&inst, args.grid)?[w];
    let bound = args.horizon as f64 * u_k + 2.0 * inst.model.meta().bound;
    writeln!(out, "instance: {}", inst.name)?;
    writeln!(out, "T: {}", args.horizon)?;
    writeln!(out, "FH: {}", fmt_decimal(fh))?;
    writeln!(out, "FT: {}", fmt_decimal(ft))?;
    writeln!(out, "U_K: {}", fmt_decimal(u_k))?;
    writeln!(
        out,
        "bound T*U_K+2B = {}: FH {} FT {}",
        fmt_decimal(bound),
        if fh <= bound + 1e-9 { "ok" } else { "VIOLATED" },
        if ft <= bound + 1e-9 { "ok" } else { "VIOLATED" },
    )?;
    Ok(exit::OK)
}

fn cmd_list(out: &mut dyn Write) -> Result<i32, Error> {
    for e in catalog::entries() {
        let defaults: Vec<String> = e.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(out, "{:<12} {} [{}]", e.name, e.summary, defaults.join(", "))?;
    }
    Ok(exit::OK)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Audit(a) => cmd_audit(a, out),
        Command::Dp(a) => cmd_dp(a, out),
        Command::List => cmd_list(out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
