use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::audit::write_trace_csv;
use crate::error::{Error, Result};
use crate::fmt_decimal;
use crate::model::Instance;
use crate::policy::{Cafe, FtCommittedPolicy, Policy, StaticOraclePolicy, UnconstrainedBaseline};
use crate::sim::{regret, run_episode_with, RegretRecord, SimRng};
use crate::solver::{solve_lipschitz_optimal, DEFAULT_GRID};

pub const RESULTS_HEADER: [&str; 9] = [
    "instance",
    "policy",
    "w",
    "T",
    "rep",
    "seed",
    "regret",
    "explore_len",
    "w_star_correct",
];

/// Which rule an FT-committed policy starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    /// Optimal rule for a parameter guessed uniformly at random per episode.
    Uniform,
    /// Optimal rule for the next parameter after the true one (cyclically).
    Wrong,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    /// `epsilon: None` uses the horizon schedule.
    Cafe {
        epsilon: Option<f64>,
    },
    StaticOracle,
    FtCommitted {
        prior: PriorChoice,
    },
    Unconstrained,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Cafe { .. } => "cafe",
            PolicySpec::StaticOracle => "static-oracle",
            PolicySpec::FtCommitted { .. } => "ft-committed",
            PolicySpec::Unconstrained => "unconstrained",
        }
    }

    fn build<'a>(
        &self,
        instance: &'a Instance,
        w: usize,
        horizon: usize,
        grid: usize,
        rng: &mut SimRng,
    ) -> Result<Box<dyn Policy + 'a>> {
        Ok(match *self {
            PolicySpec::Cafe { epsilon: None } => {
                let eps = crate::policy::epsilon_schedule(horizon, instance.model.meta().learn_exponent)?;
                Box::new(Cafe::new(instance, horizon, eps, grid)?)
            }
            PolicySpec::Cafe { epsilon: Some(eps) } => Box::new(Cafe::new(instance, horizon, eps, grid)?),
            PolicySpec::StaticOracle => Box::new(StaticOraclePolicy::new(instance, w, grid)?),
            PolicySpec::FtCommitted { prior } => {
                let n = instance.num_params();
                let guess = match prior {
                    PriorChoice::Uniform => rng.gen_range(0..n),
                    PriorChoice::Wrong => (w + 1) % n,
                    PriorChoice::Fixed(g) => g,
                };
                Box::new(FtCommittedPolicy::for_guess(instance, guess, grid)?)
            }
            PolicySpec::Unconstrained => Box::new(UnconstrainedBaseline::new(instance)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec<'a> {
    pub instance: &'a Instance,
    pub policy: PolicySpec,
    pub horizons: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    /// True parameters to simulate; `None` means all of them.
    pub params: Option<Vec<usize>>,
    /// Decision grid for the benchmark and for policies that solve rules.
    pub grid: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Write every episode's trace CSV into this directory.
    pub trace_dir: Option<PathBuf>,
}

impl<'a> ExperimentSpec<'a> {
    pub fn new(
        instance: &'a Instance,
        policy: PolicySpec,
        horizons: Vec<usize>,
        reps: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            instance,
            policy,
            horizons,
            reps,
            base_seed,
            params: None,
            grid: DEFAULT_GRID,
            jobs: None,
            trace_dir: None,
        }
    }
}

/// Aggregate over the replications of one `(T, w)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub horizon: usize,
    pub w: usize,
    pub reps: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub max_regret: f64,
    pub mean_explore_len: f64,
    /// Fraction of episodes that learned a wrong parameter or never learned;
    /// `None` for policies that do not learn.
    pub misidentification_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Benchmark `U_K(w)` per parameter.
    pub benchmark: Vec<f64>,
    /// Ordered by `(T, w, rep)`.
    pub records: Vec<RegretRecord>,
    /// Ordered by `(T, w)`.
    pub cells: Vec<CellSummary>,
}

impl ExperimentOutput {
    /// `max_w mean_regret(T, w)` for the given horizon.
    pub fn max_mean_regret(&self, horizon: usize) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.horizon == horizon)
            .map(|c| c.mean_regret)
            .reduce(f64::max)
    }

    pub fn cell(&self, horizon: usize, w: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.horizon == horizon && c.w == w)
    }
}

/// Static benchmark `U_K(w)` for every parameter.
pub fn benchmark_values(instance: &Instance, grid: usize) -> Result<Vec<f64>> {
    (0..instance.num_params())
        .map(|w| solve_lipschitz_optimal(instance, w, 0.0, grid).map(|r| r.value))
        .collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one replication, a pure function of its coordinates.
pub fn derive_seed(base: u64, horizon: usize, w: usize, rep: usize) -> u64 {
    [horizon as u64, w as u64, rep as u64]
        .iter()
        .fold(splitmix(base), |acc, v| splitmix(acc ^ splitmix(*v)))
}

struct Job {
    horizon: usize,
    w: usize,
    rep: usize,
    seed: u64,
}

fn run_job(spec: &ExperimentSpec<'_>, benchmark: &[f64], job: &Job) -> Result<RegretRecord> {
    let mut rng = SimRng::seed_from_u64(job.seed);
    let mut policy = spec
        .policy
        .build(spec.instance, job.w, job.horizon, spec.grid, &mut rng)?;
    let record_trace = spec.trace_dir.is_some();
    let ep = run_episode_with(
        policy.as_mut(),
        spec.instance,
        job.w,
        job.horizon,
        &mut rng,
        record_trace,
    )?;
    if let Some(dir) = &spec.trace_dir {
        let path = dir.join(format!(
            "{}_{}_w{}_T{}_rep{}.csv",
            sanitize(&spec.instance.name),
            spec.policy.name(),
            job.w,
            job.horizon,
            job.rep
        ));
        let file = fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        write_trace_csv(&ep.trace, &spec.instance.contexts, std::io::BufWriter::new(file))?;
    }
    Ok(RegretRecord {
        instance: spec.instance.name.clone(),
        policy: spec.policy.name().to_string(),
        w: job.w,
        horizon: job.horizon,
        rep: job.rep,
        seed: job.seed,
        regret: regret(&ep, benchmark[job.w]),
        explore_len: ep.explore_length,
        w_star_correct: ep.w_star_correct,
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn summarize(horizon: usize, w: usize, records: &[RegretRecord]) -> CellSummary {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.regret).sum::<f64>() / n;
    let var = if records.len() > 1 {
        records.iter().map(|r| (r.regret - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let learned: Vec<bool> = records.iter().filter_map(|r| r.w_star_correct).collect();
    CellSummary {
        horizon,
        w,
        reps: records.len(),
        mean_regret: mean,
        std_regret: var.sqrt(),
        max_regret: records.iter().map(|r| r.regret).fold(f64::NEG_INFINITY, f64::max),
        mean_explore_len: records.iter().map(|r| r.explore_len as f64).sum::<f64>() / n,
        misidentification_rate: (!learned.is_empty())
            .then(|| learned.iter().filter(|ok| !**ok).count() as f64 / learned.len() as f64),
    }
}

/// Run every `(T, w, rep)` episode and aggregate per `(T, w)`.
///
/// Output depends only on the spec and `base_seed`, not on scheduling.
pub fn monte_carlo(spec: &ExperimentSpec<'_>) -> Result<ExperimentOutput> {
    if spec.reps == 0 {
        return Err(Error::Domain(0.0, "reps must be at least 1".into()));
    }
    if spec.horizons.is_empty() {
        return Err(Error::Domain(0.0, "no horizons given".into()));
    }
    let params: Vec<usize> = spec
        .params
        .clone()
        .unwrap_or_else(|| (0..spec.instance.num_params()).collect());
    if let Some(&w) = params.iter().find(|&&w| w >= spec.instance.num_params()) {
        return Err(Error::UnknownParameter(w));
    }
    if let Some(dir) = &spec.trace_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let benchmark = benchmark_values(spec.instance, spec.grid)?;

    let mut jobs = Vec::new();
    for &horizon in &spec.horizons {
        for &w in &params {
            for rep in 0..spec.reps {
                jobs.push(Job {
                    horizon,
                    w,
                    rep,
                    seed: derive_seed(spec.base_seed, horizon, w, rep),
                });
            }
        }
    }
    let run_all = || -> Result<Vec<RegretRecord>> {
        jobs.par_iter()
            .map(|job| run_job(spec, &benchmark, job))
            .collect()
    };
    let records = match spec.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Resource(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };

    let cells = records
        .chunks(spec.reps)
        .map(|chunk| summarize(chunk[0].horizon, chunk[0].w, chunk))
        .collect();
    Ok(ExperimentOutput {
        benchmark,
        records,
        cells,
    })
}

/// Results CSV in the column order of [`RESULTS_HEADER`].
pub fn write_results_csv<W: Write>(records: &[RegretRecord], param_labels: &[String], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RESULTS_HEADER)?;
    for r in records {
        wtr.write_record([
            r.instance.clone(),
            r.policy.clone(),
            param_labels[r.w].clone(),
            r.horizon.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            fmt_decimal(r.regret),
            r.explore_len.to_string(),
            r.w_star_correct.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
