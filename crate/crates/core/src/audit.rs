//! Temporal fairness auditing.
//!
//! Fairness across time (FT) is two-sided: `|x_t - x_t'| <= K(|t - t'|) d(c_t, c_t')`
//! for every pair of steps. Fairness in hindsight (FH) only forbids
//! decreases: `x_t >= x_t' - K(t - t') d(c_t, c_t')` for every `t' < t`.
//!
//! For constant `K` the FH check reduces to an incremental envelope of
//! per-context lower bounds, see [`Envelope`].

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContextSet, Metric};

/// Slack on every fairness inequality.
pub const FAIRNESS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    /// 1-based time index.
    pub t: usize,
    pub context: usize,
    pub decision: f64,
    pub utility: f64,
}

/// Time-ordered record of decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    steps: Vec<Step>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            steps: Vec::with_capacity(n),
        }
    }

    /// Build from `(t, context, decision, utility)` tuples, checking invariants.
    pub fn from_steps(steps: Vec<Step>) -> Result<Self> {
        let mut trace = Self::with_capacity(steps.len());
        for s in steps {
            trace.push(s)?;
        }
        Ok(trace)
    }

    pub fn push(&mut self, step: Step) -> Result<()> {
        if let Some(last) = self.steps.last() {
            if step.t <= last.t {
                return Err(Error::Schema {
                    line: self.steps.len() + 1,
                    message: format!("time {} does not increase past {}", step.t, last.t),
                });
            }
        }
        if !(0.0..=1.0).contains(&step.decision) {
            return Err(Error::Domain(step.decision, format!("decision at t={}", step.t)));
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    t: usize,
    context: String,
    decision: f64,
    utility: f64,
}

/// Write a trace as CSV with header `t,context,decision,utility`.
pub fn write_trace_csv<W: Write>(trace: &Trace, contexts: &ContextSet, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "context", "decision", "utility"])?;
    for s in trace.steps() {
        wtr.write_record([
            s.t.to_string(),
            contexts.label(s.context).to_string(),
            crate::fmt_decimal(s.decision),
            crate::fmt_decimal(s.utility),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parse a trace CSV, resolving context labels against `contexts`.
///
/// Line numbers in schema errors count the header as line 1.
pub fn read_trace_csv<R: Read>(input: R, contexts: &ContextSet) -> Result<Trace> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = ["t", "context", "decision", "utility"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected header `t,context,decision,utility`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut trace = Trace::new();
    for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
        let context = contexts.index_of(&row.context).ok_or_else(|| Error::Schema {
            line,
            message: format!("unknown context `{}`", row.context),
        })?;
        trace
            .push(Step {
                t: row.t,
                context,
                decision: row.decision,
                utility: row.utility,
            })
            .map_err(|e| Error::Schema {
                line,
                message: e.to_string(),
            })?;
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessKind {
    AcrossTime,
    InHindsight,
}

/// Time-dependent Lipschitz constant `K(s)` indexed by time gap `s >= 1`.
#[derive(Clone)]
pub enum Kappa {
    Constant(f64),
    /// Step function given as `(s, value)` rows sorted by `s`; constant
    /// beyond the last row, and equal to the first row's value before it.
    Table(Vec<(usize, f64)>),
    Function(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Constant(k) => write!(f, "Constant({k})"),
            Kappa::Table(rows) => write!(f, "Table({rows:?})"),
            Kappa::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Kappa {
    pub fn table(mut rows: Vec<(usize, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Model("kappa table is empty".into()));
        }
        rows.sort_by_key(|r| r.0);
        if let Some(r) = rows.iter().find(|r| !(r.1.is_finite() && r.1 >= 0.0)) {
            return Err(Error::Model(format!("kappa({}) = {} must be >= 0", r.0, r.1)));
        }
        Ok(Kappa::Table(rows))
    }

    pub fn at(&self, s: usize) -> f64 {
        match self {
            Kappa::Constant(k) => *k,
            Kappa::Table(rows) => {
                let pos = rows.partition_point(|r| r.0 <= s);
                rows[pos.saturating_sub(1)].1
            }
            Kappa::Function(f) => f(s),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Kappa::Constant(k) => Some(*k),
            _ => None,
        }
    }
}

/// Parse a `s,value` CSV (header optional) into a step-function [`Kappa`].
pub fn read_kappa_table<R: Read>(input: R) -> Result<Kappa> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        if i == 0 && rec.get(0).is_some_and(|f| f.trim() == "s") {
            continue;
        }
        let parse = |idx: usize| -> Result<&str> {
            rec.get(idx).map(str::trim).ok_or_else(|| Error::Schema {
                line,
                message: "expected `s,value`".into(),
            })
        };
        let s: usize = parse(0)?.parse().map_err(|e| Error::Schema {
            line,
            message: format!("bad time gap: {e}"),
        })?;
        let v: f64 = parse(1)?.parse().map_err(|e| Error::Schema {
            line,
            message: format!("bad value: {e}"),
        })?;
        rows.push((s, v));
    }
    Kappa::table(rows)
}

#[derive(Debug, Clone)]
pub struct FairnessSpec {
    pub kind: FairnessKind,
    pub kappa: Kappa,
    pub metric: Metric,
}

impl FairnessSpec {
    pub fn ft(k: f64, metric: Metric) -> Self {
        Self {
            kind: FairnessKind::AcrossTime,
            kappa: Kappa::Constant(k),
            metric,
        }
    }

    pub fn fh(k: f64, metric: Metric) -> Self {
        Self {
            kind: FairnessKind::InHindsight,
            kappa: Kappa::Constant(k),
            metric,
        }
    }
}

/// A pair of steps breaching a fairness inequality by `slack`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// Time of the earlier step.
    pub earlier: usize,
    /// Time of the later step.
    pub later: usize,
    pub slack: f64,
}

fn check_contexts(trace: &Trace, metric: &Metric) -> Result<()> {
    match trace.steps().iter().find(|s| s.context >= metric.len()) {
        Some(s) => Err(Error::UnknownContext(format!("index {} at t={}", s.context, s.t))),
        None => Ok(()),
    }
}

fn pairwise<F>(trace: &Trace, spec: &FairnessSpec, breach: F) -> Result<Vec<Violation>>
where
    F: Fn(f64, f64, f64) -> f64,
{
    check_contexts(trace, &spec.metric)?;
    let steps = trace.steps();
    let mut out = Vec::new();
    for (i, a) in steps.iter().enumerate() {
        for b in &steps[i + 1..] {
            let allowed = spec.kappa.at(b.t - a.t) * spec.metric.distance(a.context, b.context);
            let slack = breach(a.decision, b.decision, allowed);
            if slack > FAIRNESS_TOL {
                out.push(Violation {
                    earlier: a.t,
                    later: b.t,
                    slack,
                });
            }
        }
    }
    Ok(out)
}

/// Every pair of steps breaking fairness across time.
pub fn audit_ft(trace: &Trace, spec: &FairnessSpec) -> Result<Vec<Violation>> {
    pairwise(trace, spec, |earlier, later, allowed| {
        (earlier - later).abs() - allowed
    })
}

/// Every pair `(t' < t)` with `x_t < x_t' - K(t - t') d(c_t, c_t')`.
pub fn audit_fh(trace: &Trace, spec: &FairnessSpec) -> Result<Vec<Violation>> {
    pairwise(trace, spec, |earlier, later, allowed| earlier - allowed - later)
}

/// Dispatch on `spec.kind`.
pub fn audit(trace: &Trace, spec: &FairnessSpec) -> Result<Vec<Violation>> {
    match spec.kind {
        FairnessKind::AcrossTime => audit_ft(trace, spec),
        FairnessKind::InHindsight => audit_fh(trace, spec),
    }
}

/// Tightest per-context lower bound on decisions implied by an FH history
/// under a constant Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    lower: Vec<f64>,
}

impl Envelope {
    pub fn zero(n: usize) -> Self {
        Self { lower: vec![0.0; n] }
    }

    pub fn from_lower(lower: Vec<f64>) -> Self {
        Self { lower }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn bound(&self, c: usize) -> f64 {
        self.lower[c]
    }

    /// Absorb decision `x` for context `c`:
    /// `ℓ'(c') = max(ℓ(c'), x - K d(c, c'))`.
    pub fn update(&self, c: usize, x: f64, k: f64, metric: &Metric) -> Result<Envelope> {
        let mut next = self.clone();
        next.absorb(c, x, k, metric)?;
        Ok(next)
    }

    /// In-place form of [`Envelope::update`].
    pub fn absorb(&mut self, c: usize, x: f64, k: f64, metric: &Metric) -> Result<()> {
        let slack = self.lower[c] - x;
        if slack > FAIRNESS_TOL {
            return Err(Error::FhInfeasible {
                context: c,
                decision: x,
                slack,
            });
        }
        for (j, l) in self.lower.iter_mut().enumerate() {
            let implied = x - k * metric.distance(c, j);
            if implied > *l {
                *l = implied;
            }
        }
        Ok(())
    }

    /// Decisions for `c` that keep the history FH: `[ℓ(c), 1]`.
    pub fn feasible_interval(&self, c: usize) -> (f64, f64) {
        (self.lower[c].clamp(0.0, 1.0), 1.0)
    }
}

/// Replay a trace through the envelope; `Err` at the first FH breach.
pub fn replay_envelope(trace: &Trace, k: f64, metric: &Metric) -> Result<Envelope> {
    check_contexts(trace, metric)?;
    let mut env = Envelope::zero(metric.len());
    for s in trace.steps() {
        env.absorb(s.context, s.decision, k, metric)?;
    }
    Ok(env)
}
