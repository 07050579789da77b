//! Concrete instances: the two-context loan example, the power-law and
//! Bernoulli lower-bound instances, and loan instances with default curves.
//!
//! Every instance is addressable by name through [`build`] with a map of
//! numeric parameters; unspecified parameters take the entry's defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ContextDistribution, ContextSet, Instance, Metric, ModelMeta, UtilityModel};

/// Numeric builder parameters, keyed by name.
pub type Params = BTreeMap<String, f64>;

/// Default-probability curve `x -> p(x, c, w)`.
pub type DefaultCurve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Loan utility: lose the amount `x` on default (probability `p(x, c, w)`),
/// otherwise earn interest `beta * x`.
#[derive(Clone)]
pub struct LoanModel {
    beta: f64,
    params: Vec<String>,
    /// Indexed `[c][w]`.
    curves: Vec<Vec<DefaultCurve>>,
    meta: ModelMeta,
}

impl fmt::Debug for LoanModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoanModel")
            .field("beta", &self.beta)
            .field("params", &self.params)
            .field("meta", &self.meta)
            .finish_non_exhaustive()
    }
}

impl LoanModel {
    fn default_prob(&self, x: f64, c: usize, w: usize) -> f64 {
        (self.curves[c][w])(x).clamp(0.0, 1.0)
    }
}

impl UtilityModel for LoanModel {
    fn num_contexts(&self) -> usize {
        self.curves.len()
    }

    fn params(&self) -> &[String] {
        &self.params
    }

    fn support(&self, x: f64, _c: usize) -> Vec<f64> {
        if x == 0.0 {
            vec![0.0]
        } else {
            vec![-x, self.beta * x]
        }
    }

    fn probabilities(&self, x: f64, c: usize, w: usize) -> Vec<f64> {
        if x == 0.0 {
            return vec![1.0];
        }
        let p = self.default_prob(x, c, w);
        vec![p, 1.0 - p]
    }

    fn mean(&self, x: f64, c: usize, w: usize) -> f64 {
        x * (self.beta - self.default_prob(x, c, w) * (1.0 + self.beta))
    }

    fn meta(&self) -> ModelMeta {
        self.meta
    }
}

/// Two-point utility `±x^{1-M/2}` whose sign is biased by `x^{M/2}` towards
/// `+` under parameter `A` and towards `-` under `B`. Means are `x` and `-x`.
#[derive(Debug, Clone)]
pub struct PowerModel {
    m: f64,
    params: Vec<String>,
}

impl PowerModel {
    pub fn magnitude(&self, x: f64) -> f64 {
        x.powf(1.0 - self.m / 2.0)
    }

    pub fn bias(&self, x: f64) -> f64 {
        x.powf(self.m / 2.0)
    }
}

impl UtilityModel for PowerModel {
    fn num_contexts(&self) -> usize {
        1
    }

    fn params(&self) -> &[String] {
        &self.params
    }

    fn support(&self, x: f64, _c: usize) -> Vec<f64> {
        let s = self.magnitude(x);
        if s == 0.0 {
            vec![0.0]
        } else {
            vec![s, -s]
        }
    }

    fn probabilities(&self, x: f64, _c: usize, w: usize) -> Vec<f64> {
        if self.magnitude(x) == 0.0 {
            return vec![1.0];
        }
        let b = self.bias(x);
        let (hi, lo) = (0.5 * (1.0 + b), 0.5 * (1.0 - b));
        if w == 0 {
            vec![hi, lo]
        } else {
            vec![lo, hi]
        }
    }

    fn mean(&self, x: f64, _c: usize, w: usize) -> f64 {
        if w == 0 {
            x
        } else {
            -x
        }
    }

    fn meta(&self) -> ModelMeta {
        ModelMeta {
            bound: 1.0,
            lipschitz: 1.0,
            learn_exponent: self.m,
            support_exponent: 0.0,
        }
    }
}

/// `U = x * F` with `F = ±1`, `P(F = 1)` equal to 0.75 under `A` and 0.25 under `B`.
#[derive(Debug, Clone)]
pub struct BernoulliModel {
    params: Vec<String>,
}

pub const BERNOULLI_FAVOURABLE: f64 = 0.75;

impl UtilityModel for BernoulliModel {
    fn num_contexts(&self) -> usize {
        1
    }

    fn params(&self) -> &[String] {
        &self.params
    }

    fn support(&self, x: f64, _c: usize) -> Vec<f64> {
        if x == 0.0 {
            vec![0.0]
        } else {
            vec![x, -x]
        }
    }

    fn probabilities(&self, x: f64, _c: usize, w: usize) -> Vec<f64> {
        if x == 0.0 {
            return vec![1.0];
        }
        let p = if w == 0 {
            BERNOULLI_FAVOURABLE
        } else {
            1.0 - BERNOULLI_FAVOURABLE
        };
        vec![p, 1.0 - p]
    }

    fn mean(&self, x: f64, _c: usize, w: usize) -> f64 {
        let p = if w == 0 {
            BERNOULLI_FAVOURABLE
        } else {
            1.0 - BERNOULLI_FAVOURABLE
        };
        x * (2.0 * p - 1.0)
    }

    fn meta(&self) -> ModelMeta {
        ModelMeta {
            bound: 0.5,
            lipschitz: 0.5,
            learn_exponent: 0.0,
            support_exponent: 0.0,
        }
    }
}

/// Deterministic linear utilities `u = slope[w][c] * x` (single-point supports).
#[derive(Debug, Clone)]
pub struct LinearModel {
    params: Vec<String>,
    /// Indexed `[w][c]`.
    slopes: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn new(params: Vec<String>, slopes: Vec<Vec<f64>>) -> Result<Self> {
        if params.len() != slopes.len() || slopes.is_empty() {
            return Err(Error::Dimension("one slope row per parameter".into()));
        }
        let n = slopes[0].len();
        if n == 0 || slopes.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("slope rows must share a non-zero length".into()));
        }
        Ok(Self { params, slopes })
    }
}

impl UtilityModel for LinearModel {
    fn num_contexts(&self) -> usize {
        self.slopes[0].len()
    }

    fn params(&self) -> &[String] {
        &self.params
    }

    fn support(&self, x: f64, c: usize) -> Vec<f64> {
        // Identical across parameters only when slopes agree; every catalog
        // use of this model has a single parameter.
        vec![self.slopes[0][c] * x]
    }

    fn probabilities(&self, _x: f64, _c: usize, _w: usize) -> Vec<f64> {
        vec![1.0]
    }

    fn mean(&self, x: f64, c: usize, w: usize) -> f64 {
        self.slopes[w][c] * x
    }

    fn meta(&self) -> ModelMeta {
        let r = self
            .slopes
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, s| acc.max(s.abs()));
        ModelMeta {
            bound: r,
            lipschitz: r,
            learn_exponent: 0.0,
            support_exponent: 0.0,
        }
    }
}

/// Loan instance with arbitrary default curves, indexed `[c][w]`.
///
/// `learn_exponent` and `support_exponent` are the asymptotic orders of
/// `L(x)` and `D(x)` and must be supplied by the caller. The bound `B` and
/// Lipschitz constant `R` are measured on a 1001-point grid.
#[allow(clippy::too_many_arguments)]
pub fn build_loan_instance(
    name: &str,
    beta: f64,
    params: Vec<String>,
    curves: Vec<Vec<DefaultCurve>>,
    contexts: ContextSet,
    dist: ContextDistribution,
    metric: Metric,
    k: f64,
    learn_exponent: f64,
    support_exponent: f64,
) -> Result<Instance> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Model(format!("interest factor beta={beta} must be > 0")));
    }
    if curves.len() != contexts.len() || curves.iter().any(|row| row.len() != params.len()) {
        return Err(Error::Dimension(
            "default curves must be indexed [context][parameter]".into(),
        ));
    }
    const GRID: usize = 1001;
    let xs: Vec<f64> = (0..GRID).map(|i| i as f64 / (GRID - 1) as f64).collect();
    for (c, row) in curves.iter().enumerate() {
        for (w, curve) in row.iter().enumerate() {
            if let Some(x) = xs.iter().find(|&&x| !(0.0..=1.0).contains(&curve(x))) {
                return Err(Error::Model(format!(
                    "default probability {} outside [0,1] at x={x}, context {c}, parameter {w}",
                    curve(*x)
                )));
            }
        }
    }
    let mut model = LoanModel {
        beta,
        params,
        curves,
        meta: ModelMeta {
            bound: 0.0,
            lipschitz: 0.0,
            learn_exponent,
            support_exponent,
        },
    };
    let (mut bound, mut lipschitz) = (0.0_f64, 0.0_f64);
    for c in 0..contexts.len() {
        for w in 0..model.params.len() {
            let means: Vec<f64> = xs.iter().map(|&x| model.mean(x, c, w)).collect();
            bound = means.iter().fold(bound, |b, m| b.max(m.abs()));
            for pair in means.windows(2) {
                lipschitz = lipschitz.max((pair[1] - pair[0]).abs() * (GRID - 1) as f64);
            }
        }
    }
    model.meta.bound = bound;
    // Grid slopes underestimate curvature between nodes.
    model.meta.lipschitz = lipschitz * 1.01;
    Instance::new(name, contexts, metric, dist, Arc::new(model), k)
}

/// Two contexts `A`, `B` seen with probabilities 1/12 and 11/12, mean
/// utilities `-x` and `1.2x`, unit distance and `K = 0.5`.
pub fn build_two_context_instance() -> Result<Instance> {
    let model = LinearModel::new(vec!["true".into()], vec![vec![-1.0, 1.2]])?;
    Instance::new(
        "two-context",
        ContextSet::new(["A", "B"])?,
        Metric::uniform(2, 1.0)?,
        ContextDistribution::new(vec![1.0 / 12.0, 11.0 / 12.0])?,
        Arc::new(model),
        0.5,
    )
}

/// Single-context two-parameter instance with `L(x) = Θ(x^M)`.
///
/// `M` must lie in `(0, 2]`: `M = 0` puts zero probability on an outcome
/// for every decision, and `M > 2` makes `|u| = x^{1-M/2}` unbounded near 0.
pub fn build_power_instance(m: f64) -> Result<Instance> {
    if !(m > 0.0 && m <= 2.0) {
        return Err(Error::Model(format!("power instance needs 0 < M <= 2, got {m}")));
    }
    let model = PowerModel {
        m,
        params: vec!["A".into(), "B".into()],
    };
    single_context(format!("power(M={m})"), Arc::new(model))
}

/// Single-context instance `U = x F` with `L(x)` constant in `x`.
pub fn build_bernoulli_instance() -> Result<Instance> {
    let model = BernoulliModel {
        params: vec!["A".into(), "B".into()],
    };
    single_context("bernoulli".to_string(), Arc::new(model))
}

fn single_context(name: String, model: Arc<dyn UtilityModel>) -> Result<Instance> {
    Instance::new(
        name,
        ContextSet::new(["0"])?,
        Metric::new(vec![vec![0.0]])?,
        ContextDistribution::new(vec![1.0])?,
        model,
        1.0,
    )
}

/// Applicants of two ages, `young` and `old`, where the lender does not know
/// whether age correlates positively (`pos`) or negatively (`neg`) with
/// default. Default probability is `x * clamp(base ± spread)`: under `pos`
/// the old default more, under `neg` the young do.
pub fn build_age_loan_instance(beta: f64, base: f64, spread: f64, k: f64) -> Result<Instance> {
    let rate = |sign: f64| (base + sign * spread).clamp(0.0, 1.0);
    let curve = |r: f64| -> DefaultCurve { Arc::new(move |x: f64| x * r) };
    let (low, high) = (rate(-1.0), rate(1.0));
    // [c][w] with c in {young, old}, w in {pos, neg}.
    let curves = vec![vec![curve(low), curve(high)], vec![curve(high), curve(low)]];
    build_loan_instance(
        "age-loan",
        beta,
        vec!["pos".into(), "neg".into()],
        curves,
        ContextSet::new(["young", "old"])?,
        ContextDistribution::uniform(2)?,
        Metric::uniform(2, 1.0)?,
        k,
        1.0,
        1.0,
    )
}

/// Single-context loan with a constant default probability.
pub fn build_constant_loan_instance(beta: f64, p: f64) -> Result<Instance> {
    build_loan_instance(
        "loan",
        beta,
        vec!["true".into()],
        vec![vec![Arc::new(move |_x: f64| p)]],
        ContextSet::new(["0"])?,
        ContextDistribution::new(vec![1.0])?,
        Metric::new(vec![vec![0.0]])?,
        1.0,
        0.0,
        0.0,
    )
}

/// Facts about an instance that are known in closed form.
#[derive(Debug, Clone, Default)]
pub struct KnownFacts {
    /// Optimal K-Lipschitz rule per parameter, when stated.
    pub optimal_rules: Vec<Option<Vec<f64>>>,
    /// Optimal unconstrained decisions per parameter, when stated.
    pub unconstrained_optima: Vec<Option<Vec<f64>>>,
    /// Closed form of `L(x)`.
    pub learnability: Option<fn(f64, f64) -> f64>,
}

/// A named, code-registered instance builder.
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    builder: fn(&Params) -> Result<Instance>,
    facts: fn(&Params) -> KnownFacts,
}

impl CatalogEntry {
    /// Build with `params` overriding the defaults. Unknown keys are rejected.
    pub fn build(&self, params: &Params) -> Result<Instance> {
        for key in params.keys() {
            if !self.defaults.iter().any(|(k, _)| k == key) {
                return Err(Error::Model(format!(
                    "instance `{}` has no parameter `{key}` (accepted: {:?})",
                    self.name,
                    self.defaults.iter().map(|(k, _)| *k).collect::<Vec<_>>()
                )));
            }
        }
        let mut full: Params = self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        full.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        (self.builder)(&full)
    }

    pub fn known_facts(&self, params: &Params) -> KnownFacts {
        let mut full: Params = self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        full.extend(params.iter().map(|(k, v)| (k.clone(), *v)));
        (self.facts)(&full)
    }
}

impl fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("name", &self.name)
            .field("defaults", &self.defaults)
            .finish()
    }
}

/// Closed form `L(x) = s ln((1+s)/(1-s))` with `s = x^{M/2}`.
pub fn power_learnability(x: f64, m: f64) -> f64 {
    let s = x.powf(m / 2.0);
    s * ((1.0 + s) / (1.0 - s)).ln()
}

fn bernoulli_learnability(_x: f64, _m: f64) -> f64 {
    let p = BERNOULLI_FAVOURABLE;
    let q = 1.0 - p;
    p * (p / q).ln() + q * (q / p).ln()
}

static ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "two-context",
        summary: "contexts A (1/12) and B (11/12), mean utilities -x and 1.2x, d=1, K=0.5",
        defaults: &[],
        builder: |_| build_two_context_instance(),
        facts: |_| KnownFacts {
            optimal_rules: vec![Some(vec![0.5, 1.0])],
            unconstrained_optima: vec![Some(vec![0.0, 1.0])],
            learnability: None,
        },
    },
    CatalogEntry {
        name: "power",
        summary: "single context, utilities ±x^(1-M/2) with sign bias x^(M/2); L(x) = Θ(x^M)",
        defaults: &[("m", 1.0)],
        builder: |p| build_power_instance(p["m"]),
        facts: |_| KnownFacts {
            optimal_rules: vec![Some(vec![1.0]), Some(vec![0.0])],
            unconstrained_optima: vec![Some(vec![1.0]), Some(vec![0.0])],
            learnability: Some(power_learnability),
        },
    },
    CatalogEntry {
        name: "bernoulli",
        summary: "single context, U = xF with F = ±1 biased 3:1; L(x) constant",
        defaults: &[],
        builder: |_| build_bernoulli_instance(),
        facts: |_| KnownFacts {
            optimal_rules: vec![Some(vec![1.0]), Some(vec![0.0])],
            unconstrained_optima: vec![Some(vec![1.0]), Some(vec![0.0])],
            learnability: Some(bernoulli_learnability),
        },
    },
    CatalogEntry {
        name: "age-loan",
        summary: "young/old applicants, unknown sign of the age/default correlation",
        defaults: &[("beta", 0.2), ("base", 0.3), ("spread", 0.2), ("k", 0.5)],
        builder: |p| build_age_loan_instance(p["beta"], p["base"], p["spread"], p["k"]),
        facts: |_| KnownFacts::default(),
    },
    CatalogEntry {
        name: "loan",
        summary: "single context loan with constant default probability p and interest beta",
        defaults: &[("beta", 0.2), ("p", 0.5)],
        builder: |p| build_constant_loan_instance(p["beta"], p["p"]),
        facts: |_| KnownFacts::default(),
    },
];

pub fn entries() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn entry(name: &str) -> Result<&'static CatalogEntry> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownInstance(name.to_string()))
}

/// Build a catalog instance by name.
pub fn build(name: &str, params: &Params) -> Result<Instance> {
    entry(name)?.build(params)
}
