//! Problem primitives: contexts, the similarity metric, the context
//! distribution, parametric utility models and the quantities derived from
//! them (KL divergence, learnability `L(x)`, minimum support probability
//! `D(x)`).

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

const NORMALIZATION_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-12;

/// Finite, labelled set of contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    labels: Vec<String>,
}

impl ContextSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Model("context set is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Model(format!("duplicate context label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, c: usize) -> &str {
        &self.labels[c]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A single failed metric axiom, identified by the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    NonFinite {
        i: usize,
        j: usize,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    NonZeroDiagonal {
        i: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        diff: f64,
    },
    /// `d[a][c] > d[a][b] + d[b][c]`.
    Triangle {
        a: usize,
        b: usize,
        c: usize,
        excess: f64,
    },
}

/// Check every metric axiom on a square matrix and report all violations.
///
/// Returns `Err(Error::Dimension)` if the matrix is not square.
pub fn validate_metric(d: &[Vec<f64>]) -> Result<Vec<MetricViolation>> {
    let n = d.len();
    if let Some((r, row)) = d.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(Error::Dimension(format!(
            "metric row {r} has {} entries, expected {n}",
            row.len()
        )));
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = d[i][j];
            if !v.is_finite() {
                out.push(MetricViolation::NonFinite { i, j });
                continue;
            }
            if v < 0.0 {
                out.push(MetricViolation::Negative { i, j, value: v });
            }
            if i == j && v != 0.0 {
                out.push(MetricViolation::NonZeroDiagonal { i, value: v });
            }
            if i < j && (v - d[j][i]).abs() > METRIC_TOL {
                out.push(MetricViolation::Asymmetric {
                    i,
                    j,
                    diff: v - d[j][i],
                });
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let excess = d[a][c] - (d[a][b] + d[b][c]);
                if excess > METRIC_TOL {
                    out.push(MetricViolation::Triangle { a, b, c, excess });
                }
            }
        }
    }
    Ok(out)
}

/// Distance matrix over contexts satisfying the metric axioms.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    d: Vec<Vec<f64>>,
}

impl Metric {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self> {
        let violations = validate_metric(&d)?;
        if !violations.is_empty() {
            return Err(Error::Model(format!("metric axioms violated: {violations:?}")));
        }
        Ok(Self { d })
    }

    /// Every pair of distinct contexts at the same distance.
    pub fn uniform(n: usize, distance: f64) -> Result<Self> {
        let d = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { distance }).collect())
            .collect();
        Self::new(d)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.d[a][b]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.d
    }
}

/// Distribution the contexts are drawn from, i.i.d. at every step.
#[derive(Debug, Clone)]
pub struct ContextDistribution {
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl ContextDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Model("empty context distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Model(format!(
                "negative or non-finite probability in {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Model(format!("context probabilities sum to {total}")));
        }
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::Model(e.to_string()))?;
        Ok(Self { probs, sampler })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

/// Constants attached to a utility model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    /// Uniform bound `B` on `|mean(x, c, w)|`.
    pub bound: f64,
    /// Lipschitz constant `R` of the mean utility in the decision.
    pub lipschitz: f64,
    /// Order `M` with `L(x) = Ω(x^M)` as `x → 0`.
    pub learn_exponent: f64,
    /// Order `H` with `D(x) = Ω(x^H)` as `x → 0`.
    pub support_exponent: f64,
}

/// Parametric family of finite utility distributions `F(x, c, w)`.
///
/// The support may depend on the decision and the context but not on the
/// parameter; `probabilities` is aligned with `support` index by index.
/// Support values must be distinct.
pub trait UtilityModel: Send + Sync + fmt::Debug {
    fn num_contexts(&self) -> usize;

    /// Labels of the finite parameter set `W`.
    fn params(&self) -> &[String];

    fn support(&self, x: f64, c: usize) -> Vec<f64>;

    fn probabilities(&self, x: f64, c: usize, w: usize) -> Vec<f64>;

    fn mean(&self, x: f64, c: usize, w: usize) -> f64;

    fn meta(&self) -> ModelMeta;

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn param_index(&self, label: &str) -> Option<usize> {
        self.params().iter().position(|p| p == label)
    }
}

/// Fully specified problem: contexts, metric, context distribution, utility
/// model and the Lipschitz fairness constant `K`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub contexts: ContextSet,
    pub metric: Metric,
    pub dist: ContextDistribution,
    pub model: Arc<dyn UtilityModel>,
    pub k: f64,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        contexts: ContextSet,
        metric: Metric,
        dist: ContextDistribution,
        model: Arc<dyn UtilityModel>,
        k: f64,
    ) -> Result<Self> {
        let n = contexts.len();
        if metric.len() != n || dist.len() != n || model.num_contexts() != n {
            return Err(Error::Dimension(format!(
                "{n} contexts, metric {}x{}, distribution of length {}, model over {} contexts",
                metric.len(),
                metric.len(),
                dist.len(),
                model.num_contexts()
            )));
        }
        if model.num_params() == 0 {
            return Err(Error::Model("parameter set is empty".into()));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Model(format!(
                "fairness constant K={k} must be finite and >= 0"
            )));
        }
        Ok(Self {
            name: name.into(),
            contexts,
            metric,
            dist,
            model,
            k,
        })
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_params(&self) -> usize {
        self.model.num_params()
    }

    /// Same instance with a different fairness constant.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.contexts.clone(),
            self.metric.clone(),
            self.dist.clone(),
            Arc::clone(&self.model),
            k,
        )
    }

    /// Expected utility `E_D[mean(rule(c), c, w)]` of a static rule.
    pub fn rule_value(&self, rule: &[f64], w: usize) -> f64 {
        self.dist
            .probs()
            .iter()
            .zip(rule)
            .enumerate()
            .map(|(c, (p, &x))| p * self.model.mean(x, c, w))
            .sum()
    }
}

fn check_decision(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(x, "decisions live in [0, 1]".into()))
    }
}

fn check_param(model: &dyn UtilityModel, w: usize) -> Result<()> {
    if w < model.num_params() {
        Ok(())
    } else {
        Err(Error::UnknownParameter(w))
    }
}

/// Draw a utility from `F(x, c, w)`.
pub fn sample_utility<R: Rng + ?Sized>(
    model: &dyn UtilityModel,
    x: f64,
    c: usize,
    w: usize,
    rng: &mut R,
) -> Result<f64> {
    check_decision(x)?;
    check_param(model, w)?;
    let support = model.support(x, c);
    let probs = model.probabilities(x, c, w);
    let mut u: f64 = rng.gen();
    for (value, p) in support.iter().zip(&probs) {
        if u < *p {
            return Ok(*value);
        }
        u -= p;
    }
    // Rounding residue: return the last outcome with positive mass.
    let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(support.len() - 1);
    Ok(support[last])
}

/// Index of `u` in the support at `(x, c)`, if present.
pub fn locate_outcome(model: &dyn UtilityModel, x: f64, c: usize, u: f64) -> Option<usize> {
    model
        .support(x, c)
        .iter()
        .position(|s| (s - u).abs() <= 1e-12 * s.abs().max(1.0))
}

/// `ln p(u | x, c, w)` with the probability floored at [`PROB_FLOOR`].
pub fn log_likelihood(model: &dyn UtilityModel, x: f64, c: usize, w: usize, u: f64) -> Result<f64> {
    check_param(model, w)?;
    let idx = locate_outcome(model, x, c, u).ok_or(Error::Observation {
        utility: u,
        decision: x,
        context: c,
    })?;
    Ok(model.probabilities(x, c, w)[idx].max(PROB_FLOOR).ln())
}

/// Kullback-Leibler divergence of `F(x, c, w)` from `F(x, c, w2)`, in nats.
pub fn kl_divergence(model: &dyn UtilityModel, w: usize, w2: usize, x: f64, c: usize) -> Result<f64> {
    check_decision(x)?;
    check_param(model, w)?;
    check_param(model, w2)?;
    let p = model.probabilities(x, c, w);
    let q = model.probabilities(x, c, w2);
    let interior = x > 0.0 && x < 1.0;
    if !interior && p.iter().chain(&q).any(|v| *v <= 0.0) {
        return Err(Error::Domain(
            x,
            "support probabilities vanish at the boundary; KL undefined".into(),
        ));
    }
    if w == w2 {
        return Ok(0.0);
    }
    let kl: f64 = p
        .iter()
        .zip(&q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.max(PROB_FLOOR).ln() - qi.max(PROB_FLOOR).ln()))
        .sum();
    // Gibbs' inequality; negative values are pure rounding.
    Ok(kl.max(0.0))
}

/// `L(x) = min_{w != w'} E_D[KL(w, w' | x, c)]`.
pub fn learnability(model: &dyn UtilityModel, dist: &ContextDistribution, x: f64) -> Result<f64> {
    let nw = model.num_params();
    if nw < 2 {
        return Err(Error::Model("learnability needs at least two parameters".into()));
    }
    let mut best = f64::INFINITY;
    for w in 0..nw {
        for w2 in 0..nw {
            if w == w2 {
                continue;
            }
            let mut expected = 0.0;
            for (c, p) in dist.probs().iter().enumerate() {
                if *p > 0.0 {
                    expected += p * kl_divergence(model, w, w2, x, c)?;
                }
            }
            best = best.min(expected);
        }
    }
    Ok(best)
}

/// `D(x)`: smallest probability of any support outcome over contexts and parameters.
pub fn min_support_prob(model: &dyn UtilityModel, x: f64) -> Result<f64> {
    check_decision(x)?;
    let mut best: f64 = 1.0;
    for c in 0..model.num_contexts() {
        for w in 0..model.num_params() {
            for p in model.probabilities(x, c, w) {
                best = best.min(p);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_metric_is_valid() {
        assert!(validate_metric(&[vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn triangle_violation_is_reported() {
        let d = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        let v = validate_metric(&d).unwrap();
        assert!(v.iter().any(|v| matches!(
            v,
            MetricViolation::Triangle { a: 0, b: 1, c: 2, excess } if (*excess - 1.0).abs() < 1e-12
        )));
        assert!(v.iter().all(|v| matches!(v, MetricViolation::Triangle { .. })));
    }

    #[test]
    fn negative_distance_is_reported() {
        let v = validate_metric(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(v.contains(&MetricViolation::Negative {
            i: 0,
            j: 1,
            value: -1.0
        }));
    }

    #[test]
    fn non_square_metric_is_a_dimension_error() {
        let err = validate_metric(&[vec![0.0, 1.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn context_set_rejects_duplicates_and_empty() {
        assert!(ContextSet::new(Vec::<String>::new()).is_err());
        assert!(ContextSet::new(["a", "a"]).is_err());
        assert_eq!(ContextSet::new(["a", "b"]).unwrap().index_of("b"), Some(1));
    }

    #[test]
    fn degenerate_distribution_always_draws_first() {
        let dist = ContextDistribution::new(vec![1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| dist.sample(&mut rng) == 0));
    }

    #[test]
    fn skewed_distribution_frequency() {
        let dist = ContextDistribution::new(vec![1.0 / 12.0, 11.0 / 12.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 120_000;
        let hits = (0..n).filter(|_| dist.sample(&mut rng) == 0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.0833).abs() < 0.005, "frequency {freq}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = ContextDistribution::uniform(2).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn distribution_must_normalize() {
        assert!(ContextDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(ContextDistribution::new(vec![1.5, -0.5]).is_err());
    }
}
