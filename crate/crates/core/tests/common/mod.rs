#![allow(dead_code)]

use std::sync::Arc;

use cafe_fair::catalog::{build_loan_instance, DefaultCurve, LinearModel};
use cafe_fair::model::{ContextDistribution, ContextSet, Instance, Metric};
use rand::Rng;

/// Metric induced by points on the real line.
pub fn line_metric(points: &[f64]) -> Metric {
    Metric::new(
        points
            .iter()
            .map(|a| points.iter().map(|b| (a - b).abs()).collect())
            .collect(),
    )
    .unwrap()
}

pub fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = 1.0 - head;
    probs
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

/// Loan instance with `p(x, c, w) = x r[c][w]` for random rates.
pub fn random_loan<R: Rng>(rng: &mut R, contexts: usize, params: usize) -> Instance {
    let points: Vec<f64> = (0..contexts).map(|_| rng.gen_range(0.0..2.0)).collect();
    let curves: Vec<Vec<DefaultCurve>> = (0..contexts)
        .map(|_| {
            (0..params)
                .map(|_| {
                    let r: f64 = rng.gen_range(0.0..1.0);
                    Arc::new(move |x: f64| x * r) as DefaultCurve
                })
                .collect()
        })
        .collect();
    build_loan_instance(
        "random-loan",
        rng.gen_range(0.05..1.0),
        (0..params).map(|w| format!("w{w}")).collect(),
        curves,
        ContextSet::new(labels(contexts)).unwrap(),
        ContextDistribution::new(random_probs(rng, contexts)).unwrap(),
        line_metric(&points),
        rng.gen_range(0.0..1.5),
        1.0,
        1.0,
    )
    .unwrap()
}

/// Deterministic linear utilities with random slopes.
pub fn random_linear<R: Rng>(rng: &mut R, contexts: usize) -> Instance {
    let points: Vec<f64> = (0..contexts).map(|_| rng.gen_range(0.0..2.0)).collect();
    let slopes = vec![(0..contexts).map(|_| rng.gen_range(-1.5..1.5)).collect()];
    Instance::new(
        "random-linear",
        ContextSet::new(labels(contexts)).unwrap(),
        line_metric(&points),
        ContextDistribution::new(random_probs(rng, contexts)).unwrap(),
        Arc::new(LinearModel::new(vec!["w".into()], slopes).unwrap()),
        rng.gen_range(0.0..1.5),
    )
    .unwrap()
}
