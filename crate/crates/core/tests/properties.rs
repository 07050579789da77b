mod common;

use cafe_fair::audit::{audit_fh, audit_ft, replay_envelope, Envelope, FairnessSpec, Step, Trace};
use cafe_fair::catalog::{self, build_bernoulli_instance, build_power_instance, Params};
use cafe_fair::model::{kl_divergence, learnability, validate_metric, MetricViolation};
use cafe_fair::policy::{Cafe, Policy};
use cafe_fair::sim::{monte_carlo, ExperimentSpec, PolicySpec, SimRng};
use cafe_fair::solver::{brute_force_grid_oracle, lipschitz_repair, solve_lipschitz_optimal};
use common::{line_metric, random_linear, random_loan};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn trace_strategy() -> impl Strategy<Value = (Vec<f64>, f64, Vec<(usize, usize)>)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..2.0, n),
            0.0f64..2.0,
            prop::collection::vec((0..n, 0usize..=10), 0..=50),
        )
    })
}

fn build_trace(steps: &[(usize, usize)]) -> Trace {
    Trace::from_steps(
        steps
            .iter()
            .enumerate()
            .map(|(i, &(c, k))| Step {
                t: i + 1,
                context: c,
                decision: k as f64 / 10.0,
                utility: 0.0,
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn pairwise_fh_matches_envelope_replay((points, k, steps) in trace_strategy()) {
        let metric = line_metric(&points);
        let trace = build_trace(&steps);
        let pairwise_ok = audit_fh(&trace, &FairnessSpec::fh(k, metric.clone())).unwrap().is_empty();
        let replay_ok = replay_envelope(&trace, k, &metric).is_ok();
        prop_assert_eq!(pairwise_ok, replay_ok);
    }

    #[test]
    fn envelope_stays_lipschitz_and_monotone(
        (points, k, steps) in trace_strategy(),
        lifts in prop::collection::vec(0.0f64..1.0, 50),
    ) {
        let metric = line_metric(&points);
        let n = points.len();
        let mut env = Envelope::zero(n);
        for (i, &(c, _)) in steps.iter().enumerate() {
            // Decision drawn inside the feasible interval.
            let (lo, hi) = env.feasible_interval(c);
            let x = lo + lifts[i % lifts.len()] * (hi - lo);
            let next = env.update(c, x, k, &metric).unwrap();
            for a in 0..n {
                prop_assert!(next.bound(a) >= env.bound(a));
                prop_assert!((0.0..=1.0).contains(&next.bound(a)));
                for b in 0..n {
                    let gap = (next.bound(a) - next.bound(b)).abs();
                    prop_assert!(gap <= k * metric.distance(a, b) + 1e-12);
                }
            }
            env = next;
        }
    }

    #[test]
    fn ft_implies_fh((points, k, steps) in trace_strategy(), raw in prop::collection::vec(0.0f64..1.0, 4)) {
        let metric = line_metric(&points);
        let n = points.len();
        let rule = lipschitz_repair(&raw[..n], k, &metric);
        let trace = Trace::from_steps(
            steps.iter().enumerate().map(|(i, &(c, _))| Step {
                t: i + 1, context: c, decision: rule.values[c], utility: 0.0,
            }).collect(),
        ).unwrap();
        prop_assert!(audit_ft(&trace, &FairnessSpec::ft(k, metric.clone())).unwrap().is_empty());
        prop_assert!(audit_fh(&trace, &FairnessSpec::fh(k, metric)).unwrap().is_empty());
    }

    #[test]
    fn ft_clean_random_traces_are_fh((points, k, steps) in trace_strategy()) {
        let metric = line_metric(&points);
        let trace = build_trace(&steps);
        if audit_ft(&trace, &FairnessSpec::ft(k, metric.clone())).unwrap().is_empty() {
            prop_assert!(audit_fh(&trace, &FairnessSpec::fh(k, metric)).unwrap().is_empty());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn metrics_from_points_are_valid(points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..8)) {
        let d: Vec<Vec<f64>> = points.iter()
            .map(|a| points.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect())
            .collect();
        prop_assert!(validate_metric(&d).unwrap().is_empty());
    }

    #[test]
    fn random_matrices_report_every_axiom_failure(
        n in 1usize..6,
        entries in prop::collection::vec(-1.0f64..3.0, 36),
    ) {
        let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| entries[i * 6 + j]).collect()).collect();
        let violations = validate_metric(&d).unwrap();
        // Independent recount of each axiom.
        let negatives = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| d[i][j] < 0.0).count();
        let diagonal = (0..n).filter(|&i| d[i][i] != 0.0).count();
        let mut triangles = 0;
        for a in 0..n { for b in 0..n { for c in 0..n {
            if d[a][c] > d[a][b] + d[b][c] + 1e-12 { triangles += 1; }
        }}}
        let count = |f: fn(&MetricViolation) -> bool| violations.iter().filter(|v| f(v)).count();
        prop_assert_eq!(count(|v| matches!(v, MetricViolation::Negative { .. })), negatives);
        prop_assert_eq!(count(|v| matches!(v, MetricViolation::NonZeroDiagonal { .. })), diagonal);
        prop_assert_eq!(count(|v| matches!(v, MetricViolation::Triangle { .. })), triangles);
    }

    #[test]
    fn kl_is_non_negative(seed in any::<u64>(), x in 0.001f64..0.999) {
        let mut rng = SimRng::seed_from_u64(seed);
        let n = rng.gen_range(1..4);
        let inst = random_loan(&mut rng, n, 3);
        let m = inst.model.as_ref();
        for c in 0..n {
            for w in 0..3 {
                prop_assert_eq!(kl_divergence(m, w, w, x, c).unwrap(), 0.0);
                for w2 in 0..3 {
                    prop_assert!(kl_divergence(m, w, w2, x, c).unwrap() >= 0.0);
                }
            }
        }
    }

    #[test]
    fn log_ratios_stay_antisymmetric(seed in any::<u64>(), which in 0usize..3) {
        let inst = match which {
            0 => build_bernoulli_instance().unwrap(),
            1 => build_power_instance(1.0).unwrap(),
            _ => catalog::build("age-loan", &Params::new()).unwrap(),
        };
        let mut rng = SimRng::seed_from_u64(seed);
        let mut cafe = Cafe::new(&inst, 1_000_000, 0.05, 101).unwrap();
        let w = rng.gen_range(0..inst.num_params());
        for _ in 0..200 {
            if !cafe.exploring() { break; }
            let c = inst.dist.sample(&mut rng);
            let x = cafe.act(c);
            let u = cafe_fair::model::sample_utility(inst.model.as_ref(), x, c, w, &mut rng).unwrap();
            cafe.observe(c, x, u).unwrap();
            let s = cafe.state();
            for a in 0..inst.num_params() {
                for b in 0..inst.num_params() {
                    prop_assert!((s.log_ratios[a][b] + s.log_ratios[b][a]).abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn solver_rules_are_lipschitz_and_match_oracle() {
    let mut rng = SimRng::seed_from_u64(17);
    for i in 0..20 {
        let n = 1 + i % 3;
        let inst = if i % 2 == 0 {
            random_loan(&mut rng, n, 2)
        } else {
            random_linear(&mut rng, n)
        };
        for w in 0..inst.num_params() {
            let eps = rng.gen_range(0.0..0.3);
            let fast = solve_lipschitz_optimal(&inst, w, eps, 41).unwrap();
            let slow = brute_force_grid_oracle(&inst, w, eps, 41).unwrap();
            assert!(fast.rule.is_lipschitz(inst.k, &inst.metric), "{:?}", fast.rule);
            assert!(fast.rule.values.iter().all(|x| (eps..=1.0).contains(x)));
            assert!(
                (fast.value - slow.value).abs() <= 1e-9,
                "{} vs {}",
                fast.value,
                slow.value
            );
            assert!((fast.value - inst.rule_value(&fast.rule.values, w)).abs() <= 1e-9);
        }
    }
}

#[test]
fn solver_value_decreases_with_lower_bound() {
    let mut rng = SimRng::seed_from_u64(23);
    let grid = 201;
    for i in 0..10 {
        let inst = random_loan(&mut rng, 1 + i % 3, 1);
        let r = inst.model.meta().lipschitz;
        let base = solve_lipschitz_optimal(&inst, 0, 0.0, grid).unwrap().value;
        let mut prev = base;
        for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
            let v = solve_lipschitz_optimal(&inst, 0, eps, grid).unwrap().value;
            // Grids for different ε are not nested; allow one grid step of slack.
            let slack = r * (1.0 - eps) / (grid - 1) as f64;
            assert!(v <= prev + slack, "ε={eps}: {v} > {prev}");
            assert!(v >= base - eps * r - slack, "ε={eps}: {v} < {base} - εR");
            prev = v;
        }
    }
}

#[test]
fn lower_bound_penalty_on_catalog_instances() {
    for name in ["two-context", "bernoulli", "power", "age-loan", "loan"] {
        let inst = catalog::build(name, &Params::new()).unwrap();
        let r = inst.model.meta().lipschitz;
        for w in 0..inst.num_params() {
            let base = solve_lipschitz_optimal(&inst, w, 0.0, 1001).unwrap().value;
            for eps in [0.001, 0.01, 0.1] {
                let v = solve_lipschitz_optimal(&inst, w, eps, 1001).unwrap().value;
                assert!(v >= base - eps * r - r * 1e-3, "{name} w={w} ε={eps}");
            }
        }
    }
}

#[test]
fn coordinate_ascent_beats_constant_rules() {
    let mut rng = SimRng::seed_from_u64(5);
    for _ in 0..5 {
        let inst = random_loan(&mut rng, 6, 1);
        let rep = solve_lipschitz_optimal(&inst, 0, 0.0, 51).unwrap();
        assert_eq!(rep.method.as_str(), "coordinate-ascent");
        assert!(rep.rule.is_lipschitz(inst.k, &inst.metric));
        let best_constant = (0..51)
            .map(|k| inst.rule_value(&[k as f64 / 50.0; 6], 0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(rep.value >= best_constant - 1e-12);
    }
}

#[test]
fn oracle_equivalence_on_small_catalog_instances() {
    for name in ["two-context", "bernoulli", "power", "age-loan", "loan"] {
        let inst = catalog::build(name, &Params::new()).unwrap();
        for w in 0..inst.num_params() {
            let fast = solve_lipschitz_optimal(&inst, w, 0.0, 201).unwrap();
            let slow = brute_force_grid_oracle(&inst, w, 0.0, 201).unwrap();
            assert!((fast.value - slow.value).abs() <= 1e-9, "{name}");
            assert_eq!(fast.rule, slow.rule, "{name}");
        }
    }
}

#[test]
fn learnability_is_monotone_for_power_instance() {
    for m in [0.5, 1.0, 2.0] {
        let inst = build_power_instance(m).unwrap();
        let vals: Vec<f64> = (1..=100)
            .map(|i| learnability(inst.model.as_ref(), &inst.dist, i as f64 / 101.0).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]), "M={m}");
    }
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let inst = build_bernoulli_instance().unwrap();
    let spec = ExperimentSpec::new(&inst, PolicySpec::Cafe { epsilon: None }, vec![100, 300], 5, 99);
    assert_eq!(monte_carlo(&spec).unwrap(), monte_carlo(&spec).unwrap());
    let mut other = spec.clone();
    other.base_seed = 100;
    assert_ne!(
        monte_carlo(&spec).unwrap().records,
        monte_carlo(&other).unwrap().records
    );
}
