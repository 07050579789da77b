use cafe_fair::audit::{audit_fh, audit_ft, FairnessKind, FairnessSpec};
use cafe_fair::catalog::{self, build_bernoulli_instance, Params};
use cafe_fair::policy::{FtCommittedPolicy, StaticOraclePolicy, UnconstrainedBaseline};
use cafe_fair::sim::{
    benchmark_values, dp_optimal_value, monte_carlo, regret, run_episode, ExperimentSpec, PolicySpec,
};

#[test]
fn unconstrained_baseline_breaks_fh_on_most_seeds() {
    let inst = build_bernoulli_instance().unwrap();
    let spec = FairnessSpec::fh(inst.k, inst.metric.clone());
    let episodes = 400;
    let unfair = (0..episodes)
        .filter(|&seed| {
            let mut p = UnconstrainedBaseline::new(&inst).unwrap();
            let ep = run_episode(&mut p, &inst, seed as usize % 2, 100, seed).unwrap();
            !audit_fh(&ep.trace, &spec).unwrap().is_empty()
        })
        .count();
    assert!(unfair as f64 / episodes as f64 > 0.5, "{unfair}/{episodes}");
}

#[test]
fn unconstrained_baseline_regret_is_bounded() {
    let inst = build_bernoulli_instance().unwrap();
    let mut spec = ExperimentSpec::new(&inst, PolicySpec::Unconstrained, vec![1_000, 10_000], 200, 12);
    spec.params = Some(vec![0]);
    let out = monte_carlo(&spec).unwrap();
    let short = out.cell(1_000, 0).unwrap().mean_regret;
    let long = out.cell(10_000, 0).unwrap().mean_regret;
    assert!(long < 5.0, "{long}");
    assert!((long - short).abs() < 1.0, "{short} vs {long}");
}

fn small_instances() -> Vec<cafe_fair::model::Instance> {
    ["two-context", "bernoulli", "power", "age-loan", "loan"]
        .iter()
        .map(|n| catalog::build(n, &Params::new()).unwrap())
        .collect()
}

#[test]
fn dp_values_are_ordered_and_bounded() {
    let grid = 51;
    for inst in small_instances() {
        let b = inst.model.meta().bound;
        let u_k = benchmark_values(&inst, grid).unwrap();
        for w in 0..inst.num_params() {
            for t in 1..=3 {
                let fh = dp_optimal_value(&inst, w, t, FairnessKind::InHindsight, grid).unwrap();
                let ft = dp_optimal_value(&inst, w, t, FairnessKind::AcrossTime, grid).unwrap();
                let static_total = t as f64 * u_k[w];
                assert!(fh >= ft - 1e-9, "{} w={w} T={t}: {fh} < {ft}", inst.name);
                assert!(ft >= static_total - 1e-9, "{} w={w} T={t}", inst.name);
                assert!(fh <= static_total + 2.0 * b + 1e-9, "{} w={w} T={t}", inst.name);
            }
        }
    }
}

#[test]
fn fh_average_value_approaches_benchmark() {
    let inst = catalog::build_two_context_instance().unwrap();
    let u_k = benchmark_values(&inst, 101).unwrap()[0];
    let gaps: Vec<f64> = (1..=3)
        .map(|t| dp_optimal_value(&inst, 0, t, FairnessKind::InHindsight, 101).unwrap() / t as f64 - u_k)
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] > 0.0);
}

#[test]
fn fh_strictly_beats_ft_on_two_context() {
    let inst = catalog::build_two_context_instance().unwrap();
    let fh = dp_optimal_value(&inst, 0, 2, FairnessKind::InHindsight, 101).unwrap();
    let ft = dp_optimal_value(&inst, 0, 2, FairnessKind::AcrossTime, 101).unwrap();
    assert!(fh > ft + 0.01);
}

#[test]
fn committed_and_oracle_traces_are_ft() {
    for inst in small_instances() {
        let spec = FairnessSpec::ft(inst.k, inst.metric.clone());
        for w in 0..inst.num_params() {
            let mut oracle = StaticOraclePolicy::new(&inst, w, 1001).unwrap();
            let ep = run_episode(&mut oracle, &inst, w, 500, 3).unwrap();
            assert!(audit_ft(&ep.trace, &spec).unwrap().is_empty(), "{}", inst.name);

            for guess in 0..inst.num_params() {
                let mut p = FtCommittedPolicy::for_guess(&inst, guess, 1001).unwrap();
                let ep = run_episode(&mut p, &inst, w, 500, 4).unwrap();
                assert!(audit_ft(&ep.trace, &spec).unwrap().is_empty(), "{}", inst.name);
            }
        }
    }
}

#[test]
fn committed_policy_with_right_guess_has_no_regret() {
    let inst = catalog::build("age-loan", &Params::new()).unwrap();
    let u_k = benchmark_values(&inst, 1001).unwrap();
    for w in 0..2 {
        let mut p = FtCommittedPolicy::for_guess(&inst, w, 1001).unwrap();
        let ep = run_episode(&mut p, &inst, w, 2000, 9).unwrap();
        // Contexts arrive at random, so only the pseudo-utility per context is fixed.
        let expected: f64 = ep
            .trace
            .steps()
            .iter()
            .map(|s| inst.model.mean(s.decision, s.context, w))
            .sum();
        assert!((ep.pseudo_utility - expected).abs() < 1e-9);
        assert!(regret(&ep, u_k[w]).abs() / 2000.0 < 0.02);
    }
}
