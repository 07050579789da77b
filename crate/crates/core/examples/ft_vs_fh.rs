//! Cost of fairness across time. Exact small-horizon optima under both
//! notions, and the linear regret of a policy that must commit per context.
//!
//! ```text
//! cargo run --example ft_vs_fh
//! ```

use cafe_fair::audit::FairnessKind;
use cafe_fair::catalog::{self, build_two_context_instance, Params};
use cafe_fair::sim::{
    benchmark_values, dp_optimal_value, monte_carlo, ExperimentSpec, PolicySpec, PriorChoice,
};

fn main() -> cafe_fair::Result<()> {
    let inst = build_two_context_instance()?;
    let u_k = benchmark_values(&inst, 101)?[0];
    println!("T  FH-optimum  FT-optimum  T*U_K");
    for t in 1..=3 {
        let fh = dp_optimal_value(&inst, 0, t, FairnessKind::InHindsight, 101)?;
        let ft = dp_optimal_value(&inst, 0, t, FairnessKind::AcrossTime, 101)?;
        println!("{t}  {fh:>10.6}  {ft:>10.6}  {:>6.4}", t as f64 * u_k);
    }

    let loans = catalog::build("age-loan", &Params::new())?;
    let policy = PolicySpec::FtCommitted {
        prior: PriorChoice::Wrong,
    };
    let out = monte_carlo(&ExperimentSpec::new(&loans, policy, vec![1_000, 10_000], 50, 0))?;
    println!("\ncommitted with the wrong guess on {}:", loans.name);
    for t in [1_000, 10_000] {
        let r = out.max_mean_regret(t).unwrap_or(f64::NAN);
        println!("  T={t:<6} regret {r:>9.1}  regret/T {:.4}", r / t as f64);
    }
    Ok(())
}
