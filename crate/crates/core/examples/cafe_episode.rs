//! One CaFE episode on the power instance: cautious exploration at a small
//! decision, a likelihood-ratio exit, then the optimal rule for the learned
//! parameter.
//!
//! ```text
//! cargo run --example cafe_episode -- 100000 1
//! ```

use cafe_fair::audit::{audit_fh, FairnessSpec};
use cafe_fair::catalog::build_power_instance;
use cafe_fair::policy::{Cafe, Policy};
use cafe_fair::sim::{benchmark_values, regret, run_episode};
use cafe_fair::solver::DEFAULT_GRID;

fn main() -> cafe_fair::Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let m: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1.0);

    let inst = build_power_instance(m)?;
    let u_k = benchmark_values(&inst, DEFAULT_GRID)?;
    for w in 0..inst.num_params() {
        let mut cafe = Cafe::with_schedule(&inst, horizon)?;
        let eps = cafe.state().epsilon;
        let ep = run_episode(&mut cafe, &inst, w, horizon, 2024 + w as u64)?;
        let clean = audit_fh(&ep.trace, &FairnessSpec::fh(inst.k, inst.metric.clone()))?.is_empty();
        println!(
            "w={} eps={eps:.5} explored {} steps, learned {:?}, regret {:.1}, FH clean: {clean}",
            inst.model.params()[w],
            ep.explore_length,
            cafe.learned().map(|i| &inst.model.params()[i]),
            regret(&ep, u_k[w]),
        );
    }
    Ok(())
}
