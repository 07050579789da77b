//! Walk the instance catalog: learnability L(x) near zero, KL divergences
//! between parameters, and a custom loan instance built from default curves.
//!
//! ```text
//! cargo run --example catalog_tour
//! ```

use std::sync::Arc;

use cafe_fair::catalog::{self, build_loan_instance, DefaultCurve, Params};
use cafe_fair::model::{
    kl_divergence, learnability, min_support_prob, ContextDistribution, ContextSet, Metric,
};

fn main() -> cafe_fair::Result<()> {
    for entry in catalog::entries() {
        let inst = entry.build(&Params::new())?;
        let meta = inst.model.meta();
        println!(
            "{:<12} C={} |W|={} K={} B={:.3} R={:.3} M={} H={}",
            entry.name,
            inst.num_contexts(),
            inst.num_params(),
            inst.k,
            meta.bound,
            meta.lipschitz,
            meta.learn_exponent,
            meta.support_exponent
        );
        if inst.num_params() < 2 {
            continue;
        }
        for x in [1e-3, 1e-2, 1e-1] {
            println!(
                "    L({x:e}) = {:.3e}   D = {:.3e}",
                learnability(inst.model.as_ref(), &inst.dist, x)?,
                min_support_prob(inst.model.as_ref(), x)?
            );
        }
    }

    // Two lender hypotheses: defaults flat in the loan size, or rising with it.
    let curves: Vec<Vec<DefaultCurve>> = vec![
        vec![Arc::new(|_x| 0.1), Arc::new(|x| 0.1 + 0.4 * x)],
        vec![Arc::new(|_x| 0.2), Arc::new(|x| 0.2 + 0.2 * x)],
    ];
    let inst = build_loan_instance(
        "custom",
        0.3,
        vec!["flat".into(), "rising".into()],
        curves,
        ContextSet::new(["north", "south"])?,
        ContextDistribution::uniform(2)?,
        Metric::uniform(2, 1.0)?,
        0.5,
        0.0,
        0.0,
    )?;
    for c in 0..2 {
        let kl = kl_divergence(inst.model.as_ref(), 0, 1, 0.5, c)?;
        println!(
            "custom: KL(flat || rising) at x=0.5 in {} = {kl:.4}",
            inst.contexts.label(c)
        );
    }
    Ok(())
}
