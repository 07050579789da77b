//! Audit a hand-written decision trace for fairness across time and in
//! hindsight, then round-trip it through the CSV format.
//!
//! ```text
//! cargo run --example audit_trace
//! ```

use cafe_fair::audit::{
    audit_fh, audit_ft, read_trace_csv, replay_envelope, write_trace_csv, FairnessSpec, Step, Trace,
};
use cafe_fair::catalog::build_two_context_instance;

fn main() -> cafe_fair::Result<()> {
    let inst = build_two_context_instance()?;
    let steps = [(0, 0.5), (1, 1.0), (0, 0.6), (0, 0.3), (1, 0.9)];
    let trace = Trace::from_steps(
        steps
            .iter()
            .enumerate()
            .map(|(i, &(context, decision))| Step {
                t: i + 1,
                context,
                decision,
                utility: 0.0,
            })
            .collect(),
    )?;

    for (label, kind, violations) in [
        (
            "FT",
            "across time",
            audit_ft(&trace, &FairnessSpec::ft(inst.k, inst.metric.clone()))?,
        ),
        (
            "FH",
            "in hindsight",
            audit_fh(&trace, &FairnessSpec::fh(inst.k, inst.metric.clone()))?,
        ),
    ] {
        println!("{label} ({kind}): {} violations", violations.len());
        for v in violations {
            println!("  t={} vs t'={} slack {:.3}", v.earlier, v.later, v.slack);
        }
    }

    // The envelope replay stops at the first step that breaks hindsight fairness.
    match replay_envelope(&trace, inst.k, &inst.metric) {
        Ok(env) => println!("envelope after replay: {:?}", env.lower()),
        Err(e) => println!("envelope replay: {e}"),
    }

    let mut buf = Vec::new();
    write_trace_csv(&trace, &inst.contexts, &mut buf)?;
    print!("\n{}", String::from_utf8_lossy(&buf));
    let back = read_trace_csv(buf.as_slice(), &inst.contexts)?;
    assert_eq!(back.len(), trace.len());
    Ok(())
}
