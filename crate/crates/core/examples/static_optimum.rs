//! Optimal K-Lipschitz decision rule on the two-context loan toy, and how it
//! moves as the fairness constant K is tightened.
//!
//! ```text
//! cargo run --example static_optimum
//! ```

use cafe_fair::catalog::build_two_context_instance;
use cafe_fair::solver::{solve_lipschitz_optimal, DEFAULT_GRID};

fn main() -> cafe_fair::Result<()> {
    let base = build_two_context_instance()?;
    println!("{:>6}  {:>8}  {:>8}  {:>10}", "K", "x(A)", "x(B)", "value");
    for k in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let inst = base.with_k(k)?;
        let rep = solve_lipschitz_optimal(&inst, 0, 0.0, DEFAULT_GRID)?;
        println!(
            "{k:>6}  {:>8.4}  {:>8.4}  {:>10.6}",
            rep.rule.values[0], rep.rule.values[1], rep.value
        );
    }

    // A lower bound on decisions costs at most eps * R.
    let rep = solve_lipschitz_optimal(&base, 0, 0.1, DEFAULT_GRID)?;
    println!(
        "\nwith decisions >= 0.1: {:?} value {:.6}",
        rep.rule.values, rep.value
    );
    Ok(())
}
