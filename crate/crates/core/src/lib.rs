//! Individually fair sequential decision-making under learning.
//!
//! A principal repeatedly maps arriving contexts to decisions in `[0, 1]`
//! while learning an unknown model parameter from realized utilities. Every
//! decision rule must be K-Lipschitz with respect to a similarity metric on
//! contexts, and over time decisions must be fair either *across time* (two
//! sided) or *in hindsight* (no unjustified decreases).
//!
//! * [`model`]: contexts, metric, utility models, KL divergence, `L(x)`, `D(x)`.
//! * [`solver`]: optimal static K-Lipschitz rules on a decision grid.
//! * [`audit`]: fairness-across-time / fairness-in-hindsight auditors and the
//!   hindsight envelope.
//! * [`policy`]: cautious fair exploration and baseline policies.
//! * [`catalog`]: named instances.
//! * [`sim`]: episodes, regret, Monte Carlo runs and exact small-horizon DP.
//! * [`cli`]: the `cafe` command-line driver.

pub mod audit;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};

/// Render a float with 12 significant digits, as short as possible.
pub fn fmt_decimal(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let a = rounded.abs();
    if !(1e-6..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        rounded.to_string()
    }
}
