//! Online policies: cautious fair exploration and the baselines it is
//! compared against.

mod baselines;
mod cafe;

pub use baselines::{FtCommittedPolicy, StaticOraclePolicy, UnconstrainedBaseline};
pub use cafe::{epsilon_schedule, Cafe, CafeState, Phase};

use crate::error::Result;

/// Adaptive map from the arriving context (and past feedback) to a decision.
pub trait Policy {
    fn name(&self) -> &str;

    /// Decision for context `c` at the current step. Always in `[0, 1]`.
    fn act(&mut self, c: usize) -> f64;

    /// Feed back the realized utility of the last decision.
    fn observe(&mut self, c: usize, x: f64, u: f64) -> Result<()>;

    /// Whether the policy is still exploring.
    fn exploring(&self) -> bool {
        false
    }

    /// Parameter the policy settled on, for learning policies.
    fn learned(&self) -> Option<usize> {
        None
    }

    /// Whether the policy learns the parameter at all.
    fn learns(&self) -> bool {
        false
    }
}
