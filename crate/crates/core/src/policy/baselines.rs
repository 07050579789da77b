use crate::error::{Error, Result};
use crate::model::Instance;
use crate::policy::Policy;
use crate::solver::{solve_lipschitz_optimal, DecisionRule};

/// Plays the optimal static K-Lipschitz rule for a known parameter.
#[derive(Debug, Clone)]
pub struct StaticOraclePolicy {
    rule: DecisionRule,
}

impl StaticOraclePolicy {
    pub fn new(instance: &Instance, w: usize, grid_points: usize) -> Result<Self> {
        let report = solve_lipschitz_optimal(instance, w, 0.0, grid_points)?;
        Ok(Self { rule: report.rule })
    }

    pub fn from_rule(rule: DecisionRule) -> Self {
        Self { rule }
    }

    pub fn rule(&self) -> &DecisionRule {
        &self.rule
    }
}

impl Policy for StaticOraclePolicy {
    fn name(&self) -> &str {
        "static-oracle"
    }

    fn act(&mut self, c: usize) -> f64 {
        self.rule.decision(c)
    }

    fn observe(&mut self, _c: usize, _x: f64, _u: f64) -> Result<()> {
        Ok(())
    }
}

/// Fair across time by commitment: a context's first decision, taken from
/// `prior`, is repeated for that context forever.
#[derive(Debug, Clone)]
pub struct FtCommittedPolicy {
    prior: DecisionRule,
    committed: Vec<Option<f64>>,
}

impl FtCommittedPolicy {
    pub fn new(prior: DecisionRule) -> Self {
        let n = prior.values.len();
        Self {
            prior,
            committed: vec![None; n],
        }
    }

    /// Commit to the optimal rule for a guessed parameter.
    pub fn for_guess(instance: &Instance, guess: usize, grid_points: usize) -> Result<Self> {
        Ok(Self::new(
            solve_lipschitz_optimal(instance, guess, 0.0, grid_points)?.rule,
        ))
    }
}

impl Policy for FtCommittedPolicy {
    fn name(&self) -> &str {
        "ft-committed"
    }

    fn act(&mut self, c: usize) -> f64 {
        *self.committed[c].get_or_insert(self.prior.decision(c))
    }

    fn observe(&mut self, _c: usize, _x: f64, _u: f64) -> Result<()> {
        Ok(())
    }
}

/// Unconstrained policy for the Bernoulli instance: play 1 while the running
/// mean of `F = U / x` is non-negative, otherwise `e^{-t}`. Not fair in
/// hindsight, since decisions may drop.
#[derive(Debug, Clone, Default)]
pub struct UnconstrainedBaseline {
    t: usize,
    sum_f: f64,
}

impl UnconstrainedBaseline {
    pub fn new(instance: &Instance) -> Result<Self> {
        if instance.name != "bernoulli" {
            return Err(Error::UnsupportedInstance(format!(
                "the unconstrained baseline is defined for `bernoulli` only, not `{}`",
                instance.name
            )));
        }
        Ok(Self::default())
    }

    /// Decision at 1-based time `t` given the mean of the first `t - 1` signals.
    pub fn decision(t: usize, mean_signal: f64) -> f64 {
        if t <= 1 || mean_signal >= 0.0 {
            1.0
        } else {
            // e^{-t} underflows past t ≈ 708; the smallest normal keeps U / x recoverable.
            (-(t as f64)).exp().max(f64::MIN_POSITIVE)
        }
    }
}

impl Policy for UnconstrainedBaseline {
    fn name(&self) -> &str {
        "unconstrained"
    }

    fn act(&mut self, _c: usize) -> f64 {
        let mean = if self.t == 0 {
            0.0
        } else {
            self.sum_f / self.t as f64
        };
        Self::decision(self.t + 1, mean)
    }

    fn observe(&mut self, _c: usize, x: f64, u: f64) -> Result<()> {
        if x <= 0.0 {
            return Err(Error::Observation {
                utility: u,
                decision: x,
                context: 0,
            });
        }
        self.sum_f += (u / x).round();
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_bernoulli_instance, build_two_context_instance};
    use approx::assert_abs_diff_eq;

    #[test]
    fn oracle_plays_optimal_rule() {
        let inst = build_two_context_instance().unwrap();
        let mut p = StaticOraclePolicy::new(&inst, 0, 1001).unwrap();
        assert_abs_diff_eq!(p.act(0), 0.5, epsilon = 1e-12);
        assert_eq!(p.act(1), 1.0);
    }

    #[test]
    fn committed_policy_repeats_first_decision() {
        let mut p = FtCommittedPolicy::new(DecisionRule::new(vec![0.2, 0.6]));
        assert_eq!(p.act(1), 0.6);
        assert_eq!(p.act(1), 0.6);
        assert_eq!(p.act(0), 0.2);
    }

    #[test]
    fn unconstrained_decisions() {
        assert_eq!(UnconstrainedBaseline::decision(1, -1.0), 1.0);
        assert_eq!(UnconstrainedBaseline::decision(10, -0.1), (-10f64).exp());
        assert_eq!(UnconstrainedBaseline::decision(10, 0.0), 1.0);
        assert!(UnconstrainedBaseline::decision(10_000, -1.0) > 0.0);
    }

    #[test]
    fn unconstrained_tracks_signal_mean() {
        let inst = build_bernoulli_instance().unwrap();
        let mut p = UnconstrainedBaseline::new(&inst).unwrap();
        assert_eq!(p.act(0), 1.0);
        p.observe(0, 1.0, -1.0).unwrap();
        assert_eq!(p.act(0), (-2f64).exp());
        let x = (-2f64).exp();
        p.observe(0, x, x).unwrap();
        assert_eq!(p.act(0), 1.0);
    }

    #[test]
    fn unconstrained_requires_bernoulli() {
        let inst = build_two_context_instance().unwrap();
        assert!(matches!(
            UnconstrainedBaseline::new(&inst),
            Err(Error::UnsupportedInstance(_))
        ));
    }
}
