//! Cautious fair exploration.
//!
//! Play the same small decision `ε` for every context while accumulating
//! pairwise log-likelihood ratios `Λ(w, w')`. Once some `w` beats every other
//! parameter with `max_s Λ_s(w, w') > ln T`, commit to it permanently and play
//! the optimal K-Lipschitz rule restricted to `[ε, 1]`.
//!
//! Exploration decisions are equal across contexts and exploitation decisions
//! are all `>= ε`, so the resulting policy is fair in hindsight.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{locate_outcome, Instance, PROB_FLOOR};
use crate::policy::Policy;
use crate::solver::{solve_lipschitz_optimal, DecisionRule, DEFAULT_GRID};

/// Exploration decision `T^{-1/(M+1)}` for horizon `T` and learnability order `M`.
///
/// The exploitation grid starts at `ε` itself, so no further snapping is needed.
pub fn epsilon_schedule(horizon: usize, learn_exponent: f64) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::Domain(horizon as f64, "horizon must be at least 2".into()));
    }
    if !(learn_exponent >= 0.0 && learn_exponent.is_finite()) {
        return Err(Error::Domain(
            learn_exponent,
            "learn exponent must be >= 0".into(),
        ));
    }
    let eps = (horizon as f64).powf(-1.0 / (learn_exponent + 1.0));
    Ok(eps.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Explore,
    Exploit,
}

/// Learning state of one CaFE episode.
#[derive(Debug, Clone)]
pub struct CafeState {
    pub phase: Phase,
    pub epsilon: f64,
    /// `Λ(w, w')`, antisymmetric.
    pub log_ratios: Vec<Vec<f64>>,
    /// `max_{s <= t} Λ_s(w, w')`, starting from `Λ_0 = 0`.
    pub running_max: Vec<Vec<f64>>,
    /// Exit threshold `ln T`.
    pub threshold: f64,
    pub w_star: Option<usize>,
    pub exploit_rule: Option<DecisionRule>,
    /// Number of observations absorbed.
    pub t: usize,
    /// Parameters that qualified simultaneously at exit, if more than one did.
    pub ambiguous_exit: Option<Vec<usize>>,
}

impl CafeState {
    pub fn new(num_params: usize, horizon: usize, epsilon: f64) -> Self {
        Self {
            phase: Phase::Explore,
            epsilon,
            log_ratios: vec![vec![0.0; num_params]; num_params],
            running_max: vec![vec![0.0; num_params]; num_params],
            threshold: (horizon as f64).ln(),
            w_star: None,
            exploit_rule: None,
            t: 0,
            ambiguous_exit: None,
        }
    }

    fn qualifies(&self, w: usize) -> bool {
        self.running_max[w]
            .iter()
            .enumerate()
            .all(|(w2, m)| w2 == w || *m > self.threshold)
    }

    /// Parameters whose running maxima exceed the threshold against every rival.
    pub fn exit_candidates(&self) -> Vec<usize> {
        (0..self.log_ratios.len())
            .filter(|&w| self.qualifies(w))
            .collect()
    }

    /// Add one step's per-parameter log-likelihoods to every pairwise ratio.
    pub fn absorb(&mut self, log_likelihoods: &[f64]) {
        let n = log_likelihoods.len();
        for w in 0..n {
            for w2 in (w + 1)..n {
                let delta = log_likelihoods[w] - log_likelihoods[w2];
                self.log_ratios[w][w2] += delta;
                self.log_ratios[w2][w] -= delta;
                for (a, b) in [(w, w2), (w2, w)] {
                    if self.log_ratios[a][b] > self.running_max[a][b] {
                        self.running_max[a][b] = self.log_ratios[a][b];
                    }
                }
            }
        }
        self.t += 1;
    }
}

/// Cautious fair exploration over a known horizon.
#[derive(Debug, Clone)]
pub struct Cafe<'a> {
    instance: &'a Instance,
    grid_points: usize,
    state: CafeState,
}

impl<'a> Cafe<'a> {
    pub fn new(instance: &'a Instance, horizon: usize, epsilon: f64, grid_points: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain(0.0, "horizon must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(
                epsilon,
                "exploration decision must lie in (0, 1)".into(),
            ));
        }
        let mut cafe = Self {
            instance,
            grid_points,
            state: CafeState::new(instance.num_params(), horizon, epsilon),
        };
        // With a single parameter there is nothing to learn.
        cafe.exit_check()?;
        Ok(cafe)
    }

    /// CaFE with `ε` from [`epsilon_schedule`] using the model's declared `M`.
    pub fn with_schedule(instance: &'a Instance, horizon: usize) -> Result<Self> {
        let eps = epsilon_schedule(horizon, instance.model.meta().learn_exponent)?;
        Self::new(instance, horizon, eps, DEFAULT_GRID)
    }

    pub fn state(&self) -> &CafeState {
        &self.state
    }

    /// Enter the exploit phase if exactly one parameter qualifies. Returns
    /// the learned parameter when a transition happens.
    pub fn exit_check(&mut self) -> Result<Option<usize>> {
        if self.state.phase == Phase::Exploit {
            return Ok(None);
        }
        let candidates = self.state.exit_candidates();
        let w_star = match candidates.as_slice() {
            [] => return Ok(None),
            [w] => *w,
            many => {
                warn!("several parameters qualified at exit: {many:?}");
                self.state.ambiguous_exit = Some(many.to_vec());
                // Largest worst-case margin, lowest index on ties.
                let margin = |w: usize| {
                    self.state.running_max[w]
                        .iter()
                        .enumerate()
                        .filter(|(w2, _)| *w2 != w)
                        .map(|(_, m)| *m)
                        .fold(f64::INFINITY, f64::min)
                };
                many.iter()
                    .copied()
                    .fold(None::<usize>, |best, w| match best {
                        Some(b) if margin(b) >= margin(w) => Some(b),
                        _ => Some(w),
                    })
                    .unwrap()
            }
        };
        let report = solve_lipschitz_optimal(self.instance, w_star, self.state.epsilon, self.grid_points)?;
        self.state.w_star = Some(w_star);
        self.state.exploit_rule = Some(report.rule);
        self.state.phase = Phase::Exploit;
        Ok(Some(w_star))
    }
}

impl Policy for Cafe<'_> {
    fn name(&self) -> &str {
        "cafe"
    }

    fn act(&mut self, c: usize) -> f64 {
        match (&self.state.phase, &self.state.exploit_rule) {
            (Phase::Exploit, Some(rule)) => rule.decision(c),
            _ => self.state.epsilon,
        }
    }

    fn observe(&mut self, c: usize, x: f64, u: f64) -> Result<()> {
        if self.state.phase == Phase::Exploit {
            self.state.t += 1;
            return Ok(());
        }
        let model = self.instance.model.as_ref();
        let idx = locate_outcome(model, x, c, u).ok_or(Error::Observation {
            utility: u,
            decision: x,
            context: c,
        })?;
        let lls: Vec<f64> = (0..model.num_params())
            .map(|w| model.probabilities(x, c, w)[idx].max(PROB_FLOOR).ln())
            .collect();
        self.state.absorb(&lls);
        self.exit_check()?;
        Ok(())
    }

    fn exploring(&self) -> bool {
        self.state.phase == Phase::Explore
    }

    fn learned(&self) -> Option<usize> {
        self.state.w_star
    }

    fn learns(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_bernoulli_instance, build_two_context_instance};
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_values() {
        assert_abs_diff_eq!(epsilon_schedule(10_000, 1.0).unwrap(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon_schedule(1000, 0.0).unwrap(), 0.001, epsilon = 1e-15);
        assert_abs_diff_eq!(epsilon_schedule(2, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(epsilon_schedule(1, 0.0).is_err());
    }

    #[test]
    fn explore_plays_epsilon_everywhere() {
        let inst = build_bernoulli_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 100, 0.01, 1001).unwrap();
        assert_eq!(cafe.act(0), 0.01);
        assert!(cafe.exploring());
    }

    #[test]
    fn bernoulli_log_ratio_increments() {
        let inst = build_bernoulli_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 100, 0.01, 1001).unwrap();
        cafe.observe(0, 0.01, 0.01).unwrap();
        assert_abs_diff_eq!(cafe.state().log_ratios[0][1], 3f64.ln(), epsilon = 1e-12);
        cafe.observe(0, 0.01, -0.01).unwrap();
        cafe.observe(0, 0.01, -0.01).unwrap();
        assert_abs_diff_eq!(cafe.state().log_ratios[0][1], -(3f64.ln()), epsilon = 1e-12);
        assert_eq!(cafe.state().log_ratios[1][0], -cafe.state().log_ratios[0][1]);
        assert_abs_diff_eq!(cafe.state().running_max[0][1], 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn observation_outside_support_is_rejected() {
        let inst = build_bernoulli_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 100, 0.01, 1001).unwrap();
        assert!(matches!(
            cafe.observe(0, 0.01, 0.5),
            Err(Error::Observation { .. })
        ));
    }

    #[test]
    fn exit_threshold() {
        let mut state = CafeState::new(2, 100, 0.01);
        state.running_max[0][1] = 4.7;
        assert_eq!(state.exit_candidates(), vec![0]);
        state.running_max[0][1] = 4.0;
        assert!(state.exit_candidates().is_empty());
    }

    #[test]
    fn exits_after_enough_evidence() {
        let inst = build_bernoulli_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 100, 0.01, 1001).unwrap();
        // ln 100 / ln 3 ≈ 4.19, so five favourable outcomes cross the threshold.
        for i in 0..5 {
            assert!(cafe.exploring(), "exited after {i}");
            cafe.observe(0, 0.01, 0.01).unwrap();
        }
        assert!(!cafe.exploring());
        assert_eq!(cafe.learned(), Some(0));
        assert_eq!(cafe.act(0), 1.0);
    }

    #[test]
    fn learning_b_pins_at_epsilon() {
        let inst = build_bernoulli_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 100, 0.01, 1001).unwrap();
        for _ in 0..5 {
            cafe.observe(0, 0.01, -0.01).unwrap();
        }
        assert_eq!(cafe.learned(), Some(1));
        assert_eq!(cafe.act(0), 0.01);
    }

    #[test]
    fn single_parameter_exits_immediately() {
        let inst = build_two_context_instance().unwrap();
        let mut cafe = Cafe::new(&inst, 1000, 0.01, 1001).unwrap();
        assert!(!cafe.exploring());
        // The [0.01, 1] grid has step 0.00099; A gets the first point >= 0.5.
        assert_abs_diff_eq!(cafe.act(0), 0.5, epsilon = 0.001);
        assert!(cafe.act(0) >= 0.5);
        assert_eq!(cafe.act(1), 1.0);
        cafe.observe(0, 0.5, -0.5).unwrap();
    }

    #[test]
    fn running_max_keeps_early_crossing() {
        let mut state = CafeState::new(2, 100, 0.01);
        // Without a check in between, both directions can cross.
        state.absorb(&[0.0, -5.0]);
        state.absorb(&[-10.0, 0.0]);
        assert_eq!(state.log_ratios[0][1], -5.0);
        assert_eq!(state.running_max[0][1], 5.0);
        assert_eq!(state.running_max[1][0], 5.0);
        assert_eq!(state.exit_candidates(), vec![0, 1]);
    }
}
