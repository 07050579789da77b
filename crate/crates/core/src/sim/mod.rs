//! Episode runner, regret accounting, Monte Carlo aggregation and the exact
//! small-horizon dynamic program.

mod dp;
mod experiment;

pub use dp::{dp_optimal_value, DP_GUARD};
pub use experiment::{
    benchmark_values, derive_seed, monte_carlo, write_results_csv, CellSummary, ExperimentOutput,
    ExperimentSpec, PolicySpec, PriorChoice, RESULTS_HEADER,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audit::{Step, Trace};
use crate::error::{Error, Result};
use crate::model::{sample_utility, Instance};
use crate::policy::Policy;

/// Per-step random stream used by every simulation.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    /// Empty unless the episode was run with trace recording.
    pub trace: Trace,
    pub horizon: usize,
    /// Sum of sampled utilities.
    pub realized_utility: f64,
    /// Sum of mean utilities at the decisions taken.
    pub pseudo_utility: f64,
    /// Steps acted on while the policy was exploring.
    pub explore_length: usize,
    /// For learning policies: whether the learned parameter is the true one.
    pub w_star_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    pub instance: String,
    pub policy: String,
    pub w: usize,
    pub horizon: usize,
    pub rep: usize,
    pub seed: u64,
    /// `T U_K(w)` minus the pseudo-utility.
    pub regret: f64,
    pub explore_len: usize,
    pub w_star_correct: Option<bool>,
}

/// Run `policy` for `horizon` steps under the true parameter `w`.
pub fn run_episode(
    policy: &mut dyn Policy,
    instance: &Instance,
    w: usize,
    horizon: usize,
    seed: u64,
) -> Result<EpisodeResult> {
    let mut rng = SimRng::seed_from_u64(seed);
    run_episode_with(policy, instance, w, horizon, &mut rng, true)
}

/// [`run_episode`] with an explicit stream; `record` controls whether the
/// full trace is kept.
pub fn run_episode_with(
    policy: &mut dyn Policy,
    instance: &Instance,
    w: usize,
    horizon: usize,
    rng: &mut SimRng,
    record: bool,
) -> Result<EpisodeResult> {
    if horizon == 0 {
        return Err(Error::Domain(0.0, "horizon must be at least 1".into()));
    }
    if w >= instance.num_params() {
        return Err(Error::UnknownParameter(w));
    }
    let model = instance.model.as_ref();
    let mut trace = if record {
        Trace::with_capacity(horizon)
    } else {
        Trace::new()
    };
    let (mut realized, mut pseudo) = (0.0, 0.0);
    let mut explore_length = 0;
    for t in 1..=horizon {
        let c = instance.dist.sample(rng);
        if policy.exploring() {
            explore_length += 1;
        }
        let x = policy.act(c);
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::PolicyContract { t, decision: x });
        }
        let u = sample_utility(model, x, c, w, rng)?;
        realized += u;
        pseudo += model.mean(x, c, w);
        if record {
            trace.push(Step {
                t,
                context: c,
                decision: x,
                utility: u,
            })?;
        }
        policy.observe(c, x, u)?;
    }
    let w_star_correct = policy.learns().then(|| policy.learned() == Some(w));
    Ok(EpisodeResult {
        trace,
        horizon,
        realized_utility: realized,
        pseudo_utility: pseudo,
        explore_length,
        w_star_correct,
    })
}

/// Regret of an episode against the static benchmark value `u_k = U_K(w)`.
pub fn regret(episode: &EpisodeResult, u_k: f64) -> f64 {
    episode.horizon as f64 * u_k - episode.pseudo_utility
}
