use std::collections::HashMap;

use crate::audit::FairnessKind;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::solver::{DecisionGrid, LIPSCHITZ_TOL};

/// Upper limit on `T * C * G` for [`dp_optimal_value`].
pub const DP_GUARD: usize = 10_000_000;
const MEMO_LIMIT: usize = 20_000_000;

/// Largest index shift allowed between contexts: `floor(K d / h)`.
///
/// A grid decision `k'` satisfies `x_k' >= x_k - K d` exactly when
/// `k' >= k - floor(K d / h)`, so the grid DP is exact.
fn raw_gaps(instance: &Instance, grid: &DecisionGrid) -> Vec<Vec<i64>> {
    let h = grid.step();
    let n = instance.num_contexts();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let raw = (instance.k * instance.metric.distance(a, b) + LIPSCHITZ_TOL) / h;
                    raw.min(grid.points as f64).floor() as i64
                })
                .collect()
        })
        .collect()
}

struct Dp<'a> {
    kind: FairnessKind,
    probs: &'a [f64],
    /// `mean(x_k, c, w)`, indexed `[c][k]`.
    utils: Vec<Vec<f64>>,
    /// `max_{j >= k} utils[c][j]`.
    suffix_max: Vec<Vec<f64>>,
    gaps: Vec<Vec<i64>>,
    top: i64,
    horizon: usize,
    /// One memo per time step, keyed by state.
    memo: Vec<HashMap<Vec<i64>, f64>>,
    entries: usize,
}

impl Dp<'_> {
    fn feasible(&self, state: &[i64], c: usize, k: i64) -> bool {
        match self.kind {
            // state holds the envelope index per context.
            FairnessKind::InHindsight => k >= state[c],
            // state holds the committed index per context, -1 when unset.
            FairnessKind::AcrossTime => state
                .iter()
                .enumerate()
                .filter(|(_, &s)| s >= 0)
                .all(|(j, &s)| (k - s).abs() <= self.gaps[c][j]),
        }
    }

    fn next_state(&self, state: &[i64], c: usize, k: i64) -> Vec<i64> {
        let mut next = state.to_vec();
        match self.kind {
            FairnessKind::InHindsight => {
                for (j, l) in next.iter_mut().enumerate() {
                    *l = (*l).max(k - self.gaps[c][j]);
                }
            }
            FairnessKind::AcrossTime => next[c] = k,
        }
        next
    }

    /// Best expected utility from step `t` (1-based) to the horizon.
    fn value(&mut self, t: usize, state: &[i64]) -> Result<f64> {
        if t > self.horizon {
            return Ok(0.0);
        }
        if let Some(v) = self.memo[t].get(state) {
            return Ok(*v);
        }
        let mut total = 0.0;
        for c in 0..self.probs.len() {
            let p = self.probs[c];
            if p == 0.0 {
                continue;
            }
            let best = if t == self.horizon && self.kind == FairnessKind::InHindsight {
                self.suffix_max[c][state[c].max(0) as usize]
            } else {
                let mut best = f64::NEG_INFINITY;
                for k in 0..=self.top {
                    if !self.feasible(state, c, k) {
                        continue;
                    }
                    let here = self.utils[c][k as usize];
                    let rest = if t == self.horizon {
                        0.0
                    } else {
                        let next = self.next_state(state, c, k);
                        self.value(t + 1, &next)?
                    };
                    best = best.max(here + rest);
                }
                best
            };
            total += p * best;
        }
        self.entries += 1;
        if self.entries > MEMO_LIMIT {
            return Err(Error::Resource(format!(
                "dynamic program exceeded {MEMO_LIMIT} states"
            )));
        }
        self.memo[t].insert(state.to_vec(), total);
        Ok(total)
    }
}

/// Maximal expected total utility over `horizon` steps among policies that
/// are fair across time or in hindsight (constant `K`), with decisions on a
/// uniform grid of `grid_points` points and the parameter `w` known.
pub fn dp_optimal_value(
    instance: &Instance,
    w: usize,
    horizon: usize,
    kind: FairnessKind,
    grid_points: usize,
) -> Result<f64> {
    if w >= instance.num_params() {
        return Err(Error::UnknownParameter(w));
    }
    if horizon == 0 {
        return Ok(0.0);
    }
    let n = instance.num_contexts();
    let size = horizon.saturating_mul(n).saturating_mul(grid_points);
    if size > DP_GUARD {
        return Err(Error::Resource(format!(
            "T*C*G = {size} exceeds the dynamic-program guard {DP_GUARD}"
        )));
    }
    let grid = DecisionGrid::new(0.0, grid_points)?;
    let xs = grid.values();
    let utils: Vec<Vec<f64>> = (0..n)
        .map(|c| xs.iter().map(|&x| instance.model.mean(x, c, w)).collect())
        .collect();
    let suffix_max = utils
        .iter()
        .map(|row| {
            let mut out = row.clone();
            for k in (0..out.len() - 1).rev() {
                out[k] = out[k].max(out[k + 1]);
            }
            out
        })
        .collect();
    let mut dp = Dp {
        kind,
        probs: instance.dist.probs(),
        utils,
        suffix_max,
        gaps: raw_gaps(instance, &grid),
        top: grid_points as i64 - 1,
        horizon,
        memo: vec![HashMap::new(); horizon + 1],
        entries: 0,
    };
    let start = match kind {
        FairnessKind::InHindsight => vec![0; n],
        FairnessKind::AcrossTime => vec![-1; n],
    };
    dp.value(1, &start)
}
