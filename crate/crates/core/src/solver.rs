//! Optimal static K-Lipschitz decision rules on a uniform decision grid.
//!
//! The feasible set is `{φ : |φ(c) - φ(c')| <= K d(c, c')}` with every value
//! in `[ε, 1]`. For up to four contexts the grid problem is solved exactly by
//! branch and bound; beyond that by coordinate ascent with random restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Instance, Metric};

/// Slack on every Lipschitz inequality.
pub const LIPSCHITZ_TOL: f64 = 1e-9;
/// Values closer than this are treated as ties.
const TIE_TOL: f64 = 1e-12;
/// Largest context count solved exhaustively.
pub const EXACT_MAX_CONTEXTS: usize = 4;
pub const DEFAULT_GRID: usize = 1001;
const RESTARTS: usize = 20;

/// Deterministic map from contexts to decisions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    pub values: Vec<f64>,
}

impl DecisionRule {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(n: usize, x: f64) -> Self {
        Self { values: vec![x; n] }
    }

    pub fn decision(&self, c: usize) -> f64 {
        self.values[c]
    }

    /// Largest breach `|φ(c) - φ(c')| - K d(c, c')` over all pairs, or 0.
    pub fn lipschitz_excess(&self, k: f64, metric: &Metric) -> f64 {
        let n = self.values.len();
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in (a + 1)..n {
                let gap = (self.values[a] - self.values[b]).abs() - k * metric.distance(a, b);
                worst = worst.max(gap);
            }
        }
        worst
    }

    pub fn is_lipschitz(&self, k: f64, metric: &Metric) -> bool {
        self.lipschitz_excess(k, metric) <= LIPSCHITZ_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ExactGrid,
    CoordinateAscent,
    BruteForce,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::ExactGrid => "exact-grid",
            SolveMethod::CoordinateAscent => "coordinate-ascent",
            SolveMethod::BruteForce => "brute-force",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub rule: DecisionRule,
    /// Expected utility of `rule` under the solved parameter.
    pub value: f64,
    pub method: SolveMethod,
    pub grid_step: f64,
}

/// Uniform grid `{lo + k (1 - lo) / (n - 1)}` with both endpoints exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionGrid {
    pub lo: f64,
    pub points: usize,
}

impl DecisionGrid {
    pub fn new(lo: f64, points: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) {
            return Err(Error::Domain(lo, "grid lower bound must lie in [0, 1)".into()));
        }
        if points < 2 {
            return Err(Error::Domain(
                points as f64,
                "grid needs at least two points".into(),
            ));
        }
        Ok(Self { lo, points })
    }

    pub fn step(&self) -> f64 {
        (1.0 - self.lo) / (self.points - 1) as f64
    }

    #[inline]
    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            1.0
        } else {
            self.lo + k as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.value(k)).collect()
    }

    /// Largest index difference allowed between two contexts at distance `d`,
    /// closed under the triangle inequality.
    pub fn index_gaps(&self, k: f64, metric: &Metric) -> Vec<Vec<usize>> {
        let n = metric.len();
        let h = self.step();
        let cap = self.points - 1;
        let mut gaps: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let raw = (k * metric.distance(a, b) + LIPSCHITZ_TOL) / h;
                        if raw >= cap as f64 {
                            cap
                        } else {
                            raw.floor() as usize
                        }
                    })
                    .collect()
            })
            .collect();
        // Implied difference constraints: gap[a][c] <= gap[a][b] + gap[b][c].
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    let via = gaps[a][b] + gaps[b][c];
                    if via < gaps[a][c] {
                        gaps[a][c] = via;
                    }
                }
            }
        }
        gaps
    }
}

/// Per-context weighted utilities `p(c) * mean(x_k, c, w)` on the grid.
fn utility_table(instance: &Instance, w: usize, grid: &DecisionGrid) -> Vec<Vec<f64>> {
    let xs = grid.values();
    instance
        .dist
        .probs()
        .iter()
        .enumerate()
        .map(|(c, p)| xs.iter().map(|&x| p * instance.model.mean(x, c, w)).collect())
        .collect()
}

/// Sparse table for O(1) range maxima.
struct RangeMax {
    levels: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=values.len() - 2 * width)
                .map(|i| prev[i].max(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Max over the inclusive range `[lo, hi]`.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.levels[level];
        row[lo].max(row[hi + 1 - (1 << level)])
    }
}

struct BranchAndBound<'a> {
    table: &'a [Vec<f64>],
    gaps: &'a [Vec<usize>],
    range_max: Vec<RangeMax>,
    top: usize,
    assigned: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl BranchAndBound<'_> {
    fn allowed(&self, c: usize, depth: usize) -> Option<(usize, usize)> {
        let (mut lo, mut hi) = (0usize, self.top);
        for j in 0..depth {
            let g = self.gaps[c][j];
            let kj = self.assigned[j];
            lo = lo.max(kj.saturating_sub(g));
            hi = hi.min(kj + g);
        }
        (lo <= hi).then_some((lo, hi))
    }

    fn best_value(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0)
    }

    fn search(&mut self, depth: usize, acc: f64) {
        let n = self.table.len();
        if depth == n {
            if acc > self.best_value() + TIE_TOL {
                self.best = Some((acc, self.assigned.clone()));
            }
            return;
        }
        let mut bound = acc;
        for c in depth..n {
            match self.allowed(c, depth) {
                Some((lo, hi)) => bound += self.range_max[c].query(lo, hi),
                None => return,
            }
        }
        if bound <= self.best_value() + TIE_TOL {
            return;
        }
        let (lo, hi) = self.allowed(depth, depth).expect("checked above");
        for k in lo..=hi {
            self.assigned[depth] = k;
            let v = self.table[depth][k];
            self.search(depth + 1, acc + v);
        }
    }
}

fn exact_grid(table: &[Vec<f64>], gaps: &[Vec<usize>], points: usize) -> Vec<usize> {
    let mut bb = BranchAndBound {
        table,
        gaps,
        range_max: table.iter().map(|row| RangeMax::new(row)).collect(),
        top: points - 1,
        assigned: vec![0; table.len()],
        best: None,
    };
    bb.search(0, 0.0);
    bb.best.expect("constant rules are always feasible").1
}

fn repair_indices(idx: &[usize], gaps: &[Vec<usize>]) -> Vec<usize> {
    (0..idx.len())
        .map(|c| (0..idx.len()).map(|j| idx[j] + gaps[c][j]).min().unwrap())
        .collect()
}

fn total(table: &[Vec<f64>], idx: &[usize]) -> f64 {
    idx.iter().enumerate().map(|(c, &k)| table[c][k]).sum()
}

fn ascend(table: &[Vec<f64>], gaps: &[Vec<usize>], top: usize, mut idx: Vec<usize>) -> Vec<usize> {
    let n = idx.len();
    loop {
        let mut improved = false;
        for c in 0..n {
            let (mut lo, mut hi) = (0usize, top);
            for j in (0..n).filter(|&j| j != c) {
                lo = lo.max(idx[j].saturating_sub(gaps[c][j]));
                hi = hi.min(idx[j] + gaps[c][j]);
            }
            let mut best = lo;
            for k in lo..=hi {
                if table[c][k] > table[c][best] + TIE_TOL {
                    best = k;
                }
            }
            if table[c][best] > table[c][idx[c]] + TIE_TOL {
                improved = true;
                idx[c] = best;
            }
        }
        if !improved {
            return idx;
        }
    }
}

fn coordinate_ascent(table: &[Vec<f64>], gaps: &[Vec<usize>], points: usize) -> Vec<usize> {
    let n = table.len();
    let top = points - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..RESTARTS {
        let start = if restart == 0 {
            vec![0; n]
        } else {
            let raw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=top)).collect();
            repair_indices(&raw, gaps)
        };
        let idx = ascend(table, gaps, top, start);
        let v = total(table, &idx);
        let better = match &best {
            None => true,
            Some((bv, bi)) => v > bv + TIE_TOL || (v >= bv - TIE_TOL && idx < *bi),
        };
        if better {
            best = Some((v, idx));
        }
    }
    best.unwrap().1
}

fn report(
    instance: &Instance,
    w: usize,
    grid: &DecisionGrid,
    idx: &[usize],
    method: SolveMethod,
) -> SolveReport {
    let rule = DecisionRule::new(idx.iter().map(|&k| grid.value(k)).collect());
    SolveReport {
        value: instance.rule_value(&rule.values, w),
        rule,
        method,
        grid_step: grid.step(),
    }
}

fn check_param(instance: &Instance, w: usize) -> Result<()> {
    if w < instance.num_params() {
        Ok(())
    } else {
        Err(Error::UnknownParameter(w))
    }
}

/// Optimal K-Lipschitz rule with values in `[lower_bound, 1]` among rules on
/// the uniform grid of `grid_points` points. Ties go to the
/// lexicographically smallest rule.
pub fn solve_lipschitz_optimal(
    instance: &Instance,
    w: usize,
    lower_bound: f64,
    grid_points: usize,
) -> Result<SolveReport> {
    check_param(instance, w)?;
    let grid = DecisionGrid::new(lower_bound, grid_points)?;
    let table = utility_table(instance, w, &grid);
    let gaps = grid.index_gaps(instance.k, &instance.metric);
    let (idx, method) = if instance.num_contexts() <= EXACT_MAX_CONTEXTS {
        (exact_grid(&table, &gaps, grid.points), SolveMethod::ExactGrid)
    } else {
        (
            coordinate_ascent(&table, &gaps, grid.points),
            SolveMethod::CoordinateAscent,
        )
    };
    Ok(report(instance, w, &grid, &idx, method))
}

/// Exhaustive enumeration of every grid rule. Verification oracle only.
pub fn brute_force_grid_oracle(
    instance: &Instance,
    w: usize,
    lower_bound: f64,
    grid_points: usize,
) -> Result<SolveReport> {
    check_param(instance, w)?;
    let grid = DecisionGrid::new(lower_bound, grid_points)?;
    let n = instance.num_contexts();
    let combos = (grid_points as f64).powi(n as i32);
    if n > EXACT_MAX_CONTEXTS || combos > 1e8 {
        return Err(Error::Resource(format!(
            "brute force over {grid_points}^{n} rules exceeds the 1e8 guard"
        )));
    }
    let xs = grid.values();
    let mut idx = vec![0usize; n];
    let mut rule = vec![0.0; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    'outer: loop {
        for (c, &k) in idx.iter().enumerate() {
            rule[c] = xs[k];
        }
        if DecisionRule::new(rule.clone()).is_lipschitz(instance.k, &instance.metric) {
            let v = instance.rule_value(&rule, w);
            if best.as_ref().is_none_or(|(bv, _)| v > bv + TIE_TOL) {
                best = Some((v, idx.clone()));
            }
        }
        // Odometer with the last context varying fastest: lexicographic order.
        let mut c = n;
        loop {
            if c == 0 {
                break 'outer;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < grid_points {
                break;
            }
            idx[c] = 0;
        }
    }
    let (_, idx) = best.expect("constant rules are always feasible");
    Ok(report(instance, w, &grid, &idx, SolveMethod::BruteForce))
}

/// Largest K-Lipschitz rule pointwise below `values`:
/// `φ'(c) = min_{c'} (values[c'] + K d(c, c'))`, clamped to `[0, 1]`.
pub fn lipschitz_repair(values: &[f64], k: f64, metric: &Metric) -> DecisionRule {
    let n = values.len();
    DecisionRule::new(
        (0..n)
            .map(|c| {
                (0..n)
                    .map(|j| values[j] + k * metric.distance(c, j))
                    .fold(f64::INFINITY, f64::min)
                    .clamp(0.0, 1.0)
            })
            .collect(),
    )
}
