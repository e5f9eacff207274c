//! Structural checks for environment partitions.
//!
//! A partition splits the horizon into intervals. Inside one interval the
//! environment must behave "stationarily enough" in two senses:
//!
//! * Gap discipline, per arm: either every gap in the interval is small
//!   (at most the significance threshold 2 * max(T^{-1/2}, B*)), or the
//!   interval's largest gap exceeds its smallest by at most a factor of
//!   2^{1/4}, so the gap never leaves one significance level.
//! * Drift discipline: the best mean moves by at most B* across any two
//!   steps of the interval that are within K of each other (K = number
//!   of arms).
//!
//! [`validate_assumptions`] scores a given partition and returns
//! per-interval evidence. [`minimal_significant_partition`] computes the
//! coarsest conforming partition greedily; interval feasibility is
//! hereditary under shrinking, so the longest-feasible-prefix greedy is
//! exactly minimal. [`minimal_partition_exact`] recomputes the minimum
//! by dynamic programming and exists to cross-check the greedy on small
//! horizons.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::model::EnvironmentSpec;
use crate::error::{Error, Result};

/// Gap scale the significance levels are measured against:
/// max(horizon^{-1/2}, b_star).
pub fn gap_scale(horizon: u64, b_star: f64) -> f64 {
    (1.0 / (horizon as f64).sqrt()).max(b_star)
}

/// Gaps at or below this threshold are insignificant:
/// 2 * max(horizon^{-1/2}, b_star).
pub fn significance_threshold(horizon: u64, b_star: f64) -> f64 {
    2.0 * gap_scale(horizon, b_star)
}

/// Largest allowed max/min gap ratio inside one interval: 2^{1/4}.
/// Computed via nested square roots, which IEEE 754 rounds exactly.
fn ratio_bound() -> f64 {
    2.0_f64.sqrt().sqrt()
}

/// How one arm's gaps behaved inside one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVerdict {
    /// Every gap is at most the significance threshold.
    SmallGap,
    /// max_gap <= 2^{1/4} * min_gap.
    RatioBounded,
    /// Neither branch holds.
    Violation,
}

/// Gap evidence for one (arm, interval) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmEvidence {
    pub arm: usize,
    pub min_gap: f64,
    pub max_gap: f64,
    pub verdict: GapVerdict,
}

/// Evidence for one interval of a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEvidence {
    /// First time step of the interval (1-based, inclusive).
    pub start: u64,
    /// One past the last time step (exclusive).
    pub end: u64,
    /// Largest best-mean spread over any in-interval window of K steps.
    pub max_drift: f64,
    pub drift_ok: bool,
    pub arms: Vec<ArmEvidence>,
    /// True when drift and every arm's gap discipline hold.
    pub ok: bool,
}

/// Outcome of scoring a partition against an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub b_star: f64,
    /// 2 * max(horizon^{-1/2}, b_star).
    pub threshold: f64,
    /// Interval starts, ascending, beginning with 1.
    pub starts: Vec<u64>,
    pub intervals: Vec<IntervalEvidence>,
    /// True when every interval passes.
    pub ok: bool,
}

impl PartitionReport {
    /// Number of intervals in the partition.
    pub fn interval_count(&self) -> usize {
        self.starts.len()
    }
}

fn check_b_star(b_star: f64) -> Result<()> {
    if !(b_star.is_finite() && b_star >= 0.0) {
        return Err(Error::invalid(format!(
            "drift tolerance must be finite and nonnegative, got {b_star}"
        )));
    }
    Ok(())
}

/// Scores the partition given by `starts` (ascending interval starts,
/// beginning with 1) against the environment's gap and drift discipline.
pub fn validate_assumptions(
    env: &EnvironmentSpec,
    starts: &[u64],
    b_star: f64,
) -> Result<PartitionReport> {
    env.validate()?;
    check_b_star(b_star)?;
    if starts.first() != Some(&1) {
        return Err(Error::invalid("partition must start at time step 1"));
    }
    for w in starts.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid(
                "partition starts must be strictly ascending",
            ));
        }
    }
    if let Some(&last) = starts.last() {
        if last > env.horizon {
            return Err(Error::invalid(format!(
                "partition start {last} exceeds horizon {}",
                env.horizon
            )));
        }
    }

    let threshold = significance_threshold(env.horizon, b_star);
    let ratio = ratio_bound();
    let window = env.arms as u64;
    let mut intervals = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(env.horizon + 1);
        let mut mins = vec![f64::INFINITY; env.arms];
        let mut maxs = vec![f64::NEG_INFINITY; env.arms];
        let mut max_drift: f64 = 0.0;
        let mut best_window: VecDeque<(u64, f64)> = VecDeque::new();
        let mut best_window_min: VecDeque<(u64, f64)> = VecDeque::new();
        for t in start..end {
            for k in 0..env.arms {
                let g = env.gap_raw(k, t);
                mins[k] = mins[k].min(g);
                maxs[k] = maxs[k].max(g);
            }
            let best = env.best_mean_raw(t);
            push_window(&mut best_window, t, best, window, true);
            push_window(&mut best_window_min, t, best, window, false);
            let spread = best_window[0].1 - best_window_min[0].1;
            max_drift = max_drift.max(spread);
        }
        let arms: Vec<ArmEvidence> = (0..env.arms)
            .map(|k| {
                let verdict = if maxs[k] <= threshold {
                    GapVerdict::SmallGap
                } else if maxs[k] <= ratio * mins[k] {
                    GapVerdict::RatioBounded
                } else {
                    GapVerdict::Violation
                };
                ArmEvidence {
                    arm: k,
                    min_gap: mins[k],
                    max_gap: maxs[k],
                    verdict,
                }
            })
            .collect();
        let drift_ok = max_drift <= b_star;
        let ok = drift_ok && arms.iter().all(|a| a.verdict != GapVerdict::Violation);
        intervals.push(IntervalEvidence {
            start,
            end,
            max_drift,
            drift_ok,
            arms,
            ok,
        });
    }

    let ok = intervals.iter().all(|iv| iv.ok);
    Ok(PartitionReport {
        b_star,
        threshold,
        starts: starts.to_vec(),
        intervals,
        ok,
    })
}

/// Monotone deque holding the running max (or min) of the best mean over
/// the last `window + 1` steps.
fn push_window(deque: &mut VecDeque<(u64, f64)>, t: u64, value: f64, window: u64, is_max: bool) {
    while let Some(&(front_t, _)) = deque.front() {
        if front_t + window < t {
            deque.pop_front();
        } else {
            break;
        }
    }
    while let Some(&(_, back_v)) = deque.back() {
        let dominated = if is_max {
            back_v <= value
        } else {
            back_v >= value
        };
        if dominated {
            deque.pop_back();
        } else {
            break;
        }
    }
    deque.push_back((t, value));
}

/// Incremental feasibility state for one growing interval.
struct IntervalState {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    best_max: VecDeque<(u64, f64)>,
    best_min: VecDeque<(u64, f64)>,
}

impl IntervalState {
    fn new(arms: usize) -> Self {
        IntervalState {
            mins: vec![f64::INFINITY; arms],
            maxs: vec![f64::NEG_INFINITY; arms],
            best_max: VecDeque::new(),
            best_min: VecDeque::new(),
        }
    }

    /// Extends the interval by step t; returns false (without committing)
    /// when the extension would break gap or drift discipline.
    fn try_push(
        &mut self,
        env: &EnvironmentSpec,
        t: u64,
        threshold: f64,
        ratio: f64,
        b_star: f64,
    ) -> bool {
        let window = env.arms as u64;
        for k in 0..env.arms {
            let g = env.gap_raw(k, t);
            let new_min = self.mins[k].min(g);
            let new_max = self.maxs[k].max(g);
            if new_max > threshold && new_max > ratio * new_min {
                return false;
            }
        }
        let best = env.best_mean_raw(t);
        let high = window_extreme(&self.best_max, t, window, true).max(best);
        let low = window_extreme(&self.best_min, t, window, false).min(best);
        if high - low > b_star {
            return false;
        }
        for k in 0..env.arms {
            let g = env.gap_raw(k, t);
            self.mins[k] = self.mins[k].min(g);
            self.maxs[k] = self.maxs[k].max(g);
        }
        push_window(&mut self.best_max, t, best, window, true);
        push_window(&mut self.best_min, t, best, window, false);
        true
    }
}

/// Max (or min) the deque would report once entries older than the
/// window relative to `t` are dropped, without mutating the deque.
fn window_extreme(deque: &VecDeque<(u64, f64)>, t: u64, window: u64, is_max: bool) -> f64 {
    for &(ft, fv) in deque.iter() {
        if ft + window >= t {
            return fv;
        }
    }
    if is_max {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

/// Computes the minimal conforming partition by greedily extending each
/// interval as far as discipline allows.
///
/// Minimality: any prefix of a conforming interval is conforming (gap
/// extremes only tighten and drift pairs only shrink), so swapping any
/// optimal solution's first cut to the greedy cut never increases the
/// interval count; induction gives equality.
pub fn minimal_significant_partition(
    env: &EnvironmentSpec,
    b_star: f64,
) -> Result<PartitionReport> {
    env.validate()?;
    check_b_star(b_star)?;
    let threshold = significance_threshold(env.horizon, b_star);
    let ratio = ratio_bound();
    let mut starts = vec![1u64];
    let mut state = IntervalState::new(env.arms);
    for t in 1..=env.horizon {
        if !state.try_push(env, t, threshold, ratio, b_star) {
            starts.push(t);
            state = IntervalState::new(env.arms);
            let pushed = state.try_push(env, t, threshold, ratio, b_star);
            debug_assert!(pushed, "single-step intervals are always feasible");
        }
    }
    validate_assumptions(env, &starts, b_star)
}

/// Dynamic-programming recomputation of the minimal conforming
/// partition. Quadratic in the horizon; intended as a small-horizon
/// cross-check for [`minimal_significant_partition`].
pub fn minimal_partition_exact(env: &EnvironmentSpec, b_star: f64) -> Result<PartitionReport> {
    env.validate()?;
    check_b_star(b_star)?;
    let horizon = env.horizon as usize;
    let threshold = significance_threshold(env.horizon, b_star);
    let ratio = ratio_bound();

    // reach[i] = largest end (exclusive) such that [i, reach[i]) conforms.
    let mut reach = vec![0u64; horizon + 2];
    for (i, slot) in reach.iter_mut().enumerate().skip(1).take(horizon) {
        let mut state = IntervalState::new(env.arms);
        let mut j = i as u64;
        while j <= env.horizon && state.try_push(env, j, threshold, ratio, b_star) {
            j += 1;
        }
        *slot = j;
        if j == env.horizon + 1 && i == 1 {
            break;
        }
    }

    const INF: usize = usize::MAX / 2;
    let mut dp = vec![INF; horizon + 2];
    let mut from = vec![0usize; horizon + 2];
    dp[1] = 0;
    for j in 2..=horizon + 1 {
        for i in 1..j {
            if dp[i] < INF && reach[i] >= j as u64 && dp[i] + 1 < dp[j] {
                dp[j] = dp[i] + 1;
                from[j] = i;
            }
        }
    }

    let mut starts = Vec::new();
    let mut j = horizon + 1;
    while j > 1 {
        let i = from[j];
        starts.push(i as u64);
        j = i;
    }
    starts.reverse();
    validate_assumptions(env, &starts, b_star)
}
