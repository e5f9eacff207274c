//! Round ledger: the per-episode record of active sets, pulls, and
//! observations, plus every estimator the policies query against it.
//!
//! Time is organized in rounds. Round r starts at t_r = origin +
//! sum of |K_{r'}| over r' < r (origin is 1 for a full run and larger
//! for suffix replays); the arms of the active set K_r are sampled once
//! each in ascending order. The final round of a run may be truncated by
//! the horizon, in which case the recorded pulls are a prefix of the
//! active set.
//!
//! Window queries address half-open ranges of rounds: the window
//! (r1, r2) covers data rounds r1..r2-1. Estimates over a window:
//!
//! * relative gap of arm k against comparator k': the average of
//!   X_j(k') - X_j(k) over rounds j where k was observed, divided by
//!   T_k, the number of k's observations in the window; requires k' to
//!   be active in every round of the window,
//! * gap estimate of k: the largest relative estimate over all
//!   persistent comparators (lowest index wins ties), with the
//!   convention that an unobserved arm (T_k = 0) estimates 0,
//! * observed (gap-channel) estimate: minus the average of k's own
//!   observations,
//! * gap lower bound: the estimate shrunk by a confidence radius and a
//!   drift allowance, floored at zero.
//!
//! All window sums come from prefix arrays updated on push, so a query
//! costs O(1) (O(K) when it maximizes over comparators) and repeated
//! queries of the same window return bitwise-identical values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::model::ObservationMode;
use crate::env::partition::gap_scale;
use crate::error::{Error, Result};

/// One recorded observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullObs {
    pub arm: usize,
    pub time: u64,
    pub value: f64,
}

/// One completed (possibly truncated) round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub index: usize,
    /// Time step of the round's first pull.
    pub start_time: u64,
    /// Active set, ascending.
    pub active: Vec<usize>,
    /// Observations, one per sampled arm; a prefix of `active`.
    pub pulls: Vec<PullObs>,
    /// Exploration quotas as they stood when the round was recorded.
    pub quota_snapshot: Vec<f64>,
}

/// Run-level constants shared by every lower-bound and detection query:
/// the observation mode, the log term L = ln(2 K T^3), and the drift
/// allowances derived from B* and the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundContext {
    pub mode: ObservationMode,
    pub arms: usize,
    pub horizon: u64,
    pub b_star: f64,
    /// ln(2 K T^3), natural log.
    pub log_term: f64,
}

impl BoundContext {
    pub fn new(mode: ObservationMode, arms: usize, horizon: u64, b_star: f64) -> Result<Self> {
        if arms == 0 || horizon == 0 {
            return Err(Error::invalid(
                "bound context needs arms >= 1, horizon >= 1",
            ));
        }
        if !(b_star.is_finite() && b_star >= 0.0) {
            return Err(Error::invalid(format!(
                "drift tolerance must be finite and nonnegative, got {b_star}"
            )));
        }
        let t = horizon as f64;
        Ok(BoundContext {
            mode,
            arms,
            horizon,
            b_star,
            log_term: (2.0 * arms as f64 * t * t * t).ln(),
        })
    }

    /// Confidence radius for a gap estimate built from `pulls`
    /// observations (infinite when pulls = 0).
    pub fn radius(&self, pulls: u32) -> f64 {
        if pulls == 0 {
            return f64::INFINITY;
        }
        let n = pulls as f64;
        match self.mode {
            ObservationMode::Mean => (2.0 * self.log_term / n).sqrt(),
            ObservationMode::Gap => (self.log_term / (2.0 * n)).sqrt(),
        }
    }

    /// Drift allowance subtracted alongside the radius.
    pub fn drift_allowance(&self) -> f64 {
        match self.mode {
            ObservationMode::Mean => 2.0 * self.b_star,
            ObservationMode::Gap => 2.0 * gap_scale(self.horizon, self.b_star),
        }
    }
}

/// Per-episode record of rounds with prefix-sum accelerated queries.
#[derive(Clone, Debug)]
pub struct EpisodeLedger {
    arms: usize,
    origin: u64,
    rounds: Vec<RoundRecord>,
    episode_start: usize,
    episode_index: usize,
    last_pull: Vec<Option<u64>>,
    quota: Vec<f64>,
    frozen: Vec<bool>,
    /// cum_steps[j] = total active-set size over rounds 1..=j.
    cum_steps: Vec<u64>,
    /// cum_pull[j * arms + k] = observations of k in rounds 1..=j.
    cum_pull: Vec<u32>,
    /// cum_active[j * arms + k] = rounds among 1..=j with k active.
    cum_active: Vec<u32>,
    /// cum_value[j * arms + k] = sum of k's observations in rounds 1..=j.
    cum_value: Vec<f64>,
    /// cum_diff[(j * arms + k) * arms + kp] = sum of X(kp) - X(k) over
    /// rounds 1..=j where both were observed.
    cum_diff: Vec<f64>,
}

impl EpisodeLedger {
    /// Empty ledger whose first round starts at time step 1.
    pub fn new(arms: usize) -> Result<Self> {
        EpisodeLedger::with_origin(arms, 1)
    }

    /// Empty ledger whose first round starts at `origin`, for suffix
    /// replays that begin mid-horizon.
    pub fn with_origin(arms: usize, origin: u64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::invalid("ledger needs at least one arm"));
        }
        if origin == 0 {
            return Err(Error::invalid("time origin must be at least 1"));
        }
        Ok(EpisodeLedger {
            arms,
            origin,
            rounds: Vec::new(),
            episode_start: 1,
            episode_index: 1,
            last_pull: vec![None; arms],
            quota: vec![0.0; arms],
            frozen: vec![false; arms],
            cum_steps: vec![0],
            cum_pull: vec![0; arms],
            cum_active: vec![0; arms],
            cum_value: vec![0.0; arms],
            cum_diff: vec![0.0; arms * arms],
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    /// Number of recorded rounds.
    pub fn current_round(&self) -> usize {
        self.rounds.len()
    }

    /// First round of the current episode.
    pub fn episode_start(&self) -> usize {
        self.episode_start
    }

    /// 1-based index of the current episode.
    pub fn episode_index(&self) -> usize {
        self.episode_index
    }

    pub fn round(&self, r: usize) -> Result<&RoundRecord> {
        if r == 0 || r > self.rounds.len() {
            return Err(Error::range(format!(
                "round {r} outside 1..={}",
                self.rounds.len()
            )));
        }
        Ok(&self.rounds[r - 1])
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Start time of round r, for r up to one past the last recorded
    /// round: t_r = origin + sum of |K_{r'}| over r' < r.
    pub fn round_start_time(&self, r: usize) -> Result<u64> {
        if r == 0 || r > self.rounds.len() + 1 {
            return Err(Error::range(format!(
                "round {r} outside 1..={}",
                self.rounds.len() + 1
            )));
        }
        Ok(self.origin + self.cum_steps[r - 1])
    }

    /// Records a round. The active set must be strictly ascending; the
    /// observations correspond to the first `observations.len()` arms of
    /// the active set (fewer than the full set only when the horizon
    /// truncates the round).
    pub fn push_round(&mut self, active: Vec<usize>, observations: Vec<f64>) -> Result<()> {
        for w in active.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::invalid("active set must be strictly ascending"));
            }
        }
        if let Some(&k) = active.last() {
            if k >= self.arms {
                return Err(Error::range(format!("arm {k} outside 0..{}", self.arms)));
            }
        }
        if observations.len() > active.len() {
            return Err(Error::invalid(format!(
                "{} observations for {} active arms",
                observations.len(),
                active.len()
            )));
        }
        if observations
            .iter()
            .any(|x| !x.is_finite() || x.abs() > 1.0 + 1e-12)
        {
            return Err(Error::invalid(
                "observations must be finite and within [-1, 1]",
            ));
        }

        let index = self.rounds.len() + 1;
        let start_time = self.origin + self.cum_steps[self.rounds.len()];
        let pulls: Vec<PullObs> = active
            .iter()
            .zip(&observations)
            .enumerate()
            .map(|(i, (&arm, &value))| PullObs {
                arm,
                time: start_time + i as u64,
                value,
            })
            .collect();

        // Extend the prefix arrays by one row.
        let a = self.arms;
        let prev = self.rounds.len();
        self.cum_steps
            .push(self.cum_steps[prev] + active.len() as u64);
        let row = prev * a;
        for k in 0..a {
            self.cum_pull.push(self.cum_pull[row + k]);
            self.cum_active.push(self.cum_active[row + k]);
            self.cum_value.push(self.cum_value[row + k]);
        }
        let drow = prev * a * a;
        for i in 0..a * a {
            self.cum_diff.push(self.cum_diff[drow + i]);
        }
        let new_row = (prev + 1) * a;
        let new_drow = (prev + 1) * a * a;
        for &k in &active {
            self.cum_active[new_row + k] += 1;
        }
        for p in &pulls {
            self.cum_pull[new_row + p.arm] += 1;
            self.cum_value[new_row + p.arm] += p.value;
            self.last_pull[p.arm] = Some(p.time);
        }
        for p in &pulls {
            for q in &pulls {
                if p.arm != q.arm {
                    self.cum_diff[new_drow + p.arm * a + q.arm] += q.value - p.value;
                }
            }
        }

        self.rounds.push(RoundRecord {
            index,
            start_time,
            active,
            pulls,
            quota_snapshot: self.quota.clone(),
        });
        Ok(())
    }

    /// Validates a window (r1, r2): episode_start <= r1 <= r2 <= R + 1.
    fn check_window(&self, r1: usize, r2: usize) -> Result<()> {
        if r1 < self.episode_start || r1 > r2 || r2 > self.rounds.len() + 1 {
            return Err(Error::range(format!(
                "window ({r1}, {r2}) outside episode rounds {}..={}",
                self.episode_start,
                self.rounds.len() + 1
            )));
        }
        Ok(())
    }

    fn check_arm(&self, k: usize) -> Result<()> {
        if k >= self.arms {
            return Err(Error::range(format!("arm {k} outside 0..{}", self.arms)));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn win_pulls(&self, k: usize, r1: usize, r2: usize) -> u32 {
        self.cum_pull[(r2 - 1) * self.arms + k] - self.cum_pull[(r1 - 1) * self.arms + k]
    }

    #[inline]
    pub(crate) fn win_active(&self, k: usize, r1: usize, r2: usize) -> u32 {
        self.cum_active[(r2 - 1) * self.arms + k] - self.cum_active[(r1 - 1) * self.arms + k]
    }

    #[inline]
    pub(crate) fn win_value(&self, k: usize, r1: usize, r2: usize) -> f64 {
        self.cum_value[(r2 - 1) * self.arms + k] - self.cum_value[(r1 - 1) * self.arms + k]
    }

    #[inline]
    pub(crate) fn win_diff(&self, k: usize, kp: usize, r1: usize, r2: usize) -> f64 {
        let a = self.arms;
        self.cum_diff[((r2 - 1) * a + k) * a + kp] - self.cum_diff[((r1 - 1) * a + k) * a + kp]
    }

    #[inline]
    pub(crate) fn is_persistent(&self, k: usize, r1: usize, r2: usize) -> bool {
        self.win_active(k, r1, r2) as usize == r2 - r1
    }

    /// Arms active in every round of the window; all arms when the
    /// window is empty.
    pub fn persistent_set(&self, r1: usize, r2: usize) -> Result<Vec<usize>> {
        self.check_window(r1, r2)?;
        Ok((0..self.arms)
            .filter(|&k| self.is_persistent(k, r1, r2))
            .collect())
    }

    /// Number of observations of arm k in the window.
    pub fn pull_count(&self, k: usize, r1: usize, r2: usize) -> Result<u32> {
        self.check_arm(k)?;
        self.check_window(r1, r2)?;
        Ok(self.win_pulls(k, r1, r2))
    }

    /// Relative gap estimate of arm k against comparator kp: the average
    /// of X(kp) - X(k) over k's observations in the window. The
    /// comparator must be persistent; an unobserved k estimates 0.
    pub fn gap_rel_estimate(&self, k: usize, kp: usize, r1: usize, r2: usize) -> Result<f64> {
        self.check_arm(k)?;
        self.check_arm(kp)?;
        self.check_window(r1, r2)?;
        if !self.is_persistent(kp, r1, r2) {
            return Err(Error::invalid(format!(
                "comparator {kp} is not persistent over rounds ({r1}, {r2})"
            )));
        }
        let t_k = self.win_pulls(k, r1, r2);
        if t_k == 0 {
            return Ok(0.0);
        }
        Ok(self.win_diff(k, kp, r1, r2) / t_k as f64)
    }

    /// Gap estimate of arm k: the largest relative estimate over all
    /// persistent comparators, with the lowest-index maximizer as
    /// witness. Errors when no comparator is persistent.
    pub fn gap_estimate(&self, k: usize, r1: usize, r2: usize) -> Result<(f64, usize)> {
        self.check_arm(k)?;
        self.check_window(r1, r2)?;
        let t_k = self.win_pulls(k, r1, r2);
        let mut best: Option<(f64, usize)> = None;
        for kp in 0..self.arms {
            if !self.is_persistent(kp, r1, r2) {
                continue;
            }
            let val = if t_k == 0 {
                0.0
            } else {
                self.win_diff(k, kp, r1, r2) / t_k as f64
            };
            match best {
                Some((b, _)) if val <= b => {}
                _ => best = Some((val, kp)),
            }
        }
        best.ok_or_else(|| {
            Error::invalid(format!("no persistent comparator over rounds ({r1}, {r2})"))
        })
    }

    /// Gap estimate from the arm's own observations (gap channel):
    /// minus the average observation; 0 when unobserved.
    pub fn gap_estimate_observed(&self, k: usize, r1: usize, r2: usize) -> Result<f64> {
        self.check_arm(k)?;
        self.check_window(r1, r2)?;
        let t_k = self.win_pulls(k, r1, r2);
        if t_k == 0 {
            return Ok(0.0);
        }
        Ok(-self.win_value(k, r1, r2) / t_k as f64)
    }

    /// High-confidence gap lower bound: the mode's estimate minus the
    /// confidence radius and the drift allowance, floored at 0. An
    /// unobserved arm never certifies a positive gap.
    pub fn gap_lower_bound(
        &self,
        k: usize,
        r1: usize,
        r2: usize,
        ctx: &BoundContext,
    ) -> Result<f64> {
        let t_k = self.pull_count(k, r1, r2)?;
        if t_k == 0 {
            return Ok(0.0);
        }
        let estimate = match ctx.mode {
            ObservationMode::Mean => self.gap_estimate(k, r1, r2)?.0,
            ObservationMode::Gap => self.gap_estimate_observed(k, r1, r2)?,
        };
        Ok((estimate - ctx.radius(t_k) - ctx.drift_allowance()).max(0.0))
    }

    /// Steps since arm k was last pulled, measured at round r's start:
    /// t_r - s_k, or t_r when the arm has never been pulled before t_r.
    pub fn recency(&self, k: usize, r: usize) -> Result<u64> {
        self.check_arm(k)?;
        let t_r = self.round_start_time(r)?;
        if r == self.rounds.len() + 1 {
            return Ok(match self.last_pull[k] {
                Some(s) => t_r - s,
                None => t_r,
            });
        }
        for rec in self.rounds[..r - 1].iter().rev() {
            if let Some(p) = rec.pulls.iter().find(|p| p.arm == k) {
                return Ok(t_r - p.time);
            }
        }
        Ok(t_r)
    }

    /// Current exploration quota of arm k (0 until frozen).
    pub fn exploration_quota(&self, k: usize) -> Result<f64> {
        self.check_arm(k)?;
        Ok(self.quota[k])
    }

    /// Whether arm k's quota has been frozen this episode.
    pub fn quota_frozen(&self, k: usize) -> Result<bool> {
        self.check_arm(k)?;
        Ok(self.frozen[k])
    }

    /// Freezes arm k's quota at a positive value; at most once per
    /// episode.
    pub fn freeze_quota(&mut self, k: usize, value: f64) -> Result<()> {
        self.check_arm(k)?;
        if self.frozen[k] {
            return Err(Error::invalid(format!(
                "arm {k} quota already frozen this episode"
            )));
        }
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!(
                "quota must freeze at a finite positive value, got {value}"
            )));
        }
        self.quota[k] = value;
        self.frozen[k] = true;
        Ok(())
    }

    /// Resets all quotas to 0 (unfrozen).
    pub fn clear_quotas(&mut self) {
        self.quota.iter_mut().for_each(|q| *q = 0.0);
        self.frozen.iter_mut().for_each(|f| *f = false);
    }

    /// Starts a new episode whose first round is the most recently
    /// recorded one (its data already belongs to the new episode).
    /// Quotas reset; recency baselines persist.
    pub fn start_new_episode(&mut self, at_round: usize) -> Result<()> {
        if at_round == 0 || at_round != self.rounds.len() {
            return Err(Error::invalid(format!(
                "new episode must start at the current round {}, got {at_round}",
                self.rounds.len()
            )));
        }
        self.episode_index += 1;
        self.episode_start = at_round;
        self.clear_quotas();
        Ok(())
    }

    /// Writes the ledger as JSON lines: one header object, then one
    /// object per round.
    pub fn dump_jsonl(&self, w: &mut impl Write) -> Result<()> {
        let header = serde_json::json!({
            "arms": self.arms,
            "origin": self.origin,
            "rounds": self.rounds.len(),
            "episode_index": self.episode_index,
            "episode_start": self.episode_start,
        });
        writeln!(w, "{header}")?;
        for rec in &self.rounds {
            writeln!(w, "{}", serde_json::to_string(rec)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ledger_with(rounds: &[(Vec<usize>, Vec<f64>)]) -> EpisodeLedger {
        let arms = 1 + rounds
            .iter()
            .flat_map(|(a, _)| a.iter().copied())
            .max()
            .unwrap_or(0);
        ledger_sized(arms, rounds)
    }

    fn ledger_sized(arms: usize, rounds: &[(Vec<usize>, Vec<f64>)]) -> EpisodeLedger {
        let mut led = EpisodeLedger::new(arms).unwrap();
        for (active, obs) in rounds {
            led.push_round(active.clone(), obs.clone()).unwrap();
        }
        led
    }

    #[test]
    fn round_start_times_accumulate_active_sizes() {
        let led = ledger_with(&[
            (vec![0, 1], vec![0.5, 0.5]),
            (vec![0, 1], vec![0.5, 0.5]),
            (vec![0], vec![0.5]),
        ]);
        assert_eq!(led.round_start_time(1).unwrap(), 1);
        assert_eq!(led.round_start_time(2).unwrap(), 3);
        assert_eq!(led.round_start_time(3).unwrap(), 5);
        assert_eq!(led.round_start_time(4).unwrap(), 6);
        assert!(led.round_start_time(5).is_err());
        assert!(led.round_start_time(0).is_err());
    }

    #[test]
    fn origin_shifts_every_time() {
        let mut led = EpisodeLedger::with_origin(2, 101).unwrap();
        led.push_round(vec![0, 1], vec![0.1, 0.2]).unwrap();
        assert_eq!(led.round_start_time(1).unwrap(), 101);
        assert_eq!(led.round_start_time(2).unwrap(), 103);
        assert_eq!(led.round(1).unwrap().pulls[1].time, 102);
        assert_eq!(led.recency(0, 2).unwrap(), 2);
    }

    #[test]
    fn truncated_round_records_a_prefix() {
        let mut led = EpisodeLedger::new(3).unwrap();
        led.push_round(vec![0, 1, 2], vec![0.3, 0.4]).unwrap();
        let rec = led.round(1).unwrap();
        assert_eq!(rec.pulls.len(), 2);
        assert_eq!(rec.pulls[1].arm, 1);
        // Start of the "next" round still counts the full active size.
        assert_eq!(led.round_start_time(2).unwrap(), 4);
        assert_eq!(led.pull_count(2, 1, 2).unwrap(), 0);
    }

    #[test]
    fn push_round_rejects_malformed_input() {
        let mut led = EpisodeLedger::new(2).unwrap();
        assert!(led.push_round(vec![1, 0], vec![0.1, 0.2]).is_err());
        assert!(led.push_round(vec![0, 0], vec![0.1, 0.2]).is_err());
        assert!(led.push_round(vec![0, 2], vec![0.1, 0.2]).is_err());
        assert!(led.push_round(vec![0], vec![0.1, 0.2]).is_err());
        assert!(led.push_round(vec![0], vec![f64::NAN]).is_err());
        assert!(led.push_round(vec![0], vec![1.5]).is_err());
        assert!(led.push_round(vec![], vec![]).is_ok());
    }

    #[test]
    fn persistent_set_requires_membership_in_every_round() {
        let led = ledger_with(&[
            (vec![0, 1], vec![0.5, 0.5]),
            (vec![0], vec![0.5]),
            (vec![0, 1], vec![0.5, 0.5]),
        ]);
        assert_eq!(led.persistent_set(1, 4).unwrap(), vec![0]);
        assert_eq!(led.persistent_set(3, 4).unwrap(), vec![0, 1]);
        assert_eq!(led.persistent_set(1, 2).unwrap(), vec![0, 1]);
        assert_eq!(led.persistent_set(2, 3).unwrap(), vec![0]);
        // Empty window: vacuously every arm.
        assert_eq!(led.persistent_set(2, 2).unwrap(), vec![0, 1]);
        assert!(led.persistent_set(0, 2).is_err());
        assert!(led.persistent_set(1, 5).is_err());
        assert!(led.persistent_set(3, 2).is_err());
    }

    #[test]
    fn relative_gap_estimate_averages_pair_differences() {
        let led = ledger_with(&[(vec![0, 1], vec![0.7, 0.1]), (vec![0, 1], vec![0.6, 0.3])]);
        // Arm 1 against arm 0: ((0.7 - 0.1) + (0.6 - 0.3)) / 2 = 0.45.
        assert_relative_eq!(
            led.gap_rel_estimate(1, 0, 1, 3).unwrap(),
            0.45,
            max_relative = 1e-12
        );
        // Arm 0 against arm 1 is the negation.
        assert_relative_eq!(
            led.gap_rel_estimate(0, 1, 1, 3).unwrap(),
            -0.45,
            max_relative = 1e-12
        );
        // Self-comparison is exactly 0.
        assert_eq!(led.gap_rel_estimate(1, 1, 1, 3).unwrap(), 0.0);
    }

    #[test]
    fn relative_gap_estimate_needs_persistent_comparator() {
        let led = ledger_with(&[(vec![0, 1], vec![0.7, 0.1]), (vec![0], vec![0.6])]);
        assert!(led.gap_rel_estimate(0, 1, 1, 3).is_err());
        assert!(led.gap_rel_estimate(0, 1, 1, 2).is_ok());
        // Unobserved target arm estimates 0 (arm 1 in round 2 window).
        assert_eq!(led.gap_rel_estimate(1, 0, 2, 3).unwrap(), 0.0);
    }

    #[test]
    fn gap_estimate_takes_lowest_index_maximizer() {
        // Arms 1 and 2 behave identically; both maximize arm 0's gap
        // estimate, and the witness must be arm 1.
        let led = ledger_with(&[
            (vec![0, 1, 2], vec![0.2, 0.8, 0.8]),
            (vec![0, 1, 2], vec![0.4, 0.8, 0.8]),
        ]);
        let (est, witness) = led.gap_estimate(0, 1, 3).unwrap();
        assert_relative_eq!(est, 0.5, max_relative = 1e-12);
        assert_eq!(witness, 1);
        // The best arm's own estimate peaks at the self-comparison 0.
        let (est1, witness1) = led.gap_estimate(1, 1, 3).unwrap();
        assert_eq!(est1, 0.0);
        assert_eq!(witness1, 1);
    }

    #[test]
    fn gap_estimate_with_unobserved_arm_is_zero_with_a_witness() {
        let led = ledger_sized(2, &[(vec![0], vec![0.9]), (vec![0], vec![0.9])]);
        let (est, witness) = led.gap_estimate(1, 1, 3).unwrap();
        assert_eq!(est, 0.0);
        assert_eq!(witness, 0);
    }

    #[test]
    fn gap_estimate_errors_without_persistent_comparators() {
        let led = ledger_with(&[(vec![0], vec![0.9]), (vec![1], vec![0.2])]);
        assert!(led.gap_estimate(0, 1, 3).is_err());
    }

    #[test]
    fn observed_estimate_negates_the_average() {
        let led = ledger_with(&[(vec![0, 1], vec![0.0, -0.5]), (vec![0, 1], vec![0.0, -0.3])]);
        assert_relative_eq!(
            led.gap_estimate_observed(1, 1, 3).unwrap(),
            0.4,
            max_relative = 1e-12
        );
        assert_eq!(led.gap_estimate_observed(0, 1, 3).unwrap(), 0.0);
        // Unobserved arm estimates 0.
        let led2 = ledger_sized(2, &[(vec![0], vec![-0.2])]);
        assert_eq!(led2.gap_estimate_observed(1, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn log_term_matches_reference_value() {
        // K = 2, T = 100: ln(2 * 2 * 100^3) = ln(4e6).
        let ctx = BoundContext::new(ObservationMode::Mean, 2, 100, 0.0).unwrap();
        assert_relative_eq!(ctx.log_term, 15.201804919084164, max_relative = 1e-15);
        let ctx = BoundContext::new(ObservationMode::Mean, 2, 2000, 0.0).unwrap();
        assert_relative_eq!(ctx.log_term, 24.18900173974614, max_relative = 1e-15);
    }

    #[test]
    fn lower_bound_floors_at_zero_when_radius_dominates() {
        // 8 pulls of each arm with a persistent 0.5 difference; at
        // T = 10 the radius sqrt(2 ln(4000) / 8) is about 1.44, so the
        // bound collapses to 0.
        let rounds: Vec<(Vec<usize>, Vec<f64>)> =
            (0..8).map(|_| (vec![0, 1], vec![0.9, 0.4])).collect();
        let led = ledger_with(&rounds);
        let ctx = BoundContext::new(ObservationMode::Mean, 2, 10, 0.0).unwrap();
        assert_eq!(led.gap_lower_bound(1, 1, 9, &ctx).unwrap(), 0.0);
        // Unobserved arm: bound 0 even though the radius is infinite.
        assert_eq!(led.gap_lower_bound(1, 5, 5, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn lower_bound_subtracts_radius_and_drift() {
        let rounds: Vec<(Vec<usize>, Vec<f64>)> =
            (0..200).map(|_| (vec![0, 1], vec![0.9, 0.0])).collect();
        let led = ledger_with(&rounds);
        let ctx = BoundContext::new(ObservationMode::Mean, 2, 400, 0.01).unwrap();
        let expected = 0.9 - (2.0 * ctx.log_term / 200.0).sqrt() - 0.02;
        let got = led.gap_lower_bound(1, 1, 201, &ctx).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(got > 0.0);
    }

    #[test]
    fn gap_mode_lower_bound_uses_observed_estimate_and_scale() {
        let rounds: Vec<(Vec<usize>, Vec<f64>)> =
            (0..100).map(|_| (vec![0, 1], vec![0.0, -0.8])).collect();
        let led = ledger_with(&rounds);
        let ctx = BoundContext::new(ObservationMode::Gap, 2, 400, 0.0).unwrap();
        // Scale term: 2 * max(400^{-1/2}, 0) = 0.1.
        let expected = 0.8 - (ctx.log_term / 200.0).sqrt() - 0.1;
        assert_relative_eq!(
            led.gap_lower_bound(1, 1, 101, &ctx).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn recency_measures_steps_since_last_pull() {
        // Arm 1 pulled at t = 2 and t = 4; arm 2 never pulled.
        let led = ledger_with(&[
            (vec![0, 1], vec![0.5, 0.5]),
            (vec![0, 1, 2], vec![0.5, 0.5]),
        ]);
        // Round 3 starts at t = 6 (sizes 2 + 3); arm 1's last pull was
        // t = 4 (round 2 truncated before arm 2).
        assert_eq!(led.recency(1, 3).unwrap(), 2);
        assert_eq!(led.recency(2, 3).unwrap(), 6);
        assert_eq!(led.recency(0, 3).unwrap(), 3);
        // Historical query: at round 2's start (t = 3), arm 1 was last
        // pulled at t = 2.
        assert_eq!(led.recency(1, 2).unwrap(), 1);
        assert_eq!(led.recency(2, 1).unwrap(), 1);
    }

    #[test]
    fn quota_freeze_is_once_per_episode() {
        let mut led = EpisodeLedger::new(2).unwrap();
        led.push_round(vec![0, 1], vec![0.9, 0.1]).unwrap();
        assert_eq!(led.exploration_quota(1).unwrap(), 0.0);
        assert!(!led.quota_frozen(1).unwrap());
        led.freeze_quota(1, 3.0).unwrap();
        assert_eq!(led.exploration_quota(1).unwrap(), 3.0);
        assert!(led.quota_frozen(1).unwrap());
        assert!(led.freeze_quota(1, 4.0).is_err());
        assert!(led.freeze_quota(0, 0.0).is_err());
        assert!(led.freeze_quota(0, f64::NAN).is_err());

        // Snapshots capture the state at push time.
        led.push_round(vec![0], vec![0.8]).unwrap();
        assert_eq!(led.round(1).unwrap().quota_snapshot, vec![0.0, 0.0]);
        assert_eq!(led.round(2).unwrap().quota_snapshot, vec![0.0, 3.0]);
    }

    #[test]
    fn new_episode_resets_quotas_but_not_recency() {
        let mut led = EpisodeLedger::new(2).unwrap();
        led.push_round(vec![0, 1], vec![0.9, 0.1]).unwrap();
        led.push_round(vec![0], vec![0.9]).unwrap();
        led.freeze_quota(1, 2.5).unwrap();
        assert!(led.start_new_episode(1).is_err());
        led.start_new_episode(2).unwrap();
        assert_eq!(led.episode_index(), 2);
        assert_eq!(led.episode_start(), 2);
        assert_eq!(led.exploration_quota(1).unwrap(), 0.0);
        // Arm 1's last pull at t = 2 still anchors recency: round 3
        // starts at t = 4.
        assert_eq!(led.recency(1, 3).unwrap(), 2);
        // Windows reaching before the episode start are rejected.
        assert!(led.persistent_set(1, 3).is_err());
        assert_eq!(led.persistent_set(2, 3).unwrap(), vec![0]);
    }

    #[test]
    fn dump_emits_header_and_one_line_per_round() {
        let mut led = EpisodeLedger::new(2).unwrap();
        led.push_round(vec![0, 1], vec![0.9, 0.1]).unwrap();
        led.push_round(vec![0], vec![0.8]).unwrap();
        let mut buf = Vec::new();
        led.dump_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["arms"], 2);
        assert_eq!(header["rounds"], 2);
        let round2: RoundRecord = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(round2.index, 2);
        assert_eq!(round2.start_time, 3);
        assert_eq!(round2.active, vec![0]);
    }
}
