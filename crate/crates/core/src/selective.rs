//! Elimination policy for gap observations.
//!
//! Each round samples every surviving arm once, ascending. After the
//! round, any surviving arm whose gap lower bound over the episode
//! window is positive is eliminated for the rest of the episode; the
//! gap channel reports each arm's own shortfall, so elimination needs
//! no cross-arm comparison and survivors are judged one by one.
//!
//! A changing environment can push every arm's estimate positive. When
//! the last survivor is eliminated the next round is empty: it consumes
//! no time steps, closes the episode, and revives every arm, so the
//! following round starts the new episode with fresh estimates. Stale
//! evidence never outlives an episode.

use serde::{Deserialize, Serialize};

use crate::env::model::{EnvironmentSpec, ObservationMode};
use crate::error::{Error, Result};
use crate::ledger::{BoundContext, EpisodeLedger};
use crate::numeric::CompensatedSum;
use crate::prudent::ReplayOptions;
use crate::rng::NoiseStream;
use crate::trace::{EpisodeSpan, PullRecord, RunTrace};

/// Tunable parameters of the elimination policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectiveParams {
    /// Assumed per-step drift bound B*.
    pub drift_tolerance: f64,
}

impl SelectiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.drift_tolerance.is_finite() && self.drift_tolerance >= 0.0) {
            return Err(Error::invalid(format!(
                "drift tolerance must be finite and nonnegative, got {}",
                self.drift_tolerance
            )));
        }
        Ok(())
    }
}

/// Plays the policy over the full horizon.
pub fn run(env: &EnvironmentSpec, params: &SelectiveParams, seed: u64) -> Result<RunTrace> {
    run_with(env, params, seed, &ReplayOptions::default())
}

/// Plays the policy over a time range. A forced first active set marks
/// every arm outside it as already eliminated, standing in for
/// mid-episode state a suffix replay cannot reconstruct.
pub fn run_with(
    env: &EnvironmentSpec,
    params: &SelectiveParams,
    seed: u64,
    opts: &ReplayOptions,
) -> Result<RunTrace> {
    env.validate()?;
    params.validate()?;
    if env.mode != ObservationMode::Gap {
        return Err(Error::ModeMismatch(
            "this policy eliminates arms on their own shortfall and needs gap observations".into(),
        ));
    }
    let end_time = opts.end_time.unwrap_or(env.horizon);
    if opts.start_time == 0 || opts.start_time > end_time || end_time > env.horizon {
        return Err(Error::invalid(format!(
            "replay range [{}, {end_time}] must satisfy 1 <= start <= end <= {}",
            opts.start_time, env.horizon
        )));
    }
    let mut eliminated = vec![false; env.arms];
    if let Some(forced) = &opts.forced_first_active {
        if forced.is_empty() {
            return Err(Error::invalid("forced first active set must be nonempty"));
        }
        if forced.windows(2).any(|w| w[1] <= w[0]) || *forced.last().unwrap() >= env.arms {
            return Err(Error::invalid(
                "forced first active set must be strictly ascending arm indices",
            ));
        }
        eliminated.iter_mut().for_each(|e| *e = true);
        for &k in forced {
            eliminated[k] = false;
        }
    }

    let ctx = BoundContext::new(env.mode, env.arms, env.horizon, params.drift_tolerance)?;
    let noise = NoiseStream::new(seed);
    let mut ledger = EpisodeLedger::with_origin(env.arms, opts.start_time)?;
    let mut regret = CompensatedSum::new();
    let mut pulls = Vec::with_capacity((end_time - opts.start_time + 1) as usize);
    let mut episodes = vec![EpisodeSpan {
        index: 1,
        start_round: 1,
        start_time: opts.start_time,
    }];

    loop {
        let r = ledger.current_round() + 1;
        let t_r = ledger.round_start_time(r)?;
        if t_r > end_time {
            break;
        }
        let active: Vec<usize> = (0..env.arms).filter(|&k| !eliminated[k]).collect();
        if active.is_empty() {
            // Consumes no steps: close the episode and revive everyone.
            ledger.push_round(Vec::new(), Vec::new())?;
            ledger.start_new_episode(r)?;
            episodes.push(EpisodeSpan {
                index: ledger.episode_index(),
                start_round: r,
                start_time: t_r,
            });
            eliminated.iter_mut().for_each(|e| *e = false);
            continue;
        }
        let mut observations = Vec::with_capacity(active.len());
        for (i, &k) in active.iter().enumerate() {
            let t = t_r + i as u64;
            if t > end_time {
                break;
            }
            let value = env.sample_raw(k, t, &noise);
            let gap = env.gap_raw(k, t);
            regret.add(gap);
            pulls.push(PullRecord {
                time: t,
                round: r,
                arm: k,
                value,
                gap,
            });
            observations.push(value);
        }
        let truncated = observations.len() < active.len();
        ledger.push_round(active.clone(), observations)?;
        if truncated {
            break;
        }
        let rho = ledger.episode_start();
        for &k in &active {
            if ledger.gap_lower_bound(k, rho, r + 1, &ctx)? > 0.0 {
                eliminated[k] = true;
            }
        }
    }

    Ok(RunTrace {
        policy: "selective".into(),
        seed,
        arms: env.arms,
        horizon: env.horizon,
        env_hash: env.content_hash(),
        params: serde_json::to_value(params)?,
        start_time: opts.start_time,
        end_time,
        rounds: ledger.current_round(),
        forced_progress_rounds: 0,
        total_regret: regret.value(),
        episodes,
        detections: Vec::new(),
        pulls,
    })
}
