//! Round-based policy for mean observations with exploration quotas and
//! episode restarts.
//!
//! Each round samples every arm of the active set once, in ascending
//! order. An arm enters the active set while its exploration quota is at
//! most the number of steps since its last pull, so a freshly sampled
//! arm with a frozen positive quota sits out until enough time passes.
//! Quotas start at 0 (always active) and freeze once per episode, at the
//! first round boundary where the arm's gap lower bound over the episode
//! window turns positive; the frozen value is
//!
//!   gap value * sqrt(horizon * arms / segments)
//!
//! where the gap value is the plain estimate by default, or the lower
//! bound itself under [`QuotaValue::LowerBound`]. Freezing on the
//! estimate spaces revisits by roughly the time to pay one unit of
//! regret per segment budget; the lower-bound variant spaces them
//! further apart while the bound is loose, trading revisit cost for
//! detection latency.
//!
//! After every round the change-point scan runs over the episode's
//! ledger. A detection starts a new episode at the just-finished round
//! (whose data carries over as the new episode's first round) and clears
//! all quotas; otherwise the round's boundary quota updates apply.
//!
//! If every arm is under quota the policy forces progress by sampling
//! the single arm closest to eligibility (smallest quota minus recency,
//! lowest index on ties), so time always advances.

use serde::{Deserialize, Serialize};

use crate::detect::{cp_detect, ScanMode};
use crate::env::model::{EnvironmentSpec, ObservationMode};
use crate::error::{Error, Result};
use crate::ledger::{BoundContext, EpisodeLedger};
use crate::numeric::CompensatedSum;
use crate::rng::NoiseStream;
use crate::trace::{EpisodeSpan, PullRecord, RunTrace};

/// Which value seeds a frozen exploration quota.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaValue {
    /// The gap estimate at freeze time.
    #[default]
    Estimate,
    /// The certified gap lower bound at freeze time. Looser bounds mean
    /// larger spacing between revisits of evicted arms, so detections
    /// that hinge on those revisits arrive later than under `Estimate`.
    LowerBound,
}

/// Tunable parameters of the policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrudentParams {
    /// Assumed number of significant intervals (M in the regret
    /// budget). Enters only through the quota multiplier.
    pub segments: u64,
    /// Assumed per-step drift bound B*.
    pub drift_tolerance: f64,
    /// Endpoint selection for the change-point scan.
    #[serde(default)]
    pub scan: ScanMode,
    /// Which gap value seeds frozen quotas.
    #[serde(default)]
    pub quota_value: QuotaValue,
}

impl Default for PrudentParams {
    fn default() -> Self {
        PrudentParams {
            segments: 1,
            drift_tolerance: 0.0,
            scan: ScanMode::default(),
            quota_value: QuotaValue::default(),
        }
    }
}

impl PrudentParams {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::invalid("segment budget must be at least 1"));
        }
        if !(self.drift_tolerance.is_finite() && self.drift_tolerance >= 0.0) {
            return Err(Error::invalid(format!(
                "drift tolerance must be finite and nonnegative, got {}",
                self.drift_tolerance
            )));
        }
        self.scan.validate()
    }

    /// sqrt(horizon * arms / segments): a frozen quota is the gap value
    /// times this.
    pub fn quota_multiplier(&self, arms: usize, horizon: u64) -> f64 {
        (horizon as f64 * arms as f64 / self.segments as f64).sqrt()
    }
}

/// Controls for replaying a suffix of a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOptions {
    /// Time step of the first pull (1 for a full run).
    pub start_time: u64,
    /// Last time step to play; defaults to the environment horizon.
    pub end_time: Option<u64>,
    /// Overrides the first round's active set, standing in for ledger
    /// state the replay cannot reconstruct. Later rounds select
    /// normally.
    pub forced_first_active: Option<Vec<usize>>,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            start_time: 1,
            end_time: None,
            forced_first_active: None,
        }
    }
}

/// Selects the next round's active set: arms whose quota is at most
/// their recency, in ascending order. When no arm qualifies, falls back
/// to the single arm closest to eligibility (lowest index on ties) and
/// reports the round as forced progress.
pub fn select_active_set(ledger: &EpisodeLedger) -> Result<(Vec<usize>, bool)> {
    let r = ledger.current_round() + 1;
    let mut active = Vec::new();
    for k in 0..ledger.arms() {
        if ledger.exploration_quota(k)? <= ledger.recency(k, r)? as f64 {
            active.push(k);
        }
    }
    if !active.is_empty() {
        return Ok((active, false));
    }
    let mut best_slack = f64::INFINITY;
    let mut best_arm = 0;
    for k in 0..ledger.arms() {
        let slack = ledger.exploration_quota(k)? - ledger.recency(k, r)? as f64;
        if slack < best_slack {
            best_slack = slack;
            best_arm = k;
        }
    }
    Ok((vec![best_arm], true))
}

/// Round-boundary quota update: freezes the quota of every arm whose
/// gap lower bound over the episode window just turned positive.
pub(crate) fn freeze_ready_quotas(
    ledger: &mut EpisodeLedger,
    ctx: &BoundContext,
    params: &PrudentParams,
    multiplier: f64,
) -> Result<()> {
    let rho = ledger.episode_start();
    let r2 = ledger.current_round() + 1;
    for k in 0..ledger.arms() {
        if ledger.quota_frozen(k)? {
            continue;
        }
        let lb = ledger.gap_lower_bound(k, rho, r2, ctx)?;
        if lb > 0.0 {
            let value = match params.quota_value {
                QuotaValue::Estimate => match ctx.mode {
                    ObservationMode::Mean => ledger.gap_estimate(k, rho, r2)?.0,
                    ObservationMode::Gap => ledger.gap_estimate_observed(k, rho, r2)?,
                },
                QuotaValue::LowerBound => lb,
            };
            ledger.freeze_quota(k, value * multiplier)?;
        }
    }
    Ok(())
}

/// Plays the policy over the full horizon.
pub fn run(env: &EnvironmentSpec, params: &PrudentParams, seed: u64) -> Result<RunTrace> {
    run_with(env, params, seed, &ReplayOptions::default())
}

/// Plays the policy over a time range, optionally overriding the first
/// round's active set. Observations come from the environment's
/// counter-based noise stream, so a suffix replay at the same seed sees
/// bitwise-identical draws at equal (arm, time) pairs.
pub fn run_with(
    env: &EnvironmentSpec,
    params: &PrudentParams,
    seed: u64,
    opts: &ReplayOptions,
) -> Result<RunTrace> {
    env.validate()?;
    params.validate()?;
    if env.mode != ObservationMode::Mean {
        return Err(Error::ModeMismatch(
            "this policy ranks arms by cross-arm differences and needs mean observations".into(),
        ));
    }
    let end_time = opts.end_time.unwrap_or(env.horizon);
    if opts.start_time == 0 || opts.start_time > end_time || end_time > env.horizon {
        return Err(Error::invalid(format!(
            "replay range [{}, {end_time}] must satisfy 1 <= start <= end <= {}",
            opts.start_time, env.horizon
        )));
    }
    if let Some(forced) = &opts.forced_first_active {
        if forced.is_empty() {
            return Err(Error::invalid("forced first active set must be nonempty"));
        }
        if forced.windows(2).any(|w| w[1] <= w[0]) || *forced.last().unwrap() >= env.arms {
            return Err(Error::invalid(
                "forced first active set must be strictly ascending arm indices",
            ));
        }
    }

    let ctx = BoundContext::new(env.mode, env.arms, env.horizon, params.drift_tolerance)?;
    let multiplier = params.quota_multiplier(env.arms, env.horizon);
    let noise = NoiseStream::new(seed);
    let mut ledger = EpisodeLedger::with_origin(env.arms, opts.start_time)?;
    let mut regret = CompensatedSum::new();
    let mut pulls = Vec::with_capacity((end_time - opts.start_time + 1) as usize);
    let mut detections = Vec::new();
    let mut episodes = vec![EpisodeSpan {
        index: 1,
        start_round: 1,
        start_time: opts.start_time,
    }];
    let mut forced_progress_rounds = 0;

    loop {
        let r = ledger.current_round() + 1;
        let t_r = ledger.round_start_time(r)?;
        if t_r > end_time {
            break;
        }
        let (active, forced) = match (&opts.forced_first_active, r) {
            (Some(forced), 1) => (forced.clone(), false),
            _ => select_active_set(&ledger)?,
        };
        if forced {
            forced_progress_rounds += 1;
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
        ledger.push_round(active, observations)?;
        if truncated {
            break;
        }
        match cp_detect(&ledger, &ctx, params.scan, r)? {
            Some(event) => {
                detections.push(event);
                ledger.start_new_episode(r)?;
                episodes.push(EpisodeSpan {
                    index: ledger.episode_index(),
                    start_round: r,
                    start_time: ledger.round(r)?.start_time,
                });
            }
            None => freeze_ready_quotas(&mut ledger, &ctx, params, multiplier)?,
        }
    }

    Ok(RunTrace {
        policy: "prudent".into(),
        seed,
        arms: env.arms,
        horizon: env.horizon,
        env_hash: env.content_hash(),
        params: serde_json::to_value(params)?,
        start_time: opts.start_time,
        end_time,
        rounds: ledger.current_round(),
        forced_progress_rounds,
        total_regret: regret.value(),
        episodes,
        detections,
        pulls,
    })
}
