//! Shared fixtures for the benchmark targets: environments and filled
//! ledgers of realistic shape, built outside the timed sections.

use banditsim_core::{
    switching_from_parts, BoundContext, ChannelConfig, EnvironmentSpec, EpisodeLedger,
    MeanFunction, NoiseModel, NoiseStream, ObservationMode, Result,
};

/// A two-arm environment whose best arm swaps halfway through.
pub fn swap_env(horizon: u64, mode: ObservationMode) -> EnvironmentSpec {
    switching_from_parts(
        horizon,
        &[1, horizon / 2 + 1],
        &[vec![0.9, 0.2], vec![0.2, 0.9]],
        ChannelConfig {
            noise: NoiseModel::Bernoulli,
            mode,
        },
    )
    .expect("valid swap environment")
}

/// A stationary two-arm environment with a 0.5 gap.
pub fn stationary_env(horizon: u64, mode: ObservationMode) -> EnvironmentSpec {
    EnvironmentSpec::new(
        2,
        horizon,
        vec![
            MeanFunction::constant(0.9).unwrap(),
            MeanFunction::constant(0.4).unwrap(),
        ],
        NoiseModel::Bernoulli,
        mode,
    )
    .expect("valid stationary environment")
}

/// Plays `rounds` full rounds of the environment into a fresh ledger,
/// pulling every arm once per round in index order.
pub fn filled_ledger(env: &EnvironmentSpec, rounds: usize, seed: u64) -> Result<EpisodeLedger> {
    let noise = NoiseStream::new(seed);
    let mut ledger = EpisodeLedger::new(env.arms)?;
    let mut t = 1u64;
    for _ in 0..rounds {
        let active: Vec<usize> = (0..env.arms).collect();
        let mut obs = Vec::with_capacity(env.arms);
        for &k in &active {
            obs.push(env.sample_observation(k, t, &noise)?);
            t += 1;
        }
        ledger.push_round(active, obs)?;
    }
    Ok(ledger)
}

/// Bound context matching `filled_ledger` on the same environment.
pub fn context_for(env: &EnvironmentSpec, b_star: f64) -> Result<BoundContext> {
    BoundContext::new(env.mode, env.arms, env.horizon, b_star)
}
