//! Counter-based noise source keyed by (seed, arm, time step).
//!
//! Reward noise must not depend on the order in which a policy queries the
//! environment: two runs that pull different arms at step t still have to
//! agree on the noise any given arm *would* have produced at t. A stateful
//! generator cannot offer that, so this module derives every draw from a
//! pure mixing function of the run seed, the arm index, the absolute time
//! step, and a small lane counter. Replaying a suffix of a run therefore
//! reproduces rewards bitwise, which the episode-isolation tests rely on.
//!
//! The mixer is the 64-bit finalizer popularized by SplitMix64, applied to
//! a key that combines the inputs with odd multiplicative constants. It is
//! not cryptographic; it only needs good avalanche behavior so that
//! neighboring (arm, t) pairs decorrelate.

use serde::{Deserialize, Serialize};

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const MIX_A: u64 = 0xbf58_476d_1ce4_e5b9;
const MIX_B: u64 = 0x94d0_49bb_1331_11eb;

#[inline(always)]
fn finalize(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(MIX_A);
    x ^= x >> 27;
    x = x.wrapping_mul(MIX_B);
    x ^= x >> 31;
    x
}

/// Stateless per-(arm, step) noise stream for one simulation run.
///
/// Cheap to copy; every method is a pure function of the inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    /// Creates the stream for a run seed.
    pub fn new(seed: u64) -> Self {
        NoiseStream { seed }
    }

    /// The seed this stream was built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit word for (arm, t, lane).
    #[inline(always)]
    fn word(&self, arm: u64, t: u64, lane: u64) -> u64 {
        let mut key = self.seed ^ GAMMA;
        key = finalize(key.wrapping_add(arm.wrapping_mul(MIX_A) ^ GAMMA));
        key = finalize(key.wrapping_add(t.wrapping_mul(MIX_B) ^ GAMMA));
        finalize(key.wrapping_add(lane.wrapping_mul(GAMMA)))
    }

    /// Uniform draw in [0, 1) for arm `arm` at absolute step `t`.
    ///
    /// Uses the top 53 bits of the mixed word, so every representable
    /// value is an exact multiple of 2^-53.
    #[inline(always)]
    pub fn unit(&self, arm: usize, t: u64) -> f64 {
        self.lane_unit(arm, t, 0)
    }

    /// Uniform draw in [0, 1) on an explicit lane, for samplers that need
    /// more than one independent uniform per (arm, t).
    #[inline(always)]
    pub fn lane_unit(&self, arm: usize, t: u64, lane: u64) -> f64 {
        let w = self.word(arm as u64, t, lane);
        (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw for (arm, t) via Box-Muller on lanes 0 and 1.
    pub fn standard_normal(&self, arm: usize, t: u64) -> f64 {
        let u1 = self.lane_unit(arm, t, 0);
        let u2 = self.lane_unit(arm, t, 1);
        // Guard the log: map u1 = 0 to the smallest positive draw instead.
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        r * theta.cos()
    }
}
