//! Environment model: per-arm mean functions on a finite horizon.
//!
//! An environment holds one mean function per arm, each a piecewise
//! polynomial in the normalized time x = t / T. Observations come in two
//! modes: `Mean` (the reward of the pulled arm, in [0, 1]) and `Gap` (the
//! negated shortfall of the pulled arm against the instantaneous best
//! arm, in [-1, 0]). Noise is sampled from a counter-based stream so that
//! a draw for (arm, t) is independent of the policy's query order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseStream;

/// Version stamp embedded in serialized environments.
pub const ENV_SCHEMA_VERSION: u32 = 1;

/// Tolerance for the range check on mean values: values inside
/// [-RANGE_TOL, 1 + RANGE_TOL] are accepted and clamped to [0, 1] at
/// evaluation time, absorbing floating-point dust from generators.
pub const RANGE_TOL: f64 = 1e-9;

/// One polynomial piece of a mean function.
///
/// `coeffs[i]` multiplies x^i where x = t / horizon. The piece applies
/// from time step `start` (inclusive, 1-based) until the next piece
/// begins or the horizon ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub start: u64,
    pub coeffs: Vec<f64>,
}

impl PolySegment {
    /// Evaluates the polynomial at normalized time x by Horner's rule.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// Piecewise-polynomial mean of a single arm over the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFunction {
    segments: Vec<PolySegment>,
}

impl MeanFunction {
    /// Builds a mean function from polynomial pieces.
    ///
    /// Segment starts must be strictly increasing and begin at 1; every
    /// coefficient must be finite. Range validation happens later, inside
    /// [`EnvironmentSpec::validate`], where the horizon is known.
    pub fn new(segments: Vec<PolySegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("mean function needs at least one segment"));
        }
        if segments[0].start != 1 {
            return Err(Error::invalid(format!(
                "first segment must start at 1, got {}",
                segments[0].start
            )));
        }
        for w in segments.windows(2) {
            if w[1].start <= w[0].start {
                return Err(Error::invalid(format!(
                    "segment starts must be strictly increasing ({} then {})",
                    w[0].start, w[1].start
                )));
            }
        }
        for seg in &segments {
            if seg.coeffs.is_empty() {
                return Err(Error::invalid("segment needs at least one coefficient"));
            }
            if seg.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("segment coefficients must be finite"));
            }
        }
        Ok(MeanFunction { segments })
    }

    /// Constant mean function.
    pub fn constant(value: f64) -> Result<Self> {
        MeanFunction::new(vec![PolySegment {
            start: 1,
            coeffs: vec![value],
        }])
    }

    /// The polynomial pieces, ascending by start time.
    pub fn segments(&self) -> &[PolySegment] {
        &self.segments
    }

    /// Index of the segment covering time step t (1-based).
    #[inline]
    fn segment_index(&self, t: u64) -> usize {
        match self.segments.binary_search_by(|s| s.start.cmp(&t)) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Mean value at time step t on the given horizon, clamped to [0, 1].
    ///
    /// Callers must ensure 1 <= t <= horizon; the public entry point with
    /// range checking is [`EnvironmentSpec::mean_at`].
    #[inline]
    pub(crate) fn value_at(&self, t: u64, horizon: u64) -> f64 {
        let x = t as f64 / horizon as f64;
        let raw = self.segments[self.segment_index(t)].eval(x);
        raw.clamp(0.0, 1.0)
    }

    /// Mean value without the [0, 1] clamp, for range validation.
    fn raw_value_at(&self, t: u64, horizon: u64) -> f64 {
        let x = t as f64 / horizon as f64;
        self.segments[self.segment_index(t)].eval(x)
    }
}

/// Reward noise attached to the mean (or negated gap) signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Observations equal the signal exactly.
    None,
    /// Observations are Bernoulli draws with the signal as success
    /// probability (negated in gap mode). Exactly mean-centered.
    Bernoulli,
    /// Signal plus sigma * Z, redrawn on fresh lanes until it lands in
    /// the legal observation range (clamped after 64 rejections). Close
    /// to mean-centered only while truncation is rare, so quantitative
    /// experiments prefer `Bernoulli` or `None`.
    TruncatedGaussian { sigma: f64 },
}

/// What a pull reveals to the policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// The pulled arm's reward; observations live in [0, 1].
    Mean,
    /// The pulled arm's negated gap to the instantaneous best arm;
    /// observations live in [-1, 0].
    Gap,
}

/// Provenance metadata attached by the environment generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    /// Generator family name ("switching", "local_poly", "holder",
    /// "inflexion").
    pub family: String,
    /// Ground-truth segmentation: ascending time steps where some arm's
    /// mean function changes piece, always starting with 1.
    pub change_points: Vec<u64>,
    /// Echo of the generator's inputs and sampled internals.
    pub params: serde_json::Value,
}

/// A complete bandit environment: K mean functions on a horizon, plus the
/// observation mode and noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub schema_version: u32,
    pub arms: usize,
    pub horizon: u64,
    pub means: Vec<MeanFunction>,
    pub noise: NoiseModel,
    pub mode: ObservationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<GeneratorMeta>,
}

impl EnvironmentSpec {
    /// Builds and validates an environment.
    pub fn new(
        arms: usize,
        horizon: u64,
        means: Vec<MeanFunction>,
        noise: NoiseModel,
        mode: ObservationMode,
    ) -> Result<Self> {
        let spec = EnvironmentSpec {
            schema_version: ENV_SCHEMA_VERSION,
            arms,
            horizon,
            means,
            noise,
            mode,
            meta: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every structural invariant.
    ///
    /// Deserialized specs must pass through here before use; see
    /// [`EnvironmentSpec::from_json`].
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != ENV_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported environment schema version {} (expected {})",
                self.schema_version, ENV_SCHEMA_VERSION
            )));
        }
        if self.arms == 0 {
            return Err(Error::invalid("environment needs at least one arm"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.means.len() != self.arms {
            return Err(Error::invalid(format!(
                "expected {} mean functions, got {}",
                self.arms,
                self.means.len()
            )));
        }
        if let NoiseModel::TruncatedGaussian { sigma } = self.noise {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid(format!(
                    "truncated gaussian sigma must be finite and positive, got {sigma}"
                )));
            }
        }
        for (k, f) in self.means.iter().enumerate() {
            if let Some(seg) = f.segments.iter().find(|s| s.start > self.horizon) {
                return Err(Error::invalid(format!(
                    "arm {k}: segment start {} exceeds horizon {}",
                    seg.start, self.horizon
                )));
            }
            for t in 1..=self.horizon {
                let v = f.raw_value_at(t, self.horizon);
                if !v.is_finite() || !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                    return Err(Error::invalid(format!(
                        "arm {k}: mean {v} at t = {t} escapes [0, 1]"
                    )));
                }
            }
        }
        if let Some(meta) = &self.meta {
            if meta.change_points.first() != Some(&1) {
                return Err(Error::invalid("metadata change points must start at 1"));
            }
            for w in meta.change_points.windows(2) {
                if w[1] <= w[0] {
                    return Err(Error::invalid("metadata change points must be ascending"));
                }
            }
            if let Some(&last) = meta.change_points.last() {
                if last > self.horizon {
                    return Err(Error::invalid(
                        "metadata change points must lie within the horizon",
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_time(&self, t: u64) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::range(format!(
                "time step {t} outside 1..={}",
                self.horizon
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

    /// Mean of arm k at time step t.
    pub fn mean_at(&self, k: usize, t: u64) -> Result<f64> {
        self.check_arm(k)?;
        self.check_time(t)?;
        Ok(self.means[k].value_at(t, self.horizon))
    }

    /// Mean of arm k at t without range checks; callers guarantee
    /// validity (used in simulation inner loops).
    #[inline]
    pub(crate) fn mean_raw(&self, k: usize, t: u64) -> f64 {
        self.means[k].value_at(t, self.horizon)
    }

    /// Highest mean at time t, over all arms.
    #[inline]
    pub(crate) fn best_mean_raw(&self, t: u64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.arms {
            let v = self.mean_raw(k, t);
            if v > best {
                best = v;
            }
        }
        best
    }

    /// Index of the best arm at time t (lowest index on ties).
    pub fn best_arm_at(&self, t: u64) -> Result<usize> {
        self.check_time(t)?;
        let mut best = 0;
        let mut best_v = self.mean_raw(0, t);
        for k in 1..self.arms {
            let v = self.mean_raw(k, t);
            if v > best_v {
                best = k;
                best_v = v;
            }
        }
        Ok(best)
    }

    /// Shortfall of arm k against the best arm at time t; never negative.
    pub fn gap_at(&self, k: usize, t: u64) -> Result<f64> {
        self.check_arm(k)?;
        self.check_time(t)?;
        Ok(self.gap_raw(k, t))
    }

    #[inline]
    pub(crate) fn gap_raw(&self, k: usize, t: u64) -> f64 {
        self.best_mean_raw(t) - self.mean_raw(k, t)
    }

    /// Draws the observation a pull of arm k at time t produces.
    ///
    /// Mean mode returns a reward in [0, 1]; gap mode returns a negated
    /// gap in [-1, 0]. Deterministic in (noise seed, arm, t).
    pub fn sample_observation(&self, k: usize, t: u64, noise: &NoiseStream) -> Result<f64> {
        self.check_arm(k)?;
        self.check_time(t)?;
        Ok(self.sample_raw(k, t, noise))
    }

    #[inline]
    pub(crate) fn sample_raw(&self, k: usize, t: u64, noise: &NoiseStream) -> f64 {
        match self.mode {
            ObservationMode::Mean => {
                let mu = self.mean_raw(k, t);
                match self.noise {
                    NoiseModel::None => mu,
                    NoiseModel::Bernoulli => {
                        if noise.unit(k, t) < mu {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    NoiseModel::TruncatedGaussian { sigma } => {
                        truncated_draw(mu, sigma, 0.0, 1.0, k, t, noise)
                    }
                }
            }
            ObservationMode::Gap => {
                let gap = self.gap_raw(k, t);
                match self.noise {
                    NoiseModel::None => -gap,
                    NoiseModel::Bernoulli => {
                        if noise.unit(k, t) < gap {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    NoiseModel::TruncatedGaussian { sigma } => {
                        truncated_draw(-gap, sigma, -1.0, 0.0, k, t, noise)
                    }
                }
            }
        }
    }

    /// Serializes to pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a JSON environment.
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: EnvironmentSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Stable content hash (FNV-1a over canonical JSON), used to tag
    /// traces and reports with the environment they came from.
    pub fn content_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("environment serialization is infallible");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

/// Gaussian draw centered at `center`, redrawn on fresh lane pairs until
/// it falls inside [lo, hi]; clamped after 64 rejected attempts.
fn truncated_draw(
    center: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    arm: usize,
    t: u64,
    noise: &NoiseStream,
) -> f64 {
    for attempt in 0..64u64 {
        let u1 = noise.lane_unit(arm, t, 2 * attempt);
        let u2 = noise.lane_unit(arm, t, 2 * attempt + 1);
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let z = r * (2.0 * std::f64::consts::PI * u2).cos();
        let v = center + sigma * z;
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    (center).clamp(lo, hi)
}
