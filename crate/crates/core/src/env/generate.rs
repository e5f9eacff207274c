//! Environment generators for four structural families.
//!
//! Each generator samples a random environment inside a documented
//! function class and attaches [`GeneratorMeta`] with the ground-truth
//! segmentation, so tests can compare detected structure against the
//! truth. Sampling policies deliberately keep gap excursions moderate
//! relative to the significance band 2 * max(T^{-1/2}, B*): the class
//! memberships stay exact, while generated instances remain comfortably
//! inside the partition-size budgets the parameter derivations promise.
//!
//! * `switching`: piecewise-constant means, the best arm changes at
//!   every boundary.
//! * `local_poly`: per-arm piecewise polynomials with bounded coefficient
//!   l1 norm and per-step drift.
//! * `holder`: per-arm piecewise smooth means built from |x - c|^alpha
//!   bumps, discretized to one constant piece per time step.
//! * `inflexion`: constant best mean with piecewise-linear gap profiles
//!   having a bounded number of direction changes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::model::{
    EnvironmentSpec, GeneratorMeta, MeanFunction, NoiseModel, ObservationMode, PolySegment,
};
use crate::error::{Error, Result};

/// Shared sampling knobs: which observation channel and noise the
/// generated environment uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub noise: NoiseModel,
    pub mode: ObservationMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            noise: NoiseModel::Bernoulli,
            mode: ObservationMode::Mean,
        }
    }
}

/// Splits the horizon into `segments` parts, each at least `min_len`
/// steps, with randomized proportions. Returns the 1-based start of each
/// part, beginning with 1.
fn sample_boundaries(
    rng: &mut impl Rng,
    horizon: u64,
    segments: u64,
    min_len: u64,
) -> Result<Vec<u64>> {
    if segments == 0 {
        return Err(Error::Generation("segment count must be positive".into()));
    }
    if min_len.saturating_mul(segments) > horizon {
        return Err(Error::Generation(format!(
            "horizon {horizon} too short for {segments} segments of at least {min_len} steps"
        )));
    }
    let free = horizon - min_len * segments;
    let weights: Vec<f64> = (0..segments).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut lens: Vec<u64> = weights
        .iter()
        .map(|w| min_len + (w / total * free as f64).floor() as u64)
        .collect();
    let used: u64 = lens.iter().sum();
    *lens.last_mut().expect("segments > 0") += horizon - used;
    let mut starts = Vec::with_capacity(segments as usize);
    let mut t = 1;
    for len in lens {
        starts.push(t);
        t += len;
    }
    Ok(starts)
}

fn merged_change_points(means: &[Vec<PolySegment>]) -> Vec<u64> {
    let mut cps: Vec<u64> = means
        .iter()
        .flat_map(|segs| segs.iter().map(|s| s.start))
        .collect();
    cps.sort_unstable();
    cps.dedup();
    cps
}

// ---- switching: piecewise-constant means ----

/// Inputs for [`gen_switching`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingConfig {
    pub arms: usize,
    pub horizon: u64,
    /// Number of stationary segments (M).
    pub segments: u64,
    /// Suboptimal arms receive gaps drawn uniformly from this range.
    pub gap_lo: f64,
    pub gap_hi: f64,
    pub channel: ChannelConfig,
}

/// Generates a piecewise-constant environment where the identity of the
/// best arm changes at every segment boundary.
pub fn gen_switching(cfg: &SwitchingConfig, rng: &mut impl Rng) -> Result<EnvironmentSpec> {
    if cfg.arms < 2 {
        return Err(Error::Generation(
            "switching environments need at least 2 arms".into(),
        ));
    }
    if !(cfg.gap_lo > 0.0 && cfg.gap_lo <= cfg.gap_hi && cfg.gap_hi <= 0.68) {
        return Err(Error::Generation(format!(
            "gap range ({}, {}) must satisfy 0 < lo <= hi <= 0.68",
            cfg.gap_lo, cfg.gap_hi
        )));
    }
    let min_len = (cfg.horizon / (4 * cfg.segments)).max(2);
    let starts = sample_boundaries(rng, cfg.horizon, cfg.segments, min_len)?;

    let mut per_arm: Vec<Vec<PolySegment>> = vec![Vec::new(); cfg.arms];
    let mut best_prev = usize::MAX;
    for &start in &starts {
        let mut best = rng.random_range(0..cfg.arms);
        while best == best_prev {
            best = rng.random_range(0..cfg.arms);
        }
        best_prev = best;
        let best_mean = rng.random_range(0.7..0.95);
        for (k, segs) in per_arm.iter_mut().enumerate() {
            let mean = if k == best {
                best_mean
            } else {
                best_mean - rng.random_range(cfg.gap_lo..=cfg.gap_hi)
            };
            segs.push(PolySegment {
                start,
                coeffs: vec![mean],
            });
        }
    }

    finish(
        cfg.arms,
        cfg.horizon,
        per_arm,
        cfg.channel,
        "switching",
        serde_json::to_value(cfg)?,
    )
}

/// Builds a piecewise-constant environment from explicit parts: segment
/// `i` starts at `starts[i]` and gives arm k mean `levels[i][k]`.
///
/// The deterministic counterpart of [`gen_switching`], used wherever an
/// experiment needs an exact scripted environment.
pub fn switching_from_parts(
    horizon: u64,
    starts: &[u64],
    levels: &[Vec<f64>],
    channel: ChannelConfig,
) -> Result<EnvironmentSpec> {
    if starts.is_empty() || starts.len() != levels.len() {
        return Err(Error::invalid(
            "switching_from_parts needs one level row per segment start",
        ));
    }
    let arms = levels[0].len();
    if levels.iter().any(|row| row.len() != arms) {
        return Err(Error::invalid(
            "level rows must all have the same arm count",
        ));
    }
    let mut per_arm: Vec<Vec<PolySegment>> = vec![Vec::new(); arms];
    for (&start, row) in starts.iter().zip(levels) {
        for (k, &mean) in row.iter().enumerate() {
            per_arm[k].push(PolySegment {
                start,
                coeffs: vec![mean],
            });
        }
    }
    finish(
        arms,
        horizon,
        per_arm,
        channel,
        "switching",
        serde_json::json!({ "starts": starts, "levels": levels }),
    )
}

// ---- local_poly: piecewise polynomials with bounded coefficients ----

/// Inputs for [`gen_local_poly`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPolyConfig {
    pub arms: usize,
    pub horizon: u64,
    /// Polynomial pieces per arm (m*).
    pub segments_per_arm: u64,
    /// Highest polynomial degree any piece may use (gamma*).
    pub max_degree: u32,
    /// Bound on each piece's coefficient l1 norm (u*).
    pub coeff_norm: f64,
    pub channel: ChannelConfig,
}

/// Generates per-arm piecewise-polynomial means.
///
/// Every piece satisfies two structural properties: the coefficient l1
/// norm is at most `coeff_norm`, and the weighted slope sum
/// sum_i i * |u_i| stays below 0.9 * coeff_norm, which caps the
/// per-step mean drift at 0.9 * coeff_norm / horizon.
pub fn gen_local_poly(cfg: &LocalPolyConfig, rng: &mut impl Rng) -> Result<EnvironmentSpec> {
    if cfg.arms == 0 {
        return Err(Error::Generation("need at least one arm".into()));
    }
    if !(cfg.coeff_norm.is_finite() && cfg.coeff_norm >= 0.05) {
        return Err(Error::Generation(format!(
            "coefficient norm bound {} too small; pieces could not leave 0",
            cfg.coeff_norm
        )));
    }
    let min_len = (cfg.horizon / (4 * cfg.segments_per_arm)).max(2);

    let mut per_arm: Vec<Vec<PolySegment>> = Vec::with_capacity(cfg.arms);
    for _ in 0..cfg.arms {
        let starts = sample_boundaries(rng, cfg.horizon, cfg.segments_per_arm, min_len)?;
        let mut segs: Vec<PolySegment> = Vec::with_capacity(starts.len());
        let mut prev_c0 = f64::NAN;
        for &start in &starts {
            let degree = if cfg.max_degree == 0 {
                0
            } else {
                rng.random_range(0..=cfg.max_degree)
            };
            // Amplitude budget for all x^i terms (i >= 1) combined: small in
            // absolute terms, inside the l1 bound after the constant term,
            // and inside the drift cap once weighted by the degree.
            let s_cap = (0.1_f64)
                .min(0.45 * (cfg.coeff_norm - 0.05))
                .min(0.9 * cfg.coeff_norm / degree.max(1) as f64);
            let (degree, s_total) = if degree == 0 || s_cap < 0.005 {
                (0, 0.0)
            } else {
                (degree, rng.random_range(0.005..s_cap))
            };

            let c0_lo = s_total + 0.02;
            let c0_hi = (1.0 - s_total - 0.02).min(cfg.coeff_norm - s_total);
            if c0_lo >= c0_hi {
                return Err(Error::Generation(format!(
                    "no feasible constant term for norm bound {}",
                    cfg.coeff_norm
                )));
            }
            let mut c0 = rng.random_range(c0_lo..c0_hi);
            // Make sure adjacent pieces genuinely differ.
            for _ in 0..64 {
                if prev_c0.is_nan() || (c0 - prev_c0).abs() >= 0.02 {
                    break;
                }
                c0 = rng.random_range(c0_lo..c0_hi);
            }
            prev_c0 = c0;

            let mut coeffs = vec![c0];
            if degree > 0 {
                let weights: Vec<f64> = (0..degree).map(|_| rng.random_range(0.2..1.0)).collect();
                let total: f64 = weights.iter().sum();
                for w in weights {
                    let mag = s_total * w / total;
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    coeffs.push(sign * mag);
                }
            }
            segs.push(PolySegment { start, coeffs });
        }
        per_arm.push(segs);
    }

    finish(
        cfg.arms,
        cfg.horizon,
        per_arm,
        cfg.channel,
        "local_poly",
        serde_json::to_value(cfg)?,
    )
}

// ---- holder: smooth bump means, discretized per step ----

/// Inputs for [`gen_holder`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderConfig {
    pub arms: usize,
    pub horizon: u64,
    /// Smooth pieces per arm (m*).
    pub segments_per_arm: u64,
    /// Smoothness exponent in (0, 1].
    pub alpha: f64,
    pub channel: ChannelConfig,
}

/// Generates per-arm means that are alpha-smooth inside each piece:
/// f(x) = c0 + sum_j b_j |x - x_j|^alpha with sum_j |b_j| <= 0.08, so
/// |f(x) - f(x')| <= |x - x'|^alpha holds within every piece.
///
/// Because |x - c|^alpha is not polynomial, the function is stored as
/// one constant piece per time step; the smoothness property is exact at
/// all sampled steps.
pub fn gen_holder(cfg: &HolderConfig, rng: &mut impl Rng) -> Result<EnvironmentSpec> {
    if cfg.arms == 0 {
        return Err(Error::Generation("need at least one arm".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::Generation(format!(
            "smoothness exponent {} outside (0, 1]",
            cfg.alpha
        )));
    }
    let min_len = (cfg.horizon / (4 * cfg.segments_per_arm)).max(2);

    let mut per_arm: Vec<Vec<PolySegment>> = Vec::with_capacity(cfg.arms);
    let mut structural: Vec<Vec<u64>> = Vec::with_capacity(cfg.arms);
    for _ in 0..cfg.arms {
        let starts = sample_boundaries(rng, cfg.horizon, cfg.segments_per_arm, min_len)?;
        structural.push(starts.clone());
        let mut segs: Vec<PolySegment> = Vec::with_capacity(cfg.horizon as usize);
        for (i, &start) in starts.iter().enumerate() {
            let end = starts.get(i + 1).copied().unwrap_or(cfg.horizon + 1);
            let c0 = rng.random_range(0.3..0.7);
            let bumps = rng.random_range(1..=3usize);
            let x_lo = start as f64 / cfg.horizon as f64;
            let x_hi = (end - 1) as f64 / cfg.horizon as f64;
            let centers: Vec<f64> = (0..bumps)
                .map(|_| {
                    if x_hi > x_lo {
                        rng.random_range(x_lo..=x_hi)
                    } else {
                        x_lo
                    }
                })
                .collect();
            let total_weight = rng.random_range(0.02..0.08);
            let raw: Vec<f64> = (0..bumps).map(|_| rng.random_range(0.2..1.0)).collect();
            let raw_sum: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw
                .iter()
                .map(|w| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * total_weight * w / raw_sum
                })
                .collect();
            for t in start..end {
                let x = t as f64 / cfg.horizon as f64;
                let mut v = c0;
                for (b, xj) in weights.iter().zip(&centers) {
                    v += b * (x - xj).abs().powf(cfg.alpha);
                }
                segs.push(PolySegment {
                    start: t,
                    coeffs: vec![v],
                });
            }
        }
        per_arm.push(segs);
    }

    let mut spec = finish(
        cfg.arms,
        cfg.horizon,
        per_arm,
        cfg.channel,
        "holder",
        serde_json::to_value(cfg)?,
    )?;
    // Per-step discretization makes every step a nominal piece start;
    // report the structural segmentation instead.
    let mut cps: Vec<u64> = structural.into_iter().flatten().collect();
    cps.sort_unstable();
    cps.dedup();
    spec.meta
        .as_mut()
        .expect("generator sets meta")
        .change_points = cps;
    spec.validate()?;
    Ok(spec)
}

// ---- inflexion: piecewise-monotone gap profiles ----

/// Inputs for [`gen_inflexion`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflexionConfig {
    pub arms: usize,
    pub horizon: u64,
    /// Bound on monotone pieces of the gap profile (upsilon*); the
    /// profile has at most upsilon* - 1 direction changes.
    pub direction_changes: u64,
    /// Drift tolerance the environment is built for (B*); must be
    /// positive. Gap excursions scale with max(B*, horizon^{-1/2}).
    pub drift_tolerance: f64,
    pub channel: ChannelConfig,
}

/// Generates an environment whose best mean is constant while arm 1's
/// gap follows a piecewise-linear profile with at most
/// `direction_changes - 1` direction changes; arms 2+ keep constant
/// gaps.
pub fn gen_inflexion(cfg: &InflexionConfig, rng: &mut impl Rng) -> Result<EnvironmentSpec> {
    if cfg.arms < 2 {
        return Err(Error::Generation(
            "inflexion environments need at least 2 arms".into(),
        ));
    }
    if cfg.direction_changes == 0 {
        return Err(Error::Generation("need at least one monotone piece".into()));
    }
    if !(cfg.drift_tolerance.is_finite() && cfg.drift_tolerance > 0.0) {
        return Err(Error::Generation(format!(
            "drift tolerance must be positive, got {}",
            cfg.drift_tolerance
        )));
    }
    let horizon_f = cfg.horizon as f64;
    let band = 2.0 * (1.0 / horizon_f.sqrt()).max(cfg.drift_tolerance);
    let best_level = rng.random_range(0.8..0.95);
    let g_hi = (4.0 * band).min(best_level - 0.02);
    let g_lo = 0.25 * g_hi;
    if g_lo <= 0.0 || g_hi <= g_lo {
        return Err(Error::Generation(
            "gap band collapsed; horizon too short for this drift tolerance".into(),
        ));
    }

    let pieces = cfg.direction_changes;
    let min_len = (cfg.horizon / (4 * pieces)).max(2);
    let starts = sample_boundaries(rng, cfg.horizon, pieces, min_len)?;

    // Knot values alternate direction so each piece is strictly monotone.
    let mut knot_vals = Vec::with_capacity(starts.len() + 1);
    let mut up = rng.random_bool(0.5);
    knot_vals.push(rng.random_range(g_lo..=g_hi));
    for _ in 0..starts.len() {
        let prev = *knot_vals.last().expect("nonempty");
        let next = if up {
            rng.random_range((prev + 0.25 * (g_hi - prev)).min(g_hi)..=g_hi)
        } else {
            rng.random_range(g_lo..=(prev - 0.25 * (prev - g_lo)).max(g_lo))
        };
        knot_vals.push(next);
        up = !up;
    }

    let mut per_arm: Vec<Vec<PolySegment>> = vec![Vec::new(); cfg.arms];
    per_arm[0].push(PolySegment {
        start: 1,
        coeffs: vec![best_level],
    });
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(cfg.horizon + 1);
        let x0 = start as f64 / horizon_f;
        let x1 = (end.max(start + 1) - 1) as f64 / horizon_f;
        let (v0, v1) = (knot_vals[i], knot_vals[i + 1]);
        let slope = if x1 > x0 { (v1 - v0) / (x1 - x0) } else { 0.0 };
        // Arm 1's mean is best_level - gap(x) with gap linear on the piece.
        per_arm[1].push(PolySegment {
            start,
            coeffs: vec![best_level - (v0 - slope * x0), -slope],
        });
    }
    for arm in per_arm.iter_mut().skip(2) {
        let g = rng.random_range((0.8 * g_hi).min(best_level - 0.02)..=(best_level - 0.02));
        arm.push(PolySegment {
            start: 1,
            coeffs: vec![best_level - g],
        });
    }

    let mut params = serde_json::to_value(cfg)?;
    params["knot_values"] = serde_json::to_value(&knot_vals)?;
    finish(
        cfg.arms,
        cfg.horizon,
        per_arm,
        cfg.channel,
        "inflexion",
        params,
    )
}

// ---- shared assembly ----

fn finish(
    arms: usize,
    horizon: u64,
    per_arm: Vec<Vec<PolySegment>>,
    channel: ChannelConfig,
    family: &str,
    params: serde_json::Value,
) -> Result<EnvironmentSpec> {
    let change_points = merged_change_points(&per_arm);
    let means = per_arm
        .into_iter()
        .map(MeanFunction::new)
        .collect::<Result<Vec<_>>>()?;
    let mut spec = EnvironmentSpec::new(arms, horizon, means, channel.noise, channel.mode)?;
    spec.meta = Some(GeneratorMeta {
        family: family.into(),
        change_points,
        params,
    });
    spec.validate()?;
    Ok(spec)
}
