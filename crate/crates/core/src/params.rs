//! Parameter derivations for the four environment families and the
//! reference regret-bound curves plotted by the harness.
//!
//! Each family prescribes a segment budget M and a drift tolerance B*
//! as closed-form functions of its structural inputs. The derived M is
//! an upper bound on the minimal significant partition of any
//! environment the matching generator produces, so a policy configured
//! with these values meets its regret guarantee on that family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural inputs, one variant per environment family. Field names
/// mirror the generator configs in [`crate::env::generate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CaseInputs {
    /// Piecewise-constant means with abrupt switches.
    Switching { segments: u64 },
    /// Piecewise-polynomial means of bounded degree and coefficient norm.
    LocalPoly {
        segments_per_arm: u64,
        max_degree: u32,
        coeff_norm: f64,
    },
    /// Piecewise smooth means with exponent alpha.
    Holder { segments_per_arm: u64, alpha: f64 },
    /// Piecewise-monotone gap profiles with bounded direction changes.
    Inflexion {
        direction_changes: u64,
        drift_tolerance: f64,
    },
}

/// Derived policy parameters together with the inputs that produced
/// them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub inputs: CaseInputs,
    /// Derived segment budget M.
    pub segments: u64,
    /// Derived drift tolerance B*.
    pub drift_tolerance: f64,
}

/// Floor of log2(sqrt(horizon)), computed in integer arithmetic.
fn half_log2(horizon: u64) -> u64 {
    u64::from(horizon.ilog2()) / 2
}

fn check_counts(arms: usize, horizon: u64) -> Result<()> {
    if arms == 0 {
        return Err(Error::invalid("need at least one arm"));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    Ok(())
}

/// Switching means: the segment count is the parameter and nothing
/// drifts between switches.
pub fn params_case_a(segments: u64) -> Result<CaseParams> {
    if segments == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    Ok(CaseParams {
        inputs: CaseInputs::Switching { segments },
        segments,
        drift_tolerance: 0.0,
    })
}

/// Polynomial pieces: M = m* (gamma* + 1) K (floor(log2 sqrt T) + 1)
/// and B* = u* K / T.
pub fn params_case_b(
    segments_per_arm: u64,
    max_degree: u32,
    coeff_norm: f64,
    arms: usize,
    horizon: u64,
) -> Result<CaseParams> {
    check_counts(arms, horizon)?;
    if segments_per_arm == 0 {
        return Err(Error::invalid("need at least one piece per arm"));
    }
    if !(coeff_norm.is_finite() && coeff_norm > 0.0) {
        return Err(Error::invalid(format!(
            "coefficient norm bound must be positive, got {coeff_norm}"
        )));
    }
    let segments = segments_per_arm
        .checked_mul(u64::from(max_degree) + 1)
        .and_then(|v| v.checked_mul(arms as u64))
        .and_then(|v| v.checked_mul(half_log2(horizon) + 1))
        .ok_or_else(|| Error::invalid("derived segment count overflows u64"))?;
    Ok(CaseParams {
        inputs: CaseInputs::LocalPoly {
            segments_per_arm,
            max_degree,
            coeff_norm,
        },
        segments,
        drift_tolerance: coeff_norm * arms as f64 / horizon as f64,
    })
}

/// Smooth pieces: B* = (K ln T / T)^(2a / (2a + 1)) and
/// M = ceil(m* + K (B*)^(-1/a)), the bound on how often a gap can cross
/// the significance threshold when every piece is alpha-smooth.
pub fn params_case_c(
    segments_per_arm: u64,
    alpha: f64,
    arms: usize,
    horizon: u64,
) -> Result<CaseParams> {
    check_counts(arms, horizon)?;
    if segments_per_arm == 0 {
        return Err(Error::invalid("need at least one piece per arm"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "smoothness exponent {alpha} outside (0, 1]"
        )));
    }
    if horizon < 2 {
        return Err(Error::invalid(
            "horizon must be at least 2 for a positive drift tolerance",
        ));
    }
    let k = arms as f64;
    let t = horizon as f64;
    let drift_tolerance = (k * t.ln() / t).powf(2.0 * alpha / (2.0 * alpha + 1.0));
    let crossings = k * drift_tolerance.powf(-1.0 / alpha);
    let raw = segments_per_arm as f64 + crossings;
    if !(raw.is_finite() && raw <= 2f64.powi(53)) {
        return Err(Error::invalid(format!(
            "derived segment count {raw} too large to represent"
        )));
    }
    Ok(CaseParams {
        inputs: CaseInputs::Holder {
            segments_per_arm,
            alpha,
        },
        segments: raw.ceil() as u64,
        drift_tolerance,
    })
}

/// Monotone gap pieces: M = v* K (floor(log2 sqrt T) + 1) with the
/// drift tolerance passed through unchanged.
pub fn params_case_d(
    direction_changes: u64,
    drift_tolerance: f64,
    arms: usize,
    horizon: u64,
) -> Result<CaseParams> {
    check_counts(arms, horizon)?;
    if direction_changes == 0 {
        return Err(Error::invalid("need at least one monotone piece"));
    }
    if !(drift_tolerance.is_finite() && drift_tolerance > 0.0) {
        return Err(Error::invalid(format!(
            "drift tolerance must be positive, got {drift_tolerance}"
        )));
    }
    let segments = direction_changes
        .checked_mul(arms as u64)
        .and_then(|v| v.checked_mul(half_log2(horizon) + 1))
        .ok_or_else(|| Error::invalid("derived segment count overflows u64"))?;
    Ok(CaseParams {
        inputs: CaseInputs::Inflexion {
            direction_changes,
            drift_tolerance,
        },
        segments,
        drift_tolerance,
    })
}

/// Reference curve C ln(T) sqrt(KTM) + C T B* with caller-supplied C.
pub fn regret_bound_prudent(
    segments: u64,
    drift_tolerance: f64,
    arms: usize,
    horizon: u64,
    scale: f64,
) -> f64 {
    let t = horizon as f64;
    scale * t.ln() * (arms as f64 * t * segments as f64).sqrt() + scale * t * drift_tolerance
}

/// Reference curve (2^1.5 + 2^0.5 c ln(2KT^3)) sqrt(KTM) + 2KM
/// + 8T max(B*, T^(-1/2)) + 1, defined for c >= 16.
pub fn regret_bound_selective(
    segments: u64,
    drift_tolerance: f64,
    arms: usize,
    horizon: u64,
    scan_constant: f64,
) -> Result<f64> {
    if !(scan_constant.is_finite() && scan_constant >= 16.0) {
        return Err(Error::invalid(format!(
            "scan constant must be at least 16, got {scan_constant}"
        )));
    }
    let k = arms as f64;
    let t = horizon as f64;
    let m = segments as f64;
    let lead = 8f64.sqrt() + 2f64.sqrt() * scan_constant * (2.0 * k * t.powi(3)).ln();
    Ok(lead * (k * t * m).sqrt()
        + 2.0 * k * m
        + 8.0 * t * drift_tolerance.max(1.0 / t.sqrt())
        + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn switching_passes_the_segment_count_through() {
        assert_eq!(params_case_a(1).unwrap().segments, 1);
        let p = params_case_a(3).unwrap();
        assert_eq!(p.segments, 3);
        assert_eq!(p.drift_tolerance, 0.0);
        assert!(params_case_a(0).is_err());
    }

    #[test]
    fn local_poly_matches_integer_arithmetic() {
        let p = params_case_b(2, 1, 3.0, 3, 1024).unwrap();
        assert_eq!(p.segments, 72);
        assert_eq!(p.drift_tolerance, 9.0 / 1024.0);

        let p = params_case_b(3, 2, 1.0, 5, 1_000_000).unwrap();
        assert_eq!(p.segments, 450);

        let p = params_case_b(1, 0, 0.5, 1, 4).unwrap();
        assert_eq!(p.segments, 2);

        // Square horizons make floor(log2 sqrt T) exact by inspection.
        for (m_star, degree, arms, horizon, half) in [
            (7u64, 4u32, 6usize, 4096u64, 6u64),
            (11, 0, 2, 9, 1),
            (1, 9, 1, 65536, 8),
        ] {
            let p = params_case_b(m_star, degree, 1.0, arms, horizon).unwrap();
            let expect =
                (m_star as u128) * (degree as u128 + 1) * (arms as u128) * (half as u128 + 1);
            assert_eq!(p.segments as u128, expect);
        }

        assert!(params_case_b(0, 1, 1.0, 2, 100).is_err());
        assert!(params_case_b(2, 1, 0.0, 2, 100).is_err());
        assert!(params_case_b(2, 1, 1.0, 0, 100).is_err());
        assert!(params_case_b(2, 1, 1.0, 2, 0).is_err());
        assert!(params_case_b(u64::MAX / 2, 3, 1.0, 2, 100).is_err());
    }

    #[test]
    fn holder_drift_tolerance_matches_reference_values() {
        let p = params_case_c(1, 1.0, 2, 1000).unwrap();
        assert_relative_eq!(p.drift_tolerance, 0.05757641580227774, max_relative = 1e-12);
        assert_eq!(p.segments, 36);

        let p = params_case_c(2, 0.5, 1, 10_000).unwrap();
        assert_relative_eq!(p.drift_tolerance, 0.03034854258770293, max_relative = 1e-12);
        assert_eq!(p.segments, 1088);

        assert!(params_case_c(0, 1.0, 2, 1000).is_err());
        assert!(params_case_c(1, 0.0, 2, 1000).is_err());
        assert!(params_case_c(1, 1.5, 2, 1000).is_err());
        assert!(params_case_c(1, f64::NAN, 2, 1000).is_err());
        assert!(params_case_c(1, 1.0, 2, 1).is_err());
    }

    #[test]
    fn holder_drift_tolerance_decreases_with_horizon() {
        let mut last = f64::INFINITY;
        for horizon in [100u64, 1000, 10_000, 100_000, 1_000_000] {
            let b = params_case_c(1, 1.0, 2, horizon).unwrap().drift_tolerance;
            assert!(b < last, "B* not decreasing at T = {horizon}");
            last = b;
        }
    }

    #[test]
    fn inflexion_matches_integer_arithmetic() {
        let p = params_case_d(3, 0.02, 2, 10_000).unwrap();
        assert_eq!(p.segments, 42);
        assert_eq!(p.drift_tolerance, 0.02);

        assert_eq!(params_case_d(1, 0.5, 1, 4).unwrap().segments, 2);

        assert!(params_case_d(0, 0.02, 2, 100).is_err());
        assert!(params_case_d(3, 0.0, 2, 100).is_err());
        assert!(params_case_d(3, -0.1, 2, 100).is_err());
        assert!(params_case_d(3, f64::INFINITY, 2, 100).is_err());
    }

    #[test]
    fn bound_curves_match_reference_values() {
        assert_relative_eq!(
            regret_bound_prudent(3, 0.01, 2, 2000, 2.0),
            1705.2742937950788,
            max_relative = 1e-12
        );
        // ln 1 = 0 kills the first term.
        assert_eq!(regret_bound_prudent(1, 0.25, 1, 1, 1.0), 0.25);

        assert_relative_eq!(
            regret_bound_selective(1, 1.0, 1, 1, 16.0).unwrap(),
            29.512557420242945,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            regret_bound_selective(3, 0.0, 2, 2000, 16.0).unwrap(),
            60638.11411972475,
            max_relative = 1e-12
        );
        assert!(regret_bound_selective(1, 0.0, 1, 100, 15.9).is_err());
    }

    #[test]
    fn case_params_round_trip_through_json() {
        let cases = [
            params_case_a(3).unwrap(),
            params_case_b(2, 1, 3.0, 3, 1024).unwrap(),
            params_case_c(1, 1.0, 2, 1000).unwrap(),
            params_case_d(3, 0.02, 2, 10_000).unwrap(),
        ];
        for p in cases {
            let json = serde_json::to_string(&p).unwrap();
            let back: CaseParams = serde_json::from_str(&json).unwrap();
            assert_eq!(back, p);
        }
    }
}
