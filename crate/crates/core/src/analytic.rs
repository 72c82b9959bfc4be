//! Closed-form side-landing probabilities for a perfectly inelastic impact.
//!
//! In the flat model the coin tumbles about a single diameter and its
//! cross-section is inscribed in a circle; the side wins when the downward
//! direction falls inside one of the two arcs subtended by the rim, of
//! half-angle `atan(H/2R)`. The volumetric model does the same on the
//! circumscribed sphere, where the side owns the band between the two rim
//! circles.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    Flat,
    Volumetric,
}

impl AnalyticModel {
    pub fn probability(self, ratio: f64) -> Result<f64> {
        match self {
            AnalyticModel::Flat => flat_probability(ratio),
            AnalyticModel::Volumetric => volumetric_probability(ratio),
        }
    }
}

impl std::str::FromStr for AnalyticModel {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flat" => Ok(Self::Flat),
            "volumetric" => Ok(Self::Volumetric),
            other => Err(invalid(
                "model",
                format!("expected `flat` or `volumetric`, got `{other}`"),
            )),
        }
    }
}

fn check_ratio(ratio: f64) -> Result<f64> {
    if ratio.is_finite() && ratio >= 0.0 {
        Ok(ratio)
    } else {
        Err(invalid(
            "ratio",
            format!("H/R must be finite and >= 0, got {ratio}"),
        ))
    }
}

/// `P = 2α/π` with `α = atan(H/2R)`.
pub fn flat_probability(ratio: f64) -> Result<f64> {
    let ratio = check_ratio(ratio)?;
    Ok(2.0 * (0.5 * ratio).atan() / PI)
}

/// Lateral band share of the circumscribed sphere, `x / sqrt(x² + 4)`.
pub fn volumetric_probability(ratio: f64) -> Result<f64> {
    let ratio = check_ratio(ratio)?;
    Ok(ratio / (ratio * ratio + 4.0).sqrt())
}

/// The `H/R` at which the model gives exactly one third.
pub fn fair_ratio(model: AnalyticModel) -> f64 {
    match model {
        AnalyticModel::Flat => 2.0 * (PI / 6.0).tan(),
        AnalyticModel::Volumetric => FRAC_1_SQRT_2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Fraction of evenly spaced axis tilts in `[0, π/2]` that rest on the rim.
    fn flat_by_enumeration(ratio: f64, n: usize) -> f64 {
        let threshold = 2.0 / ratio;
        let hits = (0..n)
            .filter(|&i| {
                let tilt = (i as f64 + 0.5) / n as f64 * PI / 2.0;
                tilt.tan() > threshold
            })
            .count();
        hits as f64 / n as f64
    }

    /// Midpoint quadrature of the sphere measure `sinΘ dΘ / 1` over the rim band.
    fn volumetric_by_quadrature(ratio: f64, n: usize) -> f64 {
        let threshold = 2.0 / ratio;
        let h = PI / 2.0 / n as f64;
        (0..n)
            .map(|i| {
                let tilt = (i as f64 + 0.5) * h;
                if tilt.tan() > threshold {
                    tilt.sin() * h
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn flat_examples() {
        assert_eq!(flat_probability(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(flat_probability(2.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            flat_probability(1.1547005).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn volumetric_examples() {
        assert_eq!(volumetric_probability(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            volumetric_probability(0.5f64.sqrt()).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            volumetric_probability(2.0).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn closed_forms_match_geometric_oracles() {
        for &ratio in &[0.3, 0.8, 1.1547, 1.5, 2.0, 4.0] {
            let flat = flat_probability(ratio).unwrap();
            assert_abs_diff_eq!(flat, flat_by_enumeration(ratio, 1_000_000), epsilon = 1e-5);
            let vol = volumetric_probability(ratio).unwrap();
            assert_abs_diff_eq!(
                vol,
                volumetric_by_quadrature(ratio, 1_000_000),
                epsilon = 1e-5
            );
        }
    }

    #[test]
    fn fair_ratios() {
        assert_abs_diff_eq!(fair_ratio(AnalyticModel::Flat), 1.1547005, epsilon = 1e-7);
        assert_abs_diff_eq!(
            fair_ratio(AnalyticModel::Volumetric),
            0.5f64.sqrt(),
            epsilon = 1e-8
        );
        for m in [AnalyticModel::Flat, AnalyticModel::Volumetric] {
            assert_abs_diff_eq!(
                m.probability(fair_ratio(m)).unwrap(),
                1.0 / 3.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn invalid_ratios() {
        assert!(flat_probability(-1.0).is_err());
        assert!(volumetric_probability(f64::INFINITY).is_err());
        assert!(flat_probability(f64::NAN).is_err());
        assert!("cubic".parse::<AnalyticModel>().is_err());
    }

    #[test]
    fn large_ratio_limit() {
        assert!(flat_probability(1000.0).unwrap() >= 0.99);
        assert!(volumetric_probability(1000.0).unwrap() >= 0.99);
    }

    proptest::proptest! {
        #[test]
        fn strictly_increasing(a in 1e-6f64..100.0, d in 1e-6f64..10.0) {
            for m in [AnalyticModel::Flat, AnalyticModel::Volumetric] {
                let lo = m.probability(a).unwrap();
                let hi = m.probability(a + d).unwrap();
                proptest::prop_assert!(hi > lo);
                proptest::prop_assert!((0.0..1.0).contains(&lo));
            }
        }
    }
}
