//! Single-impact model for flat rotation.
//!
//! The coin arrives with vertical speed `v1` (having fallen from apex `h1`)
//! and spin `ω1`. The ground pushes on one rim corner for about a
//! millisecond; the resulting impulse `η` changes the spin by
//! `Δω = η·H·cosθ / I` and whatever energy the spin change does not absorb
//! goes into the vertical rebound, after the restitution factor `k` has been
//! applied to the gravitational part:
//!
//! ```text
//! k·m·g·h1 + I·ω1²/2 = m·v2²/2 + I·ω2²/2 = m·g·h3 + I·ω2²/2
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coin::{CoinSpec, Material, STANDARD_GRAVITY};
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};

/// Exponent of the line-contact force law.
pub const HERTZ_EXPONENT: f64 = 10.0 / 9.0;
const HERTZ_LENGTH_EXPONENT: f64 = 8.0 / 9.0;
const HERTZ_COEFFICIENT: f64 = 1.36;

/// Which rim corner strikes, relative to the current sense of rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSide {
    /// The ground reaction torques the coin along its spin: spin-up.
    Leading,
    /// The reaction torque opposes the spin: spin-down.
    Trailing,
}

/// Moment arm used in `Δω = η·arm / I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeverArm {
    /// `H·cosθ`.
    #[default]
    Height,
    /// `sqrt(R² + H²/4)·|cos(θ + φ0)|`, `φ0 = atan(H/2R)`: the horizontal
    /// offset of the striking corner from the centre of mass.
    HalfDiagonal,
}

impl LeverArm {
    pub fn moment_arm(self, spec: &CoinSpec, tilt: f64) -> f64 {
        match self {
            LeverArm::Height => spec.height() * tilt.cos(),
            LeverArm::HalfDiagonal => {
                let phi0 = (0.5 * spec.height() / spec.radius()).atan();
                spec.half_diagonal() * (tilt + phi0).cos().abs()
            }
        }
    }
}

impl std::str::FromStr for LeverArm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "height" => Ok(Self::Height),
            "half_diagonal" => Ok(Self::HalfDiagonal),
            other => Err(invalid(
                "lever",
                format!("expected `height` or `half_diagonal`, got `{other}`"),
            )),
        }
    }
}

/// State of the coin at the instant its rim touches the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactInput {
    /// Downward speed of the centre of mass, `>= 0`.
    pub incoming_speed: f64,
    pub incoming_omega: f64,
    /// Angle between the face plane and the ground, in `[0, π/2]`.
    pub tilt: f64,
    pub contact_side: ContactSide,
}

impl ImpactInput {
    fn validate(&self) -> Result<()> {
        require_non_negative("impact.incoming_speed", self.incoming_speed)?;
        if !self.incoming_omega.is_finite() {
            return Err(invalid("impact.incoming_omega", "must be finite"));
        }
        if !(0.0..=PI / 2.0 + 1e-12).contains(&self.tilt) {
            return Err(invalid(
                "impact.tilt",
                format!("must lie in [0, π/2], got {}", self.tilt),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactResult {
    /// Upward speed of the centre of mass right after the impact.
    pub outgoing_speed: f64,
    pub outgoing_omega: f64,
    /// `(1 - k)·m·g·h1`.
    pub energy_dissipated: f64,
    /// Apex of the next flight above the impact position.
    pub next_apex: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HertzParams {
    pub stiffness: f64,
    pub nonlinearity: f64,
    pub contact_length: f64,
    pub composite_modulus: f64,
}

/// `E* = E / (1 - ν²)`, `K = E*·L^(8/9) / 1.36^n`.
pub fn hertz_params(material: &Material, contact_length: f64) -> Result<HertzParams> {
    let e = material
        .youngs_modulus
        .ok_or_else(|| invalid("material.youngs_modulus", "required for Hertz stiffness"))?;
    require_positive("material.youngs_modulus", e)?;
    let nu = material.poisson_ratio;
    if !(nu.is_finite() && (0.0..0.5).contains(&nu)) {
        return Err(invalid(
            "material.poisson_ratio",
            format!("must lie in [0, 0.5), got {nu}"),
        ));
    }
    require_positive("contact_length", contact_length)?;
    let composite_modulus = e / (1.0 - nu * nu);
    let stiffness = composite_modulus * contact_length.powf(HERTZ_LENGTH_EXPONENT)
        / HERTZ_COEFFICIENT.powf(HERTZ_EXPONENT);
    Ok(HertzParams {
        stiffness,
        nonlinearity: HERTZ_EXPONENT,
        contact_length,
        composite_modulus,
    })
}

/// `N = K·δⁿ`.
pub fn hertz_force(params: &HertzParams, indentation: f64) -> Result<f64> {
    require_non_negative("indentation", indentation)?;
    Ok(params.stiffness * indentation.powf(params.nonlinearity))
}

/// Integral of `N_max·sin(πt/τ)` over one impact, `2·N_max·τ/π`.
pub fn harmonic_impulse(peak_force: f64, duration: f64) -> Result<f64> {
    require_non_negative("peak_force", peak_force)?;
    require_positive("impact_duration", duration)?;
    Ok(2.0 * peak_force * duration / PI)
}

/// Spin change `η·arm / I`, signed relative to the incoming rotation sense
/// (positive means the coin spins faster in the direction it already turns).
pub fn spin_change(eta: f64, moment_arm: f64, inertia: f64, side: ContactSide) -> f64 {
    let magnitude = eta * moment_arm / inertia;
    match side {
        ContactSide::Leading => magnitude,
        ContactSide::Trailing => -magnitude,
    }
}

/// `Δω = η·H·cosθ / I_transverse` with the sign from `side`.
pub fn delta_omega(material: &Material, spec: &CoinSpec, tilt: f64, side: ContactSide) -> f64 {
    ImpactModel::default().delta_omega(material, spec, tilt, side)
}

/// Next apex `h3 = k·h1 + I·(ω1² - ω2²) / (2·m·g)`.
pub fn apex_after_impact(
    restitution: f64,
    h1: f64,
    inertia: f64,
    mass: f64,
    gravity: f64,
    omega1: f64,
    omega2: f64,
) -> f64 {
    restitution * h1 + inertia * (omega1 * omega1 - omega2 * omega2) / (2.0 * mass * gravity)
}

/// Impact model settings shared by every impact of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactModel {
    pub lever: LeverArm,
    pub gravity: f64,
}

impl Default for ImpactModel {
    fn default() -> Self {
        Self {
            lever: LeverArm::Height,
            gravity: STANDARD_GRAVITY,
        }
    }
}

impl ImpactModel {
    pub fn delta_omega(
        &self,
        material: &Material,
        spec: &CoinSpec,
        tilt: f64,
        side: ContactSide,
    ) -> f64 {
        spin_change(
            material.eta(),
            self.lever.moment_arm(spec, tilt),
            spec.inertia().transverse,
            side,
        )
    }

    /// Outgoing spin for a given incoming spin and contact side.
    pub fn outgoing_omega(&self, input: &ImpactInput, spec: &CoinSpec, material: &Material) -> f64 {
        let change = self.delta_omega(material, spec, input.tilt, input.contact_side);
        let sense = if input.incoming_omega < 0.0 {
            -1.0
        } else {
            1.0
        };
        input.incoming_omega + sense * change
    }

    /// Applies one impact. `h1` is the fall height of the centre of mass that
    /// produced the incoming speed.
    ///
    /// Fails with [`Error::NegativeEnergyBudget`] when the spin change asks for
    /// more energy than `k·m·g·h1 + I·ω1²/2` holds.
    pub fn rebound(
        &self,
        input: &ImpactInput,
        spec: &CoinSpec,
        material: &Material,
        h1: f64,
    ) -> Result<ImpactResult> {
        input.validate()?;
        require_non_negative("h1", h1)?;
        let m = spec.mass();
        let g = self.gravity;
        let k = material.restitution;
        let inertia = spec.inertia().transverse;
        let w1 = input.incoming_omega;
        let w2 = self.outgoing_omega(input, spec, material);

        let budget = k * m * g * h1 + 0.5 * inertia * (w1 * w1 - w2 * w2);
        if budget < 0.0 {
            return Err(Error::NegativeEnergyBudget { deficit: -budget });
        }
        Ok(ImpactResult {
            outgoing_speed: (2.0 * budget / m).sqrt(),
            outgoing_omega: w2,
            energy_dissipated: (1.0 - k) * m * g * h1,
            next_apex: apex_after_impact(k, h1, inertia, m, g, w1, w2),
        })
    }
}
