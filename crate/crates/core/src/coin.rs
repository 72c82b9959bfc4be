//! Coin geometry, material constants, inertia and the outcome taxonomy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_non_negative, require_positive, Result};

/// Standard gravity in m/s², used unless a configuration overrides it.
pub const STANDARD_GRAVITY: f64 = 9.81;

/// A homogeneous cylinder: height `H`, radius `R` and mass `m`, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoin", into = "RawCoin")]
pub struct CoinSpec {
    height: f64,
    radius: f64,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCoin {
    height: f64,
    radius: f64,
    mass: f64,
}

impl TryFrom<RawCoin> for CoinSpec {
    type Error = crate::Error;
    fn try_from(raw: RawCoin) -> Result<Self> {
        CoinSpec::new(raw.height, raw.radius, raw.mass)
    }
}

impl From<CoinSpec> for RawCoin {
    fn from(c: CoinSpec) -> Self {
        RawCoin {
            height: c.height,
            radius: c.radius,
            mass: c.mass,
        }
    }
}

impl CoinSpec {
    pub fn new(height: f64, radius: f64, mass: f64) -> Result<Self> {
        Ok(Self {
            height: require_positive("coin.height", height)?,
            radius: require_positive("coin.radius", radius)?,
            mass: require_positive("coin.mass", mass)?,
        })
    }

    /// Coin of radius `radius` whose height gives the requested `H/R`.
    pub fn with_aspect_ratio(ratio: f64, radius: f64, mass: f64) -> Result<Self> {
        Self::new(ratio * radius, radius, mass)
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `H / R`.
    pub fn aspect_ratio(&self) -> f64 {
        self.height / self.radius
    }

    pub fn inertia(&self) -> Inertia {
        inertia_of(self)
    }

    /// Distance from the centre of mass to any rim point, `sqrt(R² + H²/4)`.
    pub fn half_diagonal(&self) -> f64 {
        self.radius.hypot(0.5 * self.height)
    }

    /// Tilt of the symmetry axis from vertical at which the centre of mass sits
    /// directly above a rim edge: `atan(2R/H)`.
    pub fn balance_tilt(&self) -> f64 {
        (2.0 * self.radius / self.height).atan()
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(self.height, self.radius, mass)
    }
}

/// Principal moments of inertia of the coin about its centre of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inertia {
    /// About any diameter.
    pub transverse: f64,
    /// About the symmetry axis.
    pub axial: f64,
}

impl Inertia {
    /// Solid homogeneous cylinder. A zero height (thin disk) is allowed here.
    pub fn solid_cylinder(mass: f64, radius: f64, height: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("radius", radius)?;
        require_non_negative("height", height)?;
        Ok(Self {
            transverse: mass * (3.0 * radius * radius + height * height) / 12.0,
            axial: 0.5 * mass * radius * radius,
        })
    }
}

pub fn inertia_of(spec: &CoinSpec) -> Inertia {
    // CoinSpec invariants already hold, so this cannot fail.
    Inertia {
        transverse: spec.mass * (3.0 * spec.radius * spec.radius + spec.height * spec.height)
            / 12.0,
        axial: 0.5 * spec.mass * spec.radius * spec.radius,
    }
}

pub fn aspect_ratio(spec: &CoinSpec) -> f64 {
    spec.aspect_ratio()
}

/// How the Δω-per-impact impulse scale `η` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ImpactConstant {
    /// `η` given directly, in N·s.
    Direct { eta: f64 },
    /// `η = 2·N_max·τ/π` from a peak Hertz force.
    HalfSine { peak_force: f64 },
}

/// Surface/coin pair properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Fraction of gravitational energy kept across an impact, in `[0, 1]`.
    pub restitution: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
    pub impact: ImpactConstant,
    /// Young's modulus in Pa, only needed for Hertz stiffness.
    pub youngs_modulus: Option<f64>,
    pub poisson_ratio: f64,
    /// Impact duration in seconds.
    pub impact_duration: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            restitution: 0.5,
            friction: 0.5,
            impact: ImpactConstant::Direct { eta: 0.0 },
            youngs_modulus: None,
            poisson_ratio: 0.3,
            impact_duration: 1e-3,
        }
    }
}

impl Material {
    pub fn new(restitution: f64, friction: f64, eta: f64) -> Result<Self> {
        Self {
            restitution,
            friction,
            impact: ImpactConstant::Direct { eta },
            ..Self::default()
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(invalid(
                "material.restitution",
                format!("must lie in [0, 1], got {}", self.restitution),
            ));
        }
        require_non_negative("material.friction", self.friction)?;
        require_positive("material.impact_duration", self.impact_duration)?;
        match self.impact {
            ImpactConstant::Direct { eta } => {
                require_non_negative("material.eta", eta)?;
            }
            ImpactConstant::HalfSine { peak_force } => {
                require_non_negative("material.peak_force", peak_force)?;
            }
        }
        if let Some(e) = self.youngs_modulus {
            require_positive("material.youngs_modulus", e)?;
        }
        if !(self.poisson_ratio.is_finite() && (0.0..0.5).contains(&self.poisson_ratio)) {
            return Err(invalid(
                "material.poisson_ratio",
                format!("must lie in [0, 0.5), got {}", self.poisson_ratio),
            ));
        }
        Ok(self)
    }

    /// The impulse scale `η` in N·s.
    pub fn eta(&self) -> f64 {
        match self.impact {
            ImpactConstant::Direct { eta } => eta,
            ImpactConstant::HalfSine { peak_force } => {
                2.0 * peak_force * self.impact_duration / std::f64::consts::PI
            }
        }
    }

    pub fn with_restitution(mut self, k: f64) -> Result<Self> {
        self.restitution = k;
        self.validated()
    }

    pub fn with_friction(mut self, mu: f64) -> Result<Self> {
        self.friction = mu;
        self.validated()
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.impact = ImpactConstant::Direct { eta };
        self.validated()
    }
}

/// Terminal rest state of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Side,
    FaceUp,
    FaceDown,
}

impl Outcome {
    pub fn is_side(self) -> bool {
        self == Outcome::Side
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Side => "SIDE",
            Outcome::FaceUp => "FACE_UP",
            Outcome::FaceDown => "FACE_DOWN",
        }
    }
}

/// Side iff `tan(tilt) > 2R/H`, with ties inside `1e-9` going to `Side`.
///
/// `tilt` is the folded angle of the symmetry axis from vertical, in `[0, π/2]`.
pub(crate) fn is_side_tilt(tilt: f64, spec: &CoinSpec) -> bool {
    let threshold = 2.0 * spec.radius / spec.height;
    let t = tilt.tan();
    t > threshold || (t - threshold).abs() < 1e-9
}
