//! Run configuration files.
//!
//! TOML with one table per module. Omitted tables fall back to defaults that
//! depend on `model`: a centimetre coin tossed in the plane for `sim2d`, and
//! the volumetric toss of a half-unit coin for `sim3d`.
//!
//! ```toml
//! model = "sim2d"
//! seed = 7
//! trials = 10000
//!
//! [coin]
//! aspect_ratio = 1.5
//! radius = 0.01
//! mass = 0.005
//!
//! [material]
//! restitution = 0.5
//! eta = 3e-4
//!
//! [sweep]
//! axis = "aspect_ratio"
//! grid = "0.5:2.5:0.25"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::coin::{CoinSpec, ImpactConstant, Material};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{Distribution, Interval, OrientationMode, SamplerSpec, Scenario, SimModel};
use crate::sim2d::TossConfig2D;
use crate::sim3d::TossConfig3D;
use crate::sweep::{parse_grid, Backend, FairOptions, SweepAxis, SweepPlan};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    AnalyticFlat,
    AnalyticVolumetric,
    #[default]
    Sim,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Per-point trials; the run's `trials` when absent.
    pub trials: Option<u64>,
    pub backend: BackendKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairSection {
    pub backend: BackendKind,
    pub options: FairOptions,
}

/// A fully resolved and validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: u64,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    pub scenario: Scenario,
    pub sweep: Option<SweepSection>,
    pub fair: FairSection,
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    model: Option<SimModel>,
    seed: Option<u64>,
    trials: Option<u64>,
    threads: Option<usize>,
    coin: RawCoin,
    material: RawMaterial,
    sampler: RawSampler,
    sim2d: TossConfig2D,
    sim3d: TossConfig3D,
    sweep: Option<RawSweep>,
    fair: RawFair,
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawCoin {
    height: Option<f64>,
    aspect_ratio: Option<f64>,
    radius: Option<f64>,
    mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawMaterial {
    restitution: Option<f64>,
    friction: Option<f64>,
    eta: Option<f64>,
    peak_force: Option<f64>,
    youngs_modulus: Option<f64>,
    poisson_ratio: Option<f64>,
    impact_duration: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSampler {
    angle_range: Option<Interval>,
    spin_range: Option<Interval>,
    height_range: Option<Interval>,
    speed_range: Option<Interval>,
    orientation_mode: Option<OrientationMode>,
    distribution: Option<Distribution>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    Values(Vec<f64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: SweepAxis,
    grid: RawGrid,
    trials: Option<u64>,
    #[serde(default)]
    backend: BackendKind,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawFair {
    backend: BackendKind,
    tolerance: Option<f64>,
    trials: Option<u64>,
    max_trials: Option<u64>,
    bracket: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Coin, material and sampler used when a config leaves them out.
pub fn model_defaults(model: SimModel) -> (CoinSpec, Material, SamplerSpec) {
    match model {
        SimModel::Sim2d => (
            CoinSpec::with_aspect_ratio(1.5, 0.01, 0.005).expect("valid default coin"),
            Material::new(0.5, 0.5, 3e-4).expect("valid default material"),
            SamplerSpec::default(),
        ),
        SimModel::Sim3d => (
            CoinSpec::with_aspect_ratio(0.8, 0.5, 1.0).expect("valid default coin"),
            Material::new(0.3, 1.0, 0.0).expect("valid default material"),
            SamplerSpec::volumetric(),
        ),
    }
}

impl RunConfig {
    /// Defaults for `model` with nothing overridden.
    pub fn for_model(model: SimModel) -> Self {
        Self::from_raw(RawConfig {
            model: Some(model),
            ..RawConfig::default()
        })
        .expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let model = raw.model.unwrap_or(SimModel::Sim2d);
        let (coin, material, sampler) = model_defaults(model);

        let radius = raw.coin.radius.unwrap_or(coin.radius());
        let mass = raw.coin.mass.unwrap_or(coin.mass());
        crate::error::require_positive("coin.radius", radius)?;
        crate::error::require_positive("coin.mass", mass)?;
        let spec = match (raw.coin.height, raw.coin.aspect_ratio) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "coin.aspect_ratio",
                    "give either height or aspect_ratio, not both",
                ))
            }
            (Some(h), None) => CoinSpec::new(h, radius, mass)?,
            (None, Some(r)) => CoinSpec::with_aspect_ratio(r, radius, mass)?,
            (None, None) => CoinSpec::with_aspect_ratio(coin.aspect_ratio(), radius, mass)?,
        };

        let m = raw.material;
        let impact = match (m.eta, m.peak_force) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "material.peak_force",
                    "give either eta or peak_force, not both",
                ))
            }
            (Some(eta), None) => ImpactConstant::Direct { eta },
            (None, Some(peak_force)) => ImpactConstant::HalfSine { peak_force },
            (None, None) => material.impact,
        };
        let material = Material {
            restitution: m.restitution.unwrap_or(material.restitution),
            friction: m.friction.unwrap_or(material.friction),
            impact,
            youngs_modulus: m.youngs_modulus.or(material.youngs_modulus),
            poisson_ratio: m.poisson_ratio.unwrap_or(material.poisson_ratio),
            impact_duration: m.impact_duration.unwrap_or(material.impact_duration),
        }
        .validated()?;

        let s = raw.sampler;
        let sampler = SamplerSpec {
            angle_range: s.angle_range.unwrap_or(sampler.angle_range),
            spin_range: s.spin_range.unwrap_or(sampler.spin_range),
            height_range: s.height_range.unwrap_or(sampler.height_range),
            speed_range: s.speed_range.unwrap_or(sampler.speed_range),
            orientation_mode: s.orientation_mode.unwrap_or(sampler.orientation_mode),
            distribution: s.distribution.unwrap_or(sampler.distribution),
        };
        let wanted_mode = match model {
            SimModel::Sim2d => OrientationMode::PlanarUniform,
            SimModel::Sim3d => OrientationMode::SphereUniform,
        };
        if sampler.orientation_mode != wanted_mode {
            return Err(invalid(
                "sampler.orientation_mode",
                "sim2d needs planar_uniform and sim3d needs sphere_uniform",
            ));
        }

        let scenario = Scenario {
            spec,
            material,
            sampler,
            model,
            sim2d: raw.sim2d,
            sim3d: raw.sim3d,
        };
        scenario.validate()?;

        let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if raw.threads == Some(0) {
            return Err(invalid("threads", "must be >= 1"));
        }

        let sweep = raw
            .sweep
            .map(|s| -> Result<SweepSection> {
                let grid = match s.grid {
                    RawGrid::Values(v) => v,
                    RawGrid::Text(t) => parse_grid(&t)?,
                };
                let section = SweepSection {
                    axis: s.axis,
                    grid,
                    trials: s.trials,
                    backend: s.backend,
                };
                section.plan(trials)?;
                Ok(section)
            })
            .transpose()?;

        let defaults = FairOptions::default();
        let f = raw.fair;
        let fair_trials = f.trials.unwrap_or(defaults.trials);
        let options = FairOptions {
            tolerance: f.tolerance.unwrap_or(defaults.tolerance),
            trials: fair_trials,
            max_trials: f.max_trials.unwrap_or(defaults.max_trials.max(fair_trials)),
            bracket: f
                .bracket
                .map(|[lo, hi]| (lo, hi))
                .unwrap_or(defaults.bracket),
        };
        options.validate()?;

        Ok(Self {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            trials,
            threads: raw.threads,
            scenario,
            sweep,
            fair: FairSection {
                backend: f.backend,
                options,
            },
            output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn backend(&self, kind: BackendKind) -> Backend {
        match kind {
            BackendKind::AnalyticFlat => Backend::AnalyticFlat,
            BackendKind::AnalyticVolumetric => Backend::AnalyticVolumetric,
            BackendKind::Sim => Backend::Simulated(Box::new(self.scenario)),
        }
    }
}

impl SweepSection {
    pub fn plan(&self, run_trials: u64) -> Result<SweepPlan> {
        SweepPlan::new(
            self.axis,
            self.grid.clone(),
            self.trials.unwrap_or(run_trials),
        )
    }
}
