//! Initial-condition sampling, seeded trial fan-out and probability estimates.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `SHA-256(master_seed || index)`, so a run is reproducible no matter how
//! the trials are scheduled across threads. Results are gathered in index
//! order before anything is counted or written.

use std::io::Write;
use std::time::Instant;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coin::{CoinSpec, Material, Outcome};
use crate::error::{invalid, Error, Result};
use crate::sim2d::{simulate_toss_2d, TossConfig2D};
use crate::sim3d::{simulate_toss_3d, Launch3D, TossConfig3D};

/// Closed interval `[lo, hi]`; serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(invalid(
                "interval",
                format!("expected finite lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * rng.gen::<f64>()
        }
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    #[default]
    PlanarUniform,
    SphereUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    Uniform,
}

/// Ranges for the release conditions of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    /// Release angle `phi0` for planar tosses.
    pub angle_range: Interval,
    /// Spin magnitude in rad/s.
    pub spin_range: Interval,
    /// Clearance of the lowest point at release, in m.
    pub height_range: Interval,
    /// Launch speed of the centre of mass in m/s, straight up.
    pub speed_range: Interval,
    pub orientation_mode: OrientationMode,
    pub distribution: Distribution,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self {
            angle_range: Interval {
                lo: 0.0,
                hi: std::f64::consts::PI,
            },
            spin_range: Interval {
                lo: 0.0,
                hi: 10.0 * std::f64::consts::PI,
            },
            height_range: Interval::point(0.3),
            speed_range: Interval::point(0.0),
            orientation_mode: OrientationMode::PlanarUniform,
            distribution: Distribution::Uniform,
        }
    }
}

impl SamplerSpec {
    /// The volumetric defaults: tossed up at up to 20 m/s from 5 m with up to
    /// 50 rad/s of spin about a uniformly random axis.
    pub fn volumetric() -> Self {
        Self {
            spin_range: Interval { lo: 0.0, hi: 50.0 },
            height_range: Interval::point(5.0),
            speed_range: Interval { lo: 0.0, hi: 20.0 },
            orientation_mode: OrientationMode::SphereUniform,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, r) in [
            ("sampler.angle_range", self.angle_range),
            ("sampler.spin_range", self.spin_range),
            ("sampler.height_range", self.height_range),
            ("sampler.speed_range", self.speed_range),
        ] {
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
                return Err(invalid(
                    field,
                    format!("expected finite lo <= hi, got [{}, {}]", r.lo, r.hi),
                ));
            }
        }
        if self.height_range.lo < 0.0 {
            return Err(invalid("sampler.height_range", "must be >= 0"));
        }
        if self.speed_range.lo < 0.0 || self.spin_range.lo < 0.0 {
            return Err(invalid(
                "sampler.speed_range",
                "speed and spin magnitudes must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Drawn release conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConditions {
    Planar {
        phi0: f64,
        omega0: f64,
        height: f64,
        v_vertical0: f64,
    },
    Volumetric {
        height: f64,
        /// Unit quaternion as `[w, x, y, z]`.
        orientation: [f64; 4],
        linear_velocity: [f64; 3],
        angular_velocity: [f64; 3],
    },
}

impl InitialConditions {
    pub fn launch_3d(&self) -> Option<Launch3D> {
        match *self {
            InitialConditions::Volumetric {
                height,
                orientation: [w, x, y, z],
                linear_velocity,
                angular_velocity,
            } => Some(Launch3D {
                height,
                orientation: UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z)),
                linear_velocity: linear_velocity.into(),
                angular_velocity: angular_velocity.into(),
            }),
            InitialConditions::Planar { .. } => None,
        }
    }
}

fn unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let az = std::f64::consts::TAU * rng.gen::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(s * az.cos(), s * az.sin(), z)
}

/// Uniformly distributed rotation (Shoemake's method).
fn uniform_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    ))
}

pub fn sample_initial<R: Rng>(sampler: &SamplerSpec, rng: &mut R) -> InitialConditions {
    match sampler.orientation_mode {
        OrientationMode::PlanarUniform => InitialConditions::Planar {
            phi0: sampler.angle_range.sample(rng),
            omega0: sampler.spin_range.sample(rng),
            height: sampler.height_range.sample(rng),
            v_vertical0: sampler.speed_range.sample(rng),
        },
        OrientationMode::SphereUniform => {
            let q = uniform_rotation(rng);
            let height = sampler.height_range.sample(rng);
            let v = Vector3::z() * sampler.speed_range.sample(rng);
            let w = unit_vector(rng) * sampler.spin_range.sample(rng);
            InitialConditions::Volumetric {
                height,
                orientation: [q.w, q.i, q.j, q.k],
                linear_velocity: v.into(),
                angular_velocity: w.into(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Sim2d,
    Sim3d,
}

impl std::str::FromStr for SimModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim2d" => Ok(Self::Sim2d),
            "sim3d" => Ok(Self::Sim3d),
            other => Err(invalid(
                "model",
                format!("expected `sim2d` or `sim3d`, got `{other}`"),
            )),
        }
    }
}

/// Everything a single trial needs apart from its random stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub spec: CoinSpec,
    pub material: Material,
    pub sampler: SamplerSpec,
    pub model: SimModel,
    pub sim2d: TossConfig2D,
    pub sim3d: TossConfig3D,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.material.validated()?;
        self.sampler.validate()?;
        match self.model {
            SimModel::Sim2d => self.sim2d.validate(),
            SimModel::Sim3d => self.sim3d.validate(),
        }
    }

    /// Runs one trial from fixed release conditions.
    pub fn run(&self, initial: &InitialConditions) -> Result<(Outcome, usize)> {
        match (self.model, initial) {
            (
                SimModel::Sim2d,
                &InitialConditions::Planar {
                    phi0,
                    omega0,
                    height,
                    v_vertical0,
                },
            ) => {
                let config = TossConfig2D {
                    initial_height: height,
                    phi0,
                    omega0,
                    v_vertical0,
                    ..self.sim2d
                };
                simulate_toss_2d(&self.spec, &self.material, &config)
                    .map(|r| (r.outcome, r.impacts))
            }
            (SimModel::Sim3d, ic @ InitialConditions::Volumetric { .. }) => {
                let launch = ic.launch_3d().expect("volumetric conditions");
                simulate_toss_3d(&self.spec, &self.material, &self.sim3d, &launch)
                    .map(|r| (r.outcome, r.impacts))
            }
            (SimModel::Sim2d, _) => Err(invalid(
                "sampler.orientation_mode",
                "sim2d needs planar_uniform release conditions",
            )),
            (SimModel::Sim3d, _) => Err(invalid(
                "sampler.orientation_mode",
                "sim3d needs sphere_uniform release conditions",
            )),
        }
    }
}

/// 32-byte stream key for trial `index` under `master_seed`.
pub fn trial_key(master_seed: u64, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// The per-trial seed as logged: the first eight key bytes, little-endian.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let key = trial_key(master_seed, index);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(trial_key(master_seed, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrialOutcome {
    Side,
    FaceUp,
    FaceDown,
    /// The trial hit a simulator limit and is excluded from `p_side`.
    Discarded,
}

impl From<Outcome> for TrialOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Side => Self::Side,
            Outcome::FaceUp => Self::FaceUp,
            Outcome::FaceDown => Self::FaceDown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    pub initial: InitialConditions,
    pub outcome: TrialOutcome,
    pub impacts: usize,
}

/// Runs trial `index`: draw release conditions, simulate, record.
///
/// Only simulator limits (`NonTermination`) and energy-budget failures count
/// as discarded; anything else is a configuration error and is returned.
pub fn run_trial(scenario: &Scenario, master_seed: u64, index: u64) -> Result<TrialRecord> {
    let mut rng = trial_rng(master_seed, index);
    let initial = sample_initial(&scenario.sampler, &mut rng);
    let (outcome, impacts) = match scenario.run(&initial) {
        Ok((o, n)) => (o.into(), n),
        Err(Error::NonTermination { .. } | Error::NegativeEnergyBudget { .. }) => {
            (TrialOutcome::Discarded, 0)
        }
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        index,
        seed: trial_seed(master_seed, index),
        initial,
        outcome,
        impacts,
    })
}

/// Runs `n_trials` trials on the current rayon pool, in index order.
pub fn run_trials(
    scenario: &Scenario,
    n_trials: u64,
    master_seed: u64,
) -> Result<Vec<TrialRecord>> {
    run_trial_range(scenario, master_seed, 0..n_trials)
}

/// Runs the trials with indices in `range`, so a run can be extended later.
pub fn run_trial_range(
    scenario: &Scenario,
    master_seed: u64,
    range: std::ops::Range<u64>,
) -> Result<Vec<TrialRecord>> {
    scenario.validate()?;
    range
        .into_par_iter()
        .map(|i| run_trial(scenario, master_seed, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub n_total: u64,
    pub n_side: u64,
    pub n_face_up: u64,
    pub n_face_down: u64,
    pub n_discarded: u64,
    pub p_side: f64,
    /// `p / sqrt(N)`: the `1/sqrt(N)` relative error made absolute.
    pub abs_error: f64,
    /// Binomial standard error `sqrt(p(1-p)/N)`.
    pub stderr: f64,
    pub master_seed: u64,
    pub wall_time: f64,
}

/// Binomial standard error. At `p` in `{0, 1}` the plug-in estimate is zero,
/// so the worst case `sqrt(0.25/N)` is reported instead.
pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.5;
    }
    let var = p * (1.0 - p);
    let var = if var > 0.0 { var } else { 0.25 };
    (var / n as f64).sqrt()
}

/// Counts a set of trial records.
pub fn summarize(records: &[TrialRecord], master_seed: u64, wall_time: f64) -> EstimateReport {
    let mut r = EstimateReport {
        n_total: records.len() as u64,
        n_side: 0,
        n_face_up: 0,
        n_face_down: 0,
        n_discarded: 0,
        p_side: 0.0,
        abs_error: 0.0,
        stderr: 0.5,
        master_seed,
        wall_time,
    };
    for rec in records {
        match rec.outcome {
            TrialOutcome::Side => r.n_side += 1,
            TrialOutcome::FaceUp => r.n_face_up += 1,
            TrialOutcome::FaceDown => r.n_face_down += 1,
            TrialOutcome::Discarded => r.n_discarded += 1,
        }
    }
    let n_eff = r.n_total - r.n_discarded;
    if n_eff > 0 {
        r.p_side = r.n_side as f64 / n_eff as f64;
        r.abs_error = r.p_side / (n_eff as f64).sqrt();
        r.stderr = binomial_stderr(r.p_side, n_eff);
    }
    r
}

pub fn estimate(scenario: &Scenario, n_trials: u64, master_seed: u64) -> Result<EstimateReport> {
    estimate_with_log(scenario, n_trials, master_seed).map(|(report, _)| report)
}

/// Like [`estimate`], also returning the per-trial records.
pub fn estimate_with_log(
    scenario: &Scenario,
    n_trials: u64,
    master_seed: u64,
) -> Result<(EstimateReport, Vec<TrialRecord>)> {
    if n_trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let start = Instant::now();
    let records = run_trials(scenario, n_trials, master_seed)?;
    let report = summarize(&records, master_seed, start.elapsed().as_secs_f64());
    Ok((report, records))
}

/// First line of every trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub n_trials: u64,
    pub model: SimModel,
}

impl LogHeader {
    pub const FORMAT: &'static str = "tricoin-trials";

    pub fn new(master_seed: u64, n_trials: u64, model: SimModel) -> Self {
        Self {
            format: Self::FORMAT.to_owned(),
            version: 1,
            master_seed,
            n_trials,
            model,
        }
    }
}

/// Writes the header and one JSON line per record, flushing whatever was
/// written even if a later line fails.
pub fn log_trials<W: Write>(out: W, header: &LogHeader, records: &[TrialRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let result = (|| -> Result<()> {
        write_json_line(&mut out, header)?;
        for rec in records {
            write_json_line(&mut out, rec)?;
        }
        Ok(())
    })();
    let flushed = out.flush().map_err(Error::from);
    result.and(flushed)
}

fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogLine {
    Header(LogHeader),
    Trial(TrialRecord),
}

/// Parses one line of a trial log.
pub fn parse_log_line(line: &str) -> Result<LogLine> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::Config(format!("trial log: {e}")))?;
    let parsed = if value.get("format").is_some() {
        serde_json::from_value(value).map(LogLine::Header)
    } else {
        serde_json::from_value(value).map(LogLine::Trial)
    };
    parsed.map_err(|e| Error::Config(format!("trial log: {e}")))
}

/// Reads a whole log back; the first line must be the header.
pub fn read_trial_log(text: &str) -> Result<(LogHeader, Vec<TrialRecord>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = match lines.next().map(parse_log_line).transpose()? {
        Some(LogLine::Header(h)) => h,
        _ => return Err(Error::Config("trial log: missing header line".into())),
    };
    let mut records = Vec::new();
    for line in lines {
        match parse_log_line(line)? {
            LogLine::Trial(t) => records.push(t),
            LogLine::Header(_) => return Err(Error::Config("trial log: repeated header".into())),
        }
    }
    Ok((header, records))
}
