//! Parameter sweeps and the fair-ratio search.
//!
//! The fair ratio is where `P(Side) = 1/3`. Simulated backends are noisy, so
//! each bisection step compares the midpoint estimate against the target with
//! a one-sided 3σ test and doubles the trial count when the comparison is
//! ambiguous.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{flat_probability, volumetric_probability};
use crate::coin::CoinSpec;
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{run_trial_range, summarize, EstimateReport, Scenario, TrialRecord};

pub const FAIR_TARGET: f64 = 1.0 / 3.0;
pub const DEFAULT_BRACKET: (f64, f64) = (0.2, 3.0);
const DECISION_SIGMAS: f64 = 3.0;
const MIN_SWEEP_TRIALS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    AspectRatio,
    Friction,
    Restitution,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aspect_ratio" => Ok(Self::AspectRatio),
            "friction" => Ok(Self::Friction),
            "restitution" => Ok(Self::Restitution),
            other => Err(invalid(
                "sweep.axis",
                format!("expected aspect_ratio, friction or restitution, got `{other}`"),
            )),
        }
    }
}

/// What produces `P(Side)` for a parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    AnalyticFlat,
    AnalyticVolumetric,
    Simulated(Box<Scenario>),
}

impl Backend {
    fn is_stochastic(&self) -> bool {
        matches!(self, Backend::Simulated(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub trials: u64,
}

impl SweepPlan {
    pub fn new(axis: SweepAxis, grid: Vec<f64>, trials: u64) -> Result<Self> {
        let plan = Self { axis, grid, trials };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(invalid("sweep.grid", "must not be empty"));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep.grid", "values must be finite"));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sweep.grid", "must be strictly increasing"));
        }
        if self.trials < MIN_SWEEP_TRIALS {
            return Err(invalid(
                "sweep.trials",
                format!("must be >= {MIN_SWEEP_TRIALS}, got {}", self.trials),
            ));
        }
        Ok(())
    }
}

/// Parses a grid: either comma-separated values or `start:stop:step`
/// (inclusive of `stop` up to rounding).
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| invalid("sweep.grid", format!("`{}` is not a number", s.trim())))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid("sweep.grid", "values must be finite"))
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(invalid(
                    "sweep.grid",
                    "range needs step > 0 and stop >= start",
                ));
            }
            let count = ((stop - start) / step + 1e-9).floor();
            if count > 1e6 {
                return Err(invalid(
                    "sweep.grid",
                    "range has more than a million points",
                ));
            }
            (0..=count as usize)
                .map(|i| start + step * i as f64)
                .collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(invalid(
                "sweep.grid",
                "expected `a,b,c` or `start:stop:step`",
            ))
        }
    };
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sweep.grid", "must be strictly increasing"));
    }
    if grid.is_empty() {
        return Err(invalid("sweep.grid", "must not be empty"));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    pub p_side: f64,
    pub stderr: f64,
    pub n_trials: u64,
    pub n_discarded: u64,
}

impl From<&EstimateReport> for PointEstimate {
    fn from(r: &EstimateReport) -> Self {
        Self {
            p_side: r.p_side,
            stderr: r.stderr,
            n_trials: r.n_total,
            n_discarded: r.n_discarded,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Per-point failures are kept rather than aborting the sweep.
    pub estimate: std::result::Result<PointEstimate, String>,
}

/// The scenario with one parameter replaced.
pub fn scenario_at(base: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario> {
    let mut s = *base;
    match axis {
        SweepAxis::AspectRatio => {
            s.spec = CoinSpec::with_aspect_ratio(value, base.spec.radius(), base.spec.mass())?;
        }
        SweepAxis::Friction => s.material = base.material.with_friction(value)?,
        SweepAxis::Restitution => s.material = base.material.with_restitution(value)?,
    }
    Ok(s)
}

fn analytic_point(backend: &Backend, axis: SweepAxis, value: f64) -> Result<PointEstimate> {
    if axis != SweepAxis::AspectRatio {
        return Err(invalid(
            "sweep.axis",
            "analytic backends only depend on the aspect ratio",
        ));
    }
    let p = match backend {
        Backend::AnalyticFlat => flat_probability(value)?,
        Backend::AnalyticVolumetric => volumetric_probability(value)?,
        Backend::Simulated(_) => unreachable!("analytic backend"),
    };
    Ok(PointEstimate {
        p_side: p,
        stderr: 0.0,
        n_trials: 0,
        n_discarded: 0,
    })
}

/// One estimate per grid point. Point `i` uses master seed `master_seed + i`.
pub fn run_sweep(plan: &SweepPlan, backend: &Backend, master_seed: u64) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    if !backend.is_stochastic() && plan.axis != SweepAxis::AspectRatio {
        return Err(invalid(
            "sweep.axis",
            "analytic backends only depend on the aspect ratio",
        ));
    }
    let rows = plan
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let estimate = match backend {
                Backend::Simulated(base) => scenario_at(base, plan.axis, value).and_then(|s| {
                    let seed = master_seed.wrapping_add(i as u64);
                    let records = run_trial_range(&s, seed, 0..plan.trials)?;
                    Ok(PointEstimate::from(&summarize(&records, seed, 0.0)))
                }),
                _ => analytic_point(backend, plan.axis, value),
            };
            SweepRow {
                value,
                estimate: estimate.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "value,p_side,stderr,n_trials,n_discarded";

/// Writes the sweep table; failed points keep their value and leave the
/// estimate columns empty.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        match &row.estimate {
            Ok(e) => writeln!(
                out,
                "{},{},{},{},{}",
                row.value, e.p_side, e.stderr, e.n_trials, e.n_discarded
            )?,
            Err(_) => writeln!(out, "{},,,0,0", row.value)?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Indices `i` where the estimate drops from point `i` to `i + 1` by more
/// than three combined standard errors.
pub fn audit_monotone(rows: &[SweepRow]) -> Vec<usize> {
    rows.windows(2)
        .enumerate()
        .filter_map(|(i, w)| match (&w[0].estimate, &w[1].estimate) {
            (Ok(a), Ok(b)) => {
                let band = DECISION_SIGMAS * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
                (a.p_side - b.p_side > band).then_some(i)
            }
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairOptions {
    /// Target bracket half-width.
    pub tolerance: f64,
    /// Trials per evaluation before any doubling.
    pub trials: u64,
    /// Cap for the doubling of an ambiguous evaluation.
    pub max_trials: u64,
    pub bracket: (f64, f64),
}

impl Default for FairOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            trials: 4000,
            max_trials: 64_000,
            bracket: DEFAULT_BRACKET,
        }
    }
}

impl FairOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(invalid("fair.tolerance", "must be finite and > 0"));
        }
        if self.trials == 0 || self.max_trials < self.trials {
            return Err(invalid(
                "fair.trials",
                "need trials >= 1 and max_trials >= trials",
            ));
        }
        let (lo, hi) = self.bracket;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(invalid("fair.bracket", "need 0 <= lo < hi"));
        }
        Ok(())
    }
}

/// One `P(Side)` evaluation made during the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub ratio: f64,
    pub p_side: f64,
    pub stderr: f64,
    pub n_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairRatioResult {
    pub ratio: f64,
    pub half_width: f64,
    pub iterations: usize,
    pub evaluations: Vec<Evaluation>,
}

struct Evaluator<'a> {
    backend: &'a Backend,
    options: &'a FairOptions,
    master_seed: u64,
    calls: u64,
    evaluations: Vec<Evaluation>,
}

enum Comparison {
    Below,
    Above,
    /// Within noise of the target even at the trial cap.
    Ambiguous(Evaluation),
}

impl Evaluator<'_> {
    fn next_seed(&mut self) -> u64 {
        let seed = self.master_seed.wrapping_add(self.calls);
        self.calls += 1;
        seed
    }

    /// Compares `P(ratio)` with the target, adding trials while ambiguous.
    fn compare(&mut self, ratio: f64) -> Result<Comparison> {
        let base = match self.backend {
            Backend::AnalyticFlat | Backend::AnalyticVolumetric => {
                let p = analytic_point(self.backend, SweepAxis::AspectRatio, ratio)?.p_side;
                self.evaluations.push(Evaluation {
                    ratio,
                    p_side: p,
                    stderr: 0.0,
                    n_trials: 0,
                });
                return Ok(if p < FAIR_TARGET {
                    Comparison::Below
                } else {
                    Comparison::Above
                });
            }
            Backend::Simulated(base) => base,
        };
        let scenario = scenario_at(base, SweepAxis::AspectRatio, ratio)?;
        let seed = self.next_seed();
        let mut records: Vec<TrialRecord> = Vec::new();
        let mut n = self.options.trials;
        loop {
            let start = records.len() as u64;
            records.extend(run_trial_range(&scenario, seed, start..n)?);
            let r = summarize(&records, seed, 0.0);
            let eval = Evaluation {
                ratio,
                p_side: r.p_side,
                stderr: r.stderr,
                n_trials: r.n_total,
            };
            let z = (r.p_side - FAIR_TARGET) / r.stderr;
            if z <= -DECISION_SIGMAS || z >= DECISION_SIGMAS || n * 2 > self.options.max_trials {
                self.evaluations.push(eval);
                return Ok(if z <= -DECISION_SIGMAS {
                    Comparison::Below
                } else if z >= DECISION_SIGMAS {
                    Comparison::Above
                } else {
                    Comparison::Ambiguous(eval)
                });
            }
            n *= 2;
        }
    }
}

/// Bisects the bracket for `P(Side) = 1/3`.
///
/// Stops when the bracket half-width reaches `tolerance`, or when a midpoint
/// stays within noise of the target at `max_trials`: the root is then taken
/// at that midpoint with a half-width of `3σ / slope`, the slope coming from
/// the estimates at the current bracket ends. If that noise half-width
/// exceeds `tolerance` the search fails with [`Error::NoiseFloor`].
pub fn find_fair_ratio(
    backend: &Backend,
    options: &FairOptions,
    master_seed: u64,
) -> Result<FairRatioResult> {
    options.validate()?;
    if let Backend::Simulated(s) = backend {
        s.validate()?;
    }
    let mut eval = Evaluator {
        backend,
        options,
        master_seed,
        calls: 0,
        evaluations: Vec::new(),
    };
    let (mut lo, mut hi) = options.bracket;

    let lo_side = eval.compare(lo)?;
    let p_lo_eval = *eval.evaluations.last().expect("evaluated");
    let hi_side = eval.compare(hi)?;
    let p_hi_eval = *eval.evaluations.last().expect("evaluated");
    if !matches!(lo_side, Comparison::Below) || !matches!(hi_side, Comparison::Above) {
        return Err(Error::BracketFailure {
            target: FAIR_TARGET,
            lo,
            hi,
            p_lo: p_lo_eval.p_side,
            p_hi: p_hi_eval.p_side,
        });
    }
    let (mut p_lo, mut p_hi) = (p_lo_eval.p_side, p_hi_eval.p_side);

    let mut iterations = 0;
    while 0.5 * (hi - lo) > options.tolerance {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match eval.compare(mid)? {
            Comparison::Below => {
                lo = mid;
                p_lo = eval.evaluations.last().expect("evaluated").p_side;
            }
            Comparison::Above => {
                hi = mid;
                p_hi = eval.evaluations.last().expect("evaluated").p_side;
            }
            Comparison::Ambiguous(e) => {
                let slope = (p_hi - p_lo) / (hi - lo);
                let noise = if slope > 0.0 {
                    (DECISION_SIGMAS * e.stderr / slope).min(0.5 * (hi - lo))
                } else {
                    0.5 * (hi - lo)
                };
                if noise > options.tolerance {
                    return Err(Error::NoiseFloor {
                        requested: options.tolerance,
                        achievable: noise,
                        ratio: mid,
                    });
                }
                return Ok(FairRatioResult {
                    ratio: mid,
                    half_width: noise,
                    iterations,
                    evaluations: eval.evaluations,
                });
            }
        }
    }
    Ok(FairRatioResult {
        ratio: 0.5 * (lo + hi),
        half_width: 0.5 * (hi - lo),
        iterations,
        evaluations: eval.evaluations,
    })
}
