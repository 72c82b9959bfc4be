//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release -p tricoin --test acceptance -- 3 7` runs a subset.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;

use tricoin::analytic::{fair_ratio, flat_probability, volumetric_probability, AnalyticModel};
use tricoin::config::model_defaults;
use tricoin::impact::{harmonic_impulse, ContactSide, ImpactInput, ImpactModel};
use tricoin::montecarlo::{
    estimate, estimate_with_log, log_trials, run_trial, EstimateReport, Interval, LogHeader,
    Scenario, SimModel,
};
use tricoin::sim2d::TossConfig2D;
use tricoin::sim3d::{
    angular_momentum, propagate_flight, simulate_toss_3d_logged, TossConfig3D, TossState3D,
};
use tricoin::sweep::{find_fair_ratio, Backend, FairOptions, DEFAULT_BRACKET};
use tricoin::{CoinSpec, Material};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn scenario(model: SimModel) -> Scenario {
    let (spec, material, sampler) = model_defaults(model);
    Scenario {
        spec,
        material,
        sampler,
        model,
        sim2d: TossConfig2D::default(),
        sim3d: TossConfig3D::default(),
    }
}

fn with_ratio(mut s: Scenario, ratio: f64) -> Scenario {
    s.spec = CoinSpec::with_aspect_ratio(ratio, s.spec.radius(), s.spec.mass()).unwrap();
    s
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn combined(a: &EstimateReport, b: &EstimateReport) -> f64 {
    (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let ratio = fair_ratio(AnalyticModel::Flat);
    let p2 = flat_probability(2.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let expected = 2.0 * (PI / 6.0).tan();
    let pass = (ratio - expected).abs() < 1e-9 && (p2 - 0.5).abs() < 1e-9 && elapsed < 1e-3;
    verdict(
        pass,
        format!("fair ratio {ratio:.9} (expect {expected:.9}), P(2) = {p2}, {elapsed:.2e} s"),
    )
}

fn criterion_2() -> Verdict {
    let ratio = fair_ratio(AnalyticModel::Volumetric);
    let p = volumetric_probability(ratio).unwrap();
    verdict(
        (ratio - FRAC_1_SQRT_2).abs() < 1e-9,
        format!("fair ratio {ratio:.9} (expect {FRAC_1_SQRT_2:.9}), P there {p:.9}"),
    )
}

/// Estimates at each ratio against an analytic formula, within 3σ.
fn inelastic_sweep(
    base: Scenario,
    ratios: &[f64],
    n: u64,
    seed: u64,
    oracle: fn(f64) -> tricoin::Result<f64>,
) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, &ratio) in ratios.iter().enumerate() {
        let r = estimate(&with_ratio(base, ratio), n, seed + i as u64).unwrap();
        let p = oracle(ratio).unwrap();
        let n_eff = r.n_total - r.n_discarded;
        let z = (r.p_side - p) / sigma(p, n_eff);
        pass &= z.abs() <= 3.0 && r.n_discarded == 0;
        parts.push(format!(
            "{ratio}: {:.4} vs {p:.4} (z {z:+.2}, discarded {})",
            r.p_side, r.n_discarded
        ));
    }
    (pass, parts.join("; "))
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut base = scenario(SimModel::Sim2d);
    base.material = Material::new(0.0, base.material.friction, 0.0).unwrap();
    // Without spin the pose at touchdown is as uniform as the release angle.
    base.sampler.spin_range = Interval::point(0.0);
    let (pass, detail) =
        inelastic_sweep(base, &[0.5, 1.0, 1.5, 2.0], 100_000, 300, flat_probability);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(pass && elapsed < 120.0, format!("{detail}; {elapsed:.1} s"))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut base = scenario(SimModel::Sim3d);
    base.material = Material::new(0.0, base.material.friction, 0.0).unwrap();
    // Released at rest just touching the ground in a uniformly random pose.
    base.sampler.height_range = Interval::point(0.0);
    base.sampler.speed_range = Interval::point(0.0);
    base.sampler.spin_range = Interval::point(0.0);
    let (pass, detail) = inelastic_sweep(
        base,
        &[0.4, FRAC_1_SQRT_2, 1.0, 2.0],
        100_000,
        400,
        volumetric_probability,
    );
    let elapsed = start.elapsed().as_secs_f64();
    verdict(pass && elapsed < 600.0, format!("{detail}; {elapsed:.1} s"))
}

fn fair_line(
    name: &str,
    backend: &Backend,
    options: &FairOptions,
    seed: u64,
    band: (f64, f64),
) -> (bool, String) {
    match find_fair_ratio(backend, options, seed) {
        Ok(r) => (
            (band.0..=band.1).contains(&r.ratio),
            format!(
                "{name} H/R = {:.3} ± {:.3} (band [{}, {}], {} evaluations)",
                r.ratio,
                r.half_width,
                band.0,
                band.1,
                r.evaluations.len()
            ),
        ),
        Err(e) => (false, format!("{name} failed: {e}")),
    }
}

fn describe(s: &Scenario) -> String {
    format!(
        "R {} m, m {} kg, k {}, mu {}, eta {:e} N s",
        s.spec.radius(),
        s.spec.mass(),
        s.material.restitution,
        s.material.friction,
        s.material.eta()
    )
}

fn criterion_5() -> Verdict {
    let planar = scenario(SimModel::Sim2d);
    let (pass_2d, line_2d) = fair_line(
        "sim2d",
        &Backend::Simulated(Box::new(planar)),
        &FairOptions {
            tolerance: 0.05,
            trials: 4000,
            max_trials: 64_000,
            bracket: DEFAULT_BRACKET,
        },
        500,
        (1.4, 1.6),
    );
    let volumetric = scenario(SimModel::Sim3d);
    let (pass_3d, line_3d) = fair_line(
        "sim3d",
        &Backend::Simulated(Box::new(volumetric)),
        &FairOptions {
            tolerance: 0.05,
            trials: 2000,
            max_trials: 16_000,
            bracket: DEFAULT_BRACKET,
        },
        510,
        (0.7, 0.9),
    );
    verdict(
        pass_2d && pass_3d,
        format!(
            "{line_2d} [calibration: {}]; {line_3d} [calibration: {}]",
            describe(&planar),
            describe(&volumetric)
        ),
    )
}

/// P(side) must not rise along `values` by more than 2 combined σ.
fn non_increasing(label: &str, values: &[f64], estimates: &[EstimateReport]) -> (bool, String) {
    let mut pass = true;
    for w in estimates.windows(2) {
        pass &= w[1].p_side - w[0].p_side <= 2.0 * combined(&w[0], &w[1]);
    }
    let parts: Vec<String> = values
        .iter()
        .zip(estimates)
        .map(|(v, e)| format!("{v}: {:.4} ± {:.4}", e.p_side, e.stderr))
        .collect();
    (pass, format!("{label} {}", parts.join(", ")))
}

fn criterion_6() -> Verdict {
    let n = 50_000;
    let ks = [0.0, 0.3, 0.6];
    let planar = scenario(SimModel::Sim2d);
    let by_k: Vec<EstimateReport> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut s = planar;
            s.material = s.material.with_restitution(k).unwrap();
            estimate(&s, n, 600 + i as u64).unwrap()
        })
        .collect();
    let (pass_k, line_k) = non_increasing("sim2d over k", &ks, &by_k);

    let mus = [0.1, 0.5, 1.0];
    let volumetric = scenario(SimModel::Sim3d);
    let by_mu: Vec<EstimateReport> = mus
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let mut s = volumetric;
            s.material = s.material.with_friction(mu).unwrap();
            estimate(&s, n, 610 + i as u64).unwrap()
        })
        .collect();
    let (pass_mu, line_mu) = non_increasing("sim3d over mu", &mus, &by_mu);
    verdict(pass_k && pass_mu, format!("{line_k}; {line_mu}"))
}

fn criterion_7() -> Verdict {
    // The impulse scale is held per unit mass, as a Hertz impact gives.
    let base = scenario(SimModel::Sim2d);
    let scales = [0.5, 1.0, 2.0];
    let estimates: Vec<EstimateReport> = scales
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let mut s = base;
            s.spec = s.spec.with_mass(f * base.spec.mass()).unwrap();
            s.material = s.material.with_eta(f * base.material.eta()).unwrap();
            estimate(&s, 50_000, 700 + i as u64).unwrap()
        })
        .collect();
    let mut pass = true;
    for i in 0..3 {
        for j in i + 1..3 {
            let d = (estimates[i].p_side - estimates[j].p_side).abs();
            pass &= d <= 2.0 * combined(&estimates[i], &estimates[j]);
        }
    }
    let parts: Vec<String> = scales
        .iter()
        .zip(&estimates)
        .map(|(f, e)| format!("{f}x: {:.4} ± {:.4}", e.p_side, e.stderr))
        .collect();
    verdict(pass, parts.join(", "))
}

fn criterion_8() -> Verdict {
    let base = scenario(SimModel::Sim2d);
    let n = 10_000;
    let ps: Vec<f64> = (0..50u64)
        .map(|seed| estimate(&base, n, 8000 + seed).unwrap().p_side)
        .collect();
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    let var = ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (ps.len() - 1) as f64;
    let ratio = var.sqrt() / sigma(mean, n);
    verdict(
        (0.7..=1.3).contains(&ratio),
        format!(
            "mean p {mean:.4}, std {:.5}, binomial {:.5}, ratio {ratio:.3}",
            var.sqrt(),
            sigma(mean, n)
        ),
    )
}

fn criterion_9() -> Verdict {
    // Trapezoid quadrature of N_max·sin(πt/τ).
    let (peak, tau) = (37.0, 1.3e-3);
    let steps = 200_000;
    let h = tau / steps as f64;
    let integral: f64 = (0..=steps)
        .map(|i| {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * peak * (PI * i as f64 * h / tau).sin()
        })
        .sum::<f64>()
        * h;
    let closed = harmonic_impulse(peak, tau).unwrap();
    let quad_ok = ((closed - integral) / integral).abs() < 1e-10;

    let spec = CoinSpec::new(0.015, 0.01, 0.005).unwrap();
    let material = Material::new(0.4, 0.5, 0.0).unwrap();
    let model = ImpactModel::default();
    let h1 = 0.3;
    let input = ImpactInput {
        incoming_speed: (2.0 * model.gravity * h1).sqrt(),
        incoming_omega: 12.0,
        tilt: 0.4,
        contact_side: ContactSide::Leading,
    };
    let r = model.rebound(&input, &spec, &material, h1).unwrap();
    let collapse_ok =
        r.outgoing_omega == input.incoming_omega && (r.next_apex - 0.4 * h1).abs() < 1e-15;

    let kicked = Material::new(0.4, 0.5, 2e-4).unwrap();
    let lead = model.delta_omega(&kicked, &spec, 0.4, ContactSide::Leading);
    let trail = model.delta_omega(&kicked, &spec, 0.4, ContactSide::Trailing);
    let sign_ok = lead > 0.0 && trail == -lead;

    verdict(
        quad_ok && collapse_ok && sign_ok,
        format!(
            "impulse {closed:.12e} vs quadrature {integral:.12e}; h3 = {:.15} for k·h1 = {:.15}; delta omega {lead:+.4} / {trail:+.4}",
            r.next_apex,
            0.4 * h1
        ),
    )
}

fn criterion_10() -> Verdict {
    // Quaternion norm over a million flight steps.
    let spec = CoinSpec::with_aspect_ratio(0.8, 0.5, 1.0).unwrap();
    let mut state = TossState3D {
        position: Vector3::new(0.0, 0.0, 1e9),
        orientation: UnitQuaternion::from_euler_angles(0.3, -1.1, 0.7),
        linear_velocity: Vector3::zeros(),
        angular_velocity: Vector3::new(13.0, -29.0, 41.0),
    };
    let l0 = angular_momentum(&state, &spec);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..1_000_000 {
        state = propagate_flight(&state, &spec, 1e-3, 0.0);
        worst_norm = worst_norm.max((state.orientation.quaternion().norm() - 1.0).abs());
    }
    let long_drift = (angular_momentum(&state, &spec) - l0).norm() / l0.norm();

    // Contact-law audit over a logged run.
    let s = scenario(SimModel::Sim3d);
    let audits: Vec<(usize, usize, f64, usize)> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = tricoin::montecarlo::trial_rng(1000, i);
            let initial = tricoin::montecarlo::sample_initial(&s.sampler, &mut rng);
            let launch = initial.launch_3d().unwrap();
            let Ok(report) = simulate_toss_3d_logged(&s.spec, &s.material, &s.sim3d, &launch, true)
            else {
                return (0, 0, 0.0, 1);
            };
            let log = report.log.unwrap();
            let mut bad = 0;
            for rec in &log.impulses {
                let cone = rec.tangential_impulse
                    <= rec.friction * rec.normal_impulse * (1.0 + 1e-9) + 1e-12;
                let bound = rec.normal_velocity_after
                    <= rec.restitution * -rec.normal_velocity_before + 1e-9;
                if !(cone && bound && rec.normal_impulse >= 0.0) {
                    bad += 1;
                }
            }
            let drift = log
                .flights
                .iter()
                .map(|f| {
                    let b = Vector3::from(f.momentum_before);
                    let a = Vector3::from(f.momentum_after);
                    if b.norm() > 1e-9 {
                        (a - b).norm() / b.norm()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            (log.impulses.len(), bad, drift, 0)
        })
        .collect();
    let impulses: usize = audits.iter().map(|a| a.0).sum();
    let violations: usize = audits.iter().map(|a| a.1).sum();
    let flight_drift = audits.iter().map(|a| a.2).fold(0.0, f64::max);
    let discarded: usize = audits.iter().map(|a| a.3).sum();

    let pass = worst_norm < 1e-9 && long_drift < 1e-6 && flight_drift < 1e-6 && violations == 0;
    verdict(
        pass,
        format!(
            "quaternion drift {worst_norm:.1e}, momentum drift {long_drift:.1e} over 1e6 steps, worst flight {flight_drift:.1e}; {violations} of {impulses} impulses break the contact law ({discarded} trials discarded)"
        ),
    )
}

fn log_bytes(s: &Scenario, n: u64, seed: u64, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    let (_, records) = pool.install(|| estimate_with_log(s, n, seed)).unwrap();
    let mut out = Vec::new();
    log_trials(&mut out, &LogHeader::new(seed, n, s.model), &records).unwrap();
    out
}

fn criterion_11() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (model, n) in [(SimModel::Sim2d, 5000), (SimModel::Sim3d, 300)] {
        let s = scenario(model);
        let a = log_bytes(&s, n, 1100, 1);
        let b = log_bytes(&s, n, 1100, 4);
        let c = log_bytes(&s, n, 1100, 1);
        let same = a == b && a == c;
        // Spot-check that a single trial reruns identically on its own.
        let lone = run_trial(&s, 1100, n / 2).unwrap();
        let line = String::from_utf8(a.clone()).unwrap();
        let logged = line.lines().nth(1 + (n / 2) as usize).unwrap().to_owned();
        let same_lone = serde_json_line(&lone) == logged;
        pass &= same && same_lone;
        parts.push(format!(
            "{model:?}: {} bytes, identical {}",
            a.len(),
            same && same_lone
        ));
    }
    verdict(pass, parts.join("; "))
}

fn serde_json_line(record: &tricoin::montecarlo::TrialRecord) -> String {
    let mut out = Vec::new();
    let header = LogHeader::new(0, 0, SimModel::Sim2d);
    log_trials(&mut out, &header, std::slice::from_ref(record)).unwrap();
    String::from_utf8(out)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_owned()
}

fn main() {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(usize, fn() -> Verdict); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        failed += usize::from(!v.pass);
        println!(
            "criterion {id:>2}: {} ({:.1} s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
