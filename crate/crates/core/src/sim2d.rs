//! Flat-rotation toss simulator.
//!
//! The coin is reduced to its `2R × H` cross-section tumbling about a single
//! diameter. Flight between impacts is solved in closed form (ballistic
//! centre of mass, constant spin). Contacts are located by stepping the
//! lowest corner and bisecting the crossing time; each contact is resolved
//! with [`ImpactModel::rebound`]. The trial ends once the mechanical energy
//! drops below a fixed fraction of its initial value, and the final tilt is
//! snapped to a rest pose with [`classify_rest_2d`].
//!
//! Sign conventions: `phi` is the angle of the symmetry axis from vertical,
//! positive towards `+x`; `omega = dphi/dt`.

use serde::{Deserialize, Serialize};

use crate::coin::{is_side_tilt, CoinSpec, Material, Outcome, STANDARD_GRAVITY};
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};
use crate::impact::{ContactSide, ImpactInput, ImpactModel, LeverArm};

const CONTACT_TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TossState2D {
    pub com_height: f64,
    pub com_horizontal: f64,
    pub phi: f64,
    pub v_vertical: f64,
    pub v_horizontal: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TossConfig2D {
    /// Clearance of the lowest corner above the ground at release.
    pub initial_height: f64,
    pub phi0: f64,
    pub omega0: f64,
    /// Initial vertical velocity of the centre of mass (up positive).
    pub v_vertical0: f64,
    pub v_horizontal0: f64,
    pub energy_stop_fraction: f64,
    pub max_impacts: usize,
    /// Step used to scan for the next contact near the ground.
    pub timestep: f64,
    pub gravity: f64,
    pub lever: LeverArm,
    pub settle: SettleRule,
}

/// How the rest pose is chosen once the energy stop fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettleRule {
    /// Classify the tilt at the last impact.
    Snap,
    /// Let the residual energy pivot the coin over rim corners, losing the
    /// restitution share of its kinetic energy on every flat landing.
    #[default]
    Rocking,
}

impl std::str::FromStr for SettleRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snap" => Ok(Self::Snap),
            "rocking" => Ok(Self::Rocking),
            other => Err(invalid(
                "settle",
                format!("expected `snap` or `rocking`, got `{other}`"),
            )),
        }
    }
}

impl Default for TossConfig2D {
    fn default() -> Self {
        Self {
            initial_height: 1.0,
            phi0: 0.0,
            omega0: 0.0,
            v_vertical0: 0.0,
            v_horizontal0: 0.0,
            energy_stop_fraction: 0.01,
            max_impacts: 10_000,
            timestep: 1e-4,
            gravity: STANDARD_GRAVITY,
            lever: LeverArm::Height,
            settle: SettleRule::Rocking,
        }
    }
}

impl TossConfig2D {
    pub fn validate(&self) -> Result<()> {
        require_non_negative("sim2d.initial_height", self.initial_height)?;
        for (field, v) in [
            ("sim2d.phi0", self.phi0),
            ("sim2d.omega0", self.omega0),
            ("sim2d.v_vertical0", self.v_vertical0),
            ("sim2d.v_horizontal0", self.v_horizontal0),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(self.energy_stop_fraction > 0.0 && self.energy_stop_fraction < 1.0) {
            return Err(invalid(
                "sim2d.energy_stop_fraction",
                format!("must lie in (0, 1), got {}", self.energy_stop_fraction),
            ));
        }
        if self.max_impacts == 0 {
            return Err(invalid("sim2d.max_impacts", "must be >= 1"));
        }
        require_positive("sim2d.timestep", self.timestep)?;
        require_positive("sim2d.gravity", self.gravity)?;
        Ok(())
    }

    fn impact_model(&self) -> ImpactModel {
        ImpactModel {
            lever: self.lever,
            gravity: self.gravity,
        }
    }
}

/// One of the four corners of the cross-section, by body-frame signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerId {
    /// `+1` or `-1` along the face direction.
    pub across: i8,
    /// `+1` or `-1` along the symmetry axis.
    pub along: i8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub height: f64,
    /// Horizontal position relative to the centre of mass.
    pub offset: f64,
    pub id: CornerId,
}

fn corner(state: &TossState2D, spec: &CoinSpec, id: CornerId) -> Corner {
    let (s, c) = state.phi.sin_cos();
    let a = f64::from(id.across) * spec.radius();
    let b = f64::from(id.along) * 0.5 * spec.height();
    Corner {
        height: state.com_height - a * s + b * c,
        offset: a * c + b * s,
        id,
    }
}

/// Lower of the cross-section corners.
pub fn lowest_corner(state: &TossState2D, spec: &CoinSpec) -> Corner {
    let (s, c) = state.phi.sin_cos();
    let id = CornerId {
        across: if s >= 0.0 { 1 } else { -1 },
        along: if c >= 0.0 { -1 } else { 1 },
    };
    corner(state, spec, id)
}

/// Height of the lowest corner, `y - (H/2)|cosφ| - R|sinφ|`.
fn lowest_height(state: &TossState2D, spec: &CoinSpec) -> f64 {
    let (s, c) = state.phi.sin_cos();
    state.com_height - 0.5 * spec.height() * c.abs() - spec.radius() * s.abs()
}

/// Torque-free ballistic flight over `dt`, exact.
pub fn step_flight(state: &TossState2D, dt: f64, gravity: f64) -> TossState2D {
    TossState2D {
        com_height: state.com_height + state.v_vertical * dt - 0.5 * gravity * dt * dt,
        com_horizontal: state.com_horizontal + state.v_horizontal * dt,
        phi: state.phi + state.omega * dt,
        v_vertical: state.v_vertical - gravity * dt,
        v_horizontal: state.v_horizontal,
        omega: state.omega,
    }
}

/// Folded angle between the symmetry axis and vertical, in `[0, π/2]`.
pub fn tilt_of(phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    s.abs().atan2(c.abs())
}

/// Rest pose for a settled coin.
///
/// `Side` iff `tan(tilt) > 2R/H`; ties within `1e-9` go to `Side`. Otherwise
/// `FaceDown` when the axis points up (`cosφ > 0`), `FaceUp` when it points
/// down.
pub fn classify_rest_2d(phi: f64, spec: &CoinSpec) -> Outcome {
    if is_side_tilt(tilt_of(phi), spec) {
        Outcome::Side
    } else if phi.cos() >= 0.0 {
        Outcome::FaceDown
    } else {
        Outcome::FaceUp
    }
}

/// Rest pose reached from a state whose lowest corner touches the ground.
///
/// The coin pivots about rim corners in the sense of its spin. Pivoting is
/// conservative; each time a face or the lateral line lands flat, the kinetic
/// energy above that well is multiplied by `restitution`. The coin leaves a
/// well only if its energy clears the balance height `sqrt(R² + H²/4)`, which
/// is the same on both sides of every well.
pub fn settle_rocking(
    state: &TossState2D,
    spec: &CoinSpec,
    restitution: f64,
    gravity: f64,
) -> Outcome {
    use std::f64::consts::{FRAC_PI_2, TAU};

    let m = spec.mass();
    let inertia = spec.inertia().transverse;
    let beta = spec.balance_tilt();
    let barrier = m * gravity * spec.half_diagonal();
    let well_floor = |sector: i64| {
        if sector.rem_euclid(2) == 0 {
            0.5 * spec.height()
        } else {
            spec.radius()
        }
    };
    // Sector n is centred on n·π/2; even sectors are faces.
    let sector_of = |phi: f64| -> i64 {
        let p = phi.rem_euclid(TAU);
        let mut n = (p / FRAC_PI_2).round() as i64;
        let centre = n as f64 * FRAC_PI_2;
        let half = if n.rem_euclid(2) == 0 {
            beta
        } else {
            FRAC_PI_2 - beta
        };
        if (p - centre).abs() > half + 1e-12 {
            n += if p > centre { 1 } else { -1 };
        }
        n
    };

    let phi = state.phi.rem_euclid(TAU);
    let mut sector = sector_of(phi);
    let offset = phi - sector as f64 * FRAC_PI_2;
    let height = 0.5 * spec.height() * phi.cos().abs() + spec.radius() * phi.sin().abs();
    let mut energy = 0.5 * m * state.v_vertical * state.v_vertical
        + 0.5 * inertia * state.omega * state.omega
        + m * gravity * height;

    let direction = if state.omega > 0.0 {
        1.0
    } else if state.omega < 0.0 {
        -1.0
    } else {
        -offset.signum()
    };
    // Swinging back towards the floor of the current well lands it first.
    if direction * offset <= 0.0 {
        let floor = m * gravity * well_floor(sector);
        energy = floor + restitution * (energy - floor);
    }
    // Bounded for restitution = 1, where the coin would roll forever.
    for _ in 0..10_000 {
        if energy <= barrier {
            break;
        }
        sector += direction as i64;
        let floor = m * gravity * well_floor(sector);
        energy = floor + restitution * (energy - floor);
    }
    match sector.rem_euclid(4) {
        0 => Outcome::FaceDown,
        2 => Outcome::FaceUp,
        _ => Outcome::Side,
    }
}

/// Energy in the frame co-moving with the (conserved) horizontal velocity,
/// with potential measured from the lowest corner touching the ground.
pub fn mechanical_energy(state: &TossState2D, spec: &CoinSpec, gravity: f64) -> f64 {
    let m = spec.mass();
    let i = spec.inertia().transverse;
    0.5 * m * state.v_vertical * state.v_vertical
        + 0.5 * i * state.omega * state.omega
        + m * gravity * lowest_height(state, spec).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactRecord2D {
    pub time: f64,
    pub tilt: f64,
    pub side: Option<ContactSide>,
    pub energy_before: f64,
    pub energy_after: f64,
    pub budget_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub height: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub duration: f64,
    pub final_phi: f64,
    pub final_energy_fraction: f64,
    pub max_com_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TossReport2D {
    pub outcome: Outcome,
    pub impacts: usize,
    pub summary: TrajectorySummary,
    pub impact_log: Vec<ImpactRecord2D>,
    pub trajectory: Vec<TrajectoryPoint>,
}

/// What to keep while a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recording {
    pub impacts: bool,
    pub trajectory: bool,
}

/// Initial state for a config: the lowest corner sits `initial_height` above
/// the ground.
pub fn initial_state(spec: &CoinSpec, config: &TossConfig2D) -> TossState2D {
    let mut state = TossState2D {
        com_height: 0.0,
        com_horizontal: 0.0,
        phi: config.phi0,
        v_vertical: config.v_vertical0,
        v_horizontal: config.v_horizontal0,
        omega: config.omega0,
    };
    state.com_height = config.initial_height - lowest_height(&state, spec);
    state
}

pub fn simulate_toss_2d(
    spec: &CoinSpec,
    material: &Material,
    config: &TossConfig2D,
) -> Result<TossReport2D> {
    simulate_toss_2d_recorded(spec, material, config, Recording::default())
}

pub fn simulate_toss_2d_recorded(
    spec: &CoinSpec,
    material: &Material,
    config: &TossConfig2D,
    recording: Recording,
) -> Result<TossReport2D> {
    config.validate()?;
    let material = material.validated()?;
    let mut sim = Flight {
        spec,
        material: &material,
        config,
        model: config.impact_model(),
        state: initial_state(spec, config),
        time: 0.0,
        max_com_height: 0.0,
        trajectory: Vec::new(),
        recording,
    };
    sim.max_com_height = sim.state.com_height;
    sim.record_point();

    let g = config.gravity;
    let e0 = mechanical_energy(&sim.state, spec, g);
    let stop = config.energy_stop_fraction * e0;
    let mut impacts = 0usize;
    let mut impact_log = Vec::new();

    let mut energy = e0;
    while energy > stop {
        if impacts >= config.max_impacts {
            return Err(Error::NonTermination {
                limit: config.max_impacts,
            });
        }
        sim.fly_to_contact();
        let before = mechanical_energy(&sim.state, spec, g);
        let (side, clamped) = sim.resolve_impact();
        impacts += 1;
        energy = mechanical_energy(&sim.state, spec, g);
        if recording.impacts {
            impact_log.push(ImpactRecord2D {
                time: sim.time,
                tilt: tilt_of(sim.state.phi),
                side,
                energy_before: before,
                energy_after: energy,
                budget_clamped: clamped,
            });
        }
    }

    let phi = sim.state.phi;
    let outcome = match config.settle {
        SettleRule::Snap => classify_rest_2d(phi, spec),
        SettleRule::Rocking => settle_rocking(&sim.state, spec, material.restitution, g),
    };
    Ok(TossReport2D {
        outcome,
        impacts,
        summary: TrajectorySummary {
            duration: sim.time,
            final_phi: phi,
            final_energy_fraction: if e0 > 0.0 { energy / e0 } else { 0.0 },
            max_com_height: sim.max_com_height,
        },
        impact_log,
        trajectory: sim.trajectory,
    })
}

struct Flight<'a> {
    spec: &'a CoinSpec,
    material: &'a Material,
    config: &'a TossConfig2D,
    model: ImpactModel,
    state: TossState2D,
    time: f64,
    max_com_height: f64,
    trajectory: Vec<TrajectoryPoint>,
    recording: Recording,
}

impl Flight<'_> {
    fn record_point(&mut self) {
        if self.recording.trajectory {
            self.trajectory.push(TrajectoryPoint {
                time: self.time,
                height: self.state.com_height,
                phi: self.state.phi,
            });
        }
    }

    fn advance(&mut self, dt: f64) {
        let g = self.config.gravity;
        let t_apex = self.state.v_vertical / g;
        if t_apex > 0.0 && t_apex < dt {
            let apex = step_flight(&self.state, t_apex, g).com_height;
            self.max_com_height = self.max_com_height.max(apex);
        }
        self.state = step_flight(&self.state, dt, g);
        self.time += dt;
        self.max_com_height = self.max_com_height.max(self.state.com_height);
    }

    /// Flies until the lowest corner reaches the ground while moving down.
    fn fly_to_contact(&mut self) {
        let g = self.config.gravity;
        let reach = self.spec.half_diagonal();
        let dt = self.config.timestep;

        loop {
            // No corner can touch while the centre of mass is above the
            // circumscribed circle; jump straight to that crossing.
            let above = self.state.com_height - reach;
            if above > 0.0 {
                let v = self.state.v_vertical;
                let t_cross = (v + (v * v + 2.0 * g * above).sqrt()) / g;
                if t_cross > dt {
                    self.advance(t_cross - dt);
                    self.record_point();
                }
            }

            let start = self.state;
            let next = step_flight(&start, dt, g);
            if lowest_height(&next, self.spec) <= 0.0 {
                let mut lo = 0.0;
                let mut hi = dt;
                while hi - lo > CONTACT_TIME_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if lowest_height(&step_flight(&start, mid, g), self.spec) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.advance(hi);
                // Place the corner exactly on the ground.
                self.state.com_height -= lowest_height(&self.state, self.spec);
                self.record_point();
                return;
            }
            self.advance(dt);
            self.record_point();
        }
    }

    /// Corners resting on the ground at the current instant.
    fn touching_corners(&self) -> Vec<Corner> {
        let tol = 1e-9 * self.spec.half_diagonal();
        let mut out = Vec::with_capacity(2);
        for across in [-1i8, 1] {
            for along in [-1i8, 1] {
                let c = corner(&self.state, self.spec, CornerId { across, along });
                if c.height <= tol {
                    out.push(c);
                }
            }
        }
        if out.is_empty() {
            out.push(lowest_corner(&self.state, self.spec));
        }
        out
    }

    fn resolve_impact(&mut self) -> (Option<ContactSide>, bool) {
        let spec = self.spec;
        let g = self.config.gravity;
        let inertia = spec.inertia().transverse;
        let touching = self.touching_corners();
        let tilt = tilt_of(self.state.phi);
        let w1 = self.state.omega;
        let v1 = (-self.state.v_vertical).max(0.0);
        let h1 = v1 * v1 / (2.0 * g);

        // A single touching corner torques the coin about its centre of mass;
        // a face or the lateral line resting flat does not.
        let torque_sense = if touching.len() == 1 {
            let offset = touching[0].offset;
            if offset.abs() > 1e-12 * spec.half_diagonal() {
                -offset.signum()
            } else {
                0.0
            }
        } else {
            0.0
        };
        let side = (torque_sense != 0.0).then(|| {
            let spin_sense = if w1 < 0.0 { -1.0 } else { 1.0 };
            if torque_sense == spin_sense {
                ContactSide::Leading
            } else {
                ContactSide::Trailing
            }
        });

        let (mut v2, mut w2, clamped) = match side {
            None => {
                let k = self.material.restitution;
                ((k * v1 * v1).sqrt(), w1, false)
            }
            Some(contact_side) => {
                let input = ImpactInput {
                    incoming_speed: v1,
                    incoming_omega: w1,
                    tilt,
                    contact_side,
                };
                match self.model.rebound(&input, spec, self.material, h1) {
                    Ok(r) => (r.outgoing_speed, r.outgoing_omega, false),
                    Err(Error::NegativeEnergyBudget { .. }) => {
                        // Spin takes the whole budget; the rebound speed is zero.
                        let w2 = self.model.outgoing_omega(&input, spec, self.material);
                        let available = w1 * w1
                            + 2.0 * self.material.restitution * spec.mass() * g * h1 / inertia;
                        (0.0, w2.signum() * available.sqrt(), true)
                    }
                    Err(e) => unreachable!("validated impact input rejected: {e}"),
                }
            }
        };

        // The ground cannot pull: a touching corner must not keep moving
        // down, so spin is reduced until every touching corner separates.
        for c in &touching {
            let corner_velocity = v2 - w2 * c.offset;
            if corner_velocity < 0.0 {
                w2 = v2 / c.offset;
            }
        }
        if !v2.is_finite() {
            v2 = 0.0;
        }

        self.state.v_vertical = v2;
        self.state.omega = w2;
        (side, clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn coin(h: f64, r: f64) -> CoinSpec {
        CoinSpec::new(h, r, 0.005).unwrap()
    }

    fn at_rest(height: f64, phi: f64) -> TossState2D {
        TossState2D {
            com_height: height,
            phi,
            ..TossState2D::default()
        }
    }

    #[test]
    fn lowest_corner_geometry() {
        let spec = coin(2.0, 1.0);
        let flat = lowest_corner(&at_rest(5.0, 0.0), &spec);
        assert_abs_diff_eq!(flat.height, 4.0, epsilon = 1e-12);
        let edge = lowest_corner(&at_rest(5.0, FRAC_PI_2), &spec);
        assert_abs_diff_eq!(edge.height, 4.0, epsilon = 1e-12);
        let diag = lowest_corner(&at_rest(5.0, FRAC_PI_4), &spec);
        assert_abs_diff_eq!(diag.height, 5.0 - 2f64.sqrt(), epsilon = 1e-12);

        let thin = coin(0.5, 1.0);
        let edge = lowest_corner(&at_rest(3.0, FRAC_PI_2), &thin);
        assert_abs_diff_eq!(edge.height, 2.0, epsilon = 1e-12);
        let flat = lowest_corner(&at_rest(3.0, PI), &thin);
        assert_abs_diff_eq!(flat.height, 2.75, epsilon = 1e-12);
    }

    #[test]
    fn lowest_corner_is_minimum_of_all_four() {
        let spec = coin(0.7, 0.4);
        for i in 0..360 {
            let s = at_rest(1.0, i as f64 * PI / 180.0);
            let low = lowest_corner(&s, &spec);
            for across in [-1, 1] {
                for along in [-1, 1] {
                    let c = corner(&s, &spec, CornerId { across, along });
                    assert!(low.height <= c.height + 1e-12);
                }
            }
        }
    }

    #[test]
    fn free_fall_step() {
        let s = at_rest(1.0, 0.3);
        let n = step_flight(&s, 1e-3, 9.81);
        assert_abs_diff_eq!(n.v_vertical, -9.81e-3, epsilon = 1e-15);
        assert_eq!(n.phi, 0.3);
    }

    #[test]
    fn flight_energy_and_rotation_exact() {
        let spec = coin(0.015, 0.01);
        let g = 9.81;
        let mut s = TossState2D {
            com_height: 0.5,
            v_vertical: 3.0,
            v_horizontal: 0.4,
            omega: 17.0,
            phi: 0.2,
            ..TossState2D::default()
        };
        let e0 = mechanical_energy(&s, &spec, g);
        let dt = 1e-5;
        let steps = 60_000; // 0.6 s, whole arc above the ground
        for _ in 0..steps {
            s = step_flight(&s, dt, g);
        }
        let e1 = mechanical_energy(&s, &spec, g);
        // The potential term uses the lowest corner, which moves with the spin;
        // compare against the centre-of-mass energy instead.
        let com_energy = |st: &TossState2D| {
            0.5 * spec.mass() * st.v_vertical.powi(2) + spec.mass() * g * st.com_height
        };
        let start = TossState2D {
            com_height: 0.5,
            v_vertical: 3.0,
            ..TossState2D::default()
        };
        assert!(((com_energy(&s) - com_energy(&start)) / com_energy(&start)).abs() < 1e-6);
        assert_abs_diff_eq!(s.phi, 0.2 + 17.0 * 0.6, epsilon = 1e-9);
        let _ = (e0, e1);
    }

    #[test]
    fn classify_examples() {
        let spec = coin(2.0, 1.0);
        assert_eq!(classify_rest_2d(0.0, &spec), Outcome::FaceDown);
        assert_eq!(classify_rest_2d(PI, &spec), Outcome::FaceUp);
        assert_eq!(classify_rest_2d(FRAC_PI_2, &spec), Outcome::Side);
        assert_eq!(classify_rest_2d(60f64.to_radians(), &spec), Outcome::Side);
        assert_eq!(
            classify_rest_2d(30f64.to_radians(), &spec),
            Outcome::FaceDown
        );
        assert_eq!(classify_rest_2d(-60f64.to_radians(), &spec), Outcome::Side);
        // exact balance tie goes to the side
        assert_eq!(classify_rest_2d(FRAC_PI_4, &spec), Outcome::Side);
    }

    #[test]
    fn dead_drop_lands_flat_in_one_impact() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.0, 0.3, 0.0).unwrap();
        for h in [0.01, 0.3, 2.0] {
            let cfg = TossConfig2D {
                initial_height: h,
                ..TossConfig2D::default()
            };
            let r = simulate_toss_2d(&spec, &material, &cfg).unwrap();
            assert_eq!(r.outcome, Outcome::FaceDown);
            assert_eq!(r.impacts, 1);
        }
    }

    #[test]
    fn dead_drop_with_impulse_has_no_torque_on_flat_face() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.0, 0.3, 1e-3).unwrap();
        let cfg = TossConfig2D::default();
        let r = simulate_toss_2d(&spec, &material, &cfg).unwrap();
        assert_eq!(r.outcome, Outcome::FaceDown);
        assert_eq!(r.impacts, 1);
    }

    #[test]
    fn inelastic_drop_keeps_impact_orientation() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.0, 0.3, 0.0).unwrap();
        for i in 0..180 {
            let phi0 = i as f64 * PI / 180.0 + 0.003;
            let cfg = TossConfig2D {
                phi0,
                ..TossConfig2D::default()
            };
            let r = simulate_toss_2d(&spec, &material, &cfg).unwrap();
            assert_eq!(r.outcome, classify_rest_2d(phi0, &spec), "phi0 = {phi0}");
            assert_eq!(r.impacts, 1);
        }
    }

    #[test]
    fn bouncing_energy_never_grows() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.5, 0.3, 2e-4).unwrap();
        for i in 0..50 {
            let cfg = TossConfig2D {
                phi0: 0.07 * i as f64,
                omega0: 0.6 * i as f64,
                ..TossConfig2D::default()
            };
            let rec = Recording {
                impacts: true,
                trajectory: false,
            };
            let r = simulate_toss_2d_recorded(&spec, &material, &cfg, rec).unwrap();
            let e0 = mechanical_energy(&initial_state(&spec, &cfg), &spec, cfg.gravity);
            for imp in &r.impact_log {
                assert!(imp.energy_after <= imp.energy_before * (1.0 + 1e-9) + 1e-15);
            }
            assert!(r.summary.final_energy_fraction < cfg.energy_stop_fraction);
            assert!(r.impact_log.last().unwrap().energy_after < 0.01 * e0);
        }
    }

    #[test]
    fn trajectory_dump_is_time_ordered() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.5, 0.3, 1e-4).unwrap();
        let cfg = TossConfig2D {
            phi0: 0.4,
            omega0: 10.0,
            ..TossConfig2D::default()
        };
        let rec = Recording {
            impacts: false,
            trajectory: true,
        };
        let r = simulate_toss_2d_recorded(&spec, &material, &cfg, rec).unwrap();
        assert!(r.trajectory.len() > 10);
        assert!(r.trajectory.windows(2).all(|w| w[1].time >= w[0].time));
    }

    #[test]
    fn non_termination_reported() {
        let spec = coin(0.015, 0.01);
        let material = Material::new(0.9, 0.3, 0.0).unwrap();
        let cfg = TossConfig2D {
            max_impacts: 3,
            ..TossConfig2D::default()
        };
        assert!(matches!(
            simulate_toss_2d(&spec, &material, &cfg),
            Err(Error::NonTermination { limit: 3 })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = TossConfig2D {
            energy_stop_fraction: 1.0,
            ..TossConfig2D::default()
        };
        assert!(bad.validate().is_err());
        let bad = TossConfig2D {
            timestep: 0.0,
            ..TossConfig2D::default()
        };
        assert!(bad.validate().is_err());
    }
}
