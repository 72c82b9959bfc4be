//! Volumetric-rotation rigid-body simulator.
//!
//! The coin is a solid cylinder over a horizontal ground plane `z = 0`.
//! Flight is integrated in closed form: the centre of mass follows a
//! parabola and, because the body is axisymmetric, torque-free rotation is a
//! steady precession of the symmetry axis about the conserved angular
//! momentum plus a constant spin about the axis. Contacts are found by
//! bisecting the crossing time of the lowest point and resolved with
//! single-point impulses: Newtonian restitution along the normal and a
//! clamped Coulomb cone along the tangent plane.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::coin::{is_side_tilt, CoinSpec, Material, Outcome, STANDARD_GRAVITY};
use crate::error::{invalid, require_non_negative, require_positive, Error, Result};

const CONTACT_TIME_TOLERANCE: f64 = 1e-9;
/// Rim samples on the lower rim, relative to the steepest-descent azimuth.
const LOWER_RIM_SAMPLES: usize = 6;
const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;
/// `(cos, sin)` of the lower-rim sample azimuths, 60° apart.
const RIM_AZIMUTHS: [(f64, f64); LOWER_RIM_SAMPLES] = [
    (1.0, 0.0),
    (0.5, HALF_SQRT3),
    (-0.5, HALF_SQRT3),
    (-1.0, 0.0),
    (-0.5, -HALF_SQRT3),
    (0.5, -HALF_SQRT3),
];
const SOLVER_PASSES: usize = 4;
/// Contact-stepping band above the ground, as a fraction of the half-diagonal.
const CONTACT_MARGIN: f64 = 1e-3;
/// Points within this fraction of the half-diagonal of the ground take impulses.
const TOUCH_SLOP: f64 = 1e-6;
/// Penetration tolerated within one contact step, as a fraction of the half-diagonal.
const PENETRATION_ALLOWANCE: f64 = 1e-3;
const STEP_SEARCH_TOLERANCE: f64 = 1e-3;
/// Shortest contact step, as a fraction of the configured timestep.
const MIN_STEP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TossState3D {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    /// World frame.
    pub angular_velocity: Vector3<f64>,
}

impl TossState3D {
    /// Unit symmetry axis in world coordinates.
    pub fn axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactFeature {
    /// Rim of the face on the `-axis` end.
    RimBottom,
    RimTop,
    FaceBottom,
    FaceTop,
    Lateral,
}

/// Lowest point of the coin, whether or not it touches the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPoint {
    pub point: Vector3<f64>,
    pub height: f64,
    pub feature: ContactFeature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub world_point: Vector3<f64>,
    pub normal: Unit<Vector3<f64>>,
    pub penetration_depth: f64,
    pub feature: ContactFeature,
}

/// Orientation tolerance (`1 - |a_z|` or `|a_z|`) below which a face or the
/// lateral line counts as lying flat.
const FLAT_TOLERANCE: f64 = 1e-9;

/// Lowest point: `z - (H/2)|cosΘ| - R·sinΘ`, on the lower rim in the
/// steepest-descent azimuth.
pub fn support_point(state: &TossState3D, spec: &CoinSpec) -> SupportPoint {
    let a = state.axis();
    let half_h = 0.5 * spec.height();
    let r = spec.radius();
    let up = Vector3::z();
    let az = a.z;

    // Direction in the face plane that points most downward; length sinΘ.
    let descent = -up + a * az;
    let sin_theta = descent.norm();

    if 1.0 - az.abs() < FLAT_TOLERANCE {
        let sign = -az.signum();
        let point = state.position + a * (sign * half_h);
        let feature = if az > 0.0 {
            ContactFeature::FaceBottom
        } else {
            ContactFeature::FaceTop
        };
        return SupportPoint {
            point,
            height: point.z,
            feature,
        };
    }
    let d = descent / sin_theta;
    if az.abs() < FLAT_TOLERANCE {
        let point = state.position + d * r;
        return SupportPoint {
            point,
            height: point.z,
            feature: ContactFeature::Lateral,
        };
    }
    let sign = -az.signum();
    let point = state.position + a * (sign * half_h) + d * r;
    let feature = if az > 0.0 {
        ContactFeature::RimBottom
    } else {
        ContactFeature::RimTop
    };
    SupportPoint {
        point,
        height: point.z,
        feature,
    }
}

/// The support point as a contact, if it touches or penetrates the ground.
pub fn ground_contact(state: &TossState3D, spec: &CoinSpec) -> Option<ContactPoint> {
    let s = support_point(state, spec);
    (s.height <= 0.0).then(|| ContactPoint {
        world_point: s.point,
        normal: Vector3::z_axis(),
        penetration_depth: -s.height,
        feature: s.feature,
    })
}

fn lowest_height(position_z: f64, axis: &Vector3<f64>, spec: &CoinSpec) -> f64 {
    let az = axis.z;
    let sin_theta = (1.0 - az * az).max(0.0).sqrt();
    position_z - 0.5 * spec.height() * az.abs() - spec.radius() * sin_theta
}

/// Folded angle between the symmetry axis and vertical, in `[0, π/2]`.
pub fn tilt_of(orientation: &UnitQuaternion<f64>) -> f64 {
    let a = orientation * Vector3::z();
    a.xy().norm().atan2(a.z.abs())
}

/// `Side` iff `tanΘ > 2R/H` (ties go to `Side`); otherwise `FaceUp` when the
/// axis points up.
pub fn classify_rest_3d(orientation: &UnitQuaternion<f64>, spec: &CoinSpec) -> Outcome {
    if is_side_tilt(tilt_of(orientation), spec) {
        Outcome::Side
    } else if (orientation * Vector3::z()).z >= 0.0 {
        Outcome::FaceUp
    } else {
        Outcome::FaceDown
    }
}

/// World-frame inverse inertia `R·diag(1/I_t, 1/I_t, 1/I_a)·Rᵀ`.
fn inverse_inertia_world(orientation: &UnitQuaternion<f64>, spec: &CoinSpec) -> Matrix3<f64> {
    let i = spec.inertia();
    let rot = orientation.to_rotation_matrix();
    let body = Matrix3::from_diagonal(&Vector3::new(
        1.0 / i.transverse,
        1.0 / i.transverse,
        1.0 / i.axial,
    ));
    rot.matrix() * body * rot.matrix().transpose()
}

/// World-frame angular momentum about the centre of mass.
pub fn angular_momentum(state: &TossState3D, spec: &CoinSpec) -> Vector3<f64> {
    let i = spec.inertia();
    let a = state.axis();
    let w = state.angular_velocity;
    let along = a * a.dot(&w);
    (w - along) * i.transverse + along * i.axial
}

pub fn kinetic_energy(state: &TossState3D, spec: &CoinSpec) -> f64 {
    let l = angular_momentum(state, spec);
    0.5 * spec.mass() * state.linear_velocity.norm_squared() + 0.5 * l.dot(&state.angular_velocity)
}

/// Torque-free flight over `dt`, exact for an axisymmetric body.
pub fn propagate_flight(
    state: &TossState3D,
    spec: &CoinSpec,
    dt: f64,
    gravity: f64,
) -> TossState3D {
    let i = spec.inertia();
    let l = angular_momentum(state, spec);
    let a0 = state.axis();
    let l_norm = l.norm();

    let precession = if l_norm > 0.0 {
        UnitQuaternion::from_axis_angle(
            &Unit::new_unchecked(l / l_norm),
            l_norm / i.transverse * dt,
        )
    } else {
        UnitQuaternion::identity()
    };
    let spin_rate = l.dot(&a0) * (1.0 / i.axial - 1.0 / i.transverse);
    let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), spin_rate * dt);
    let mut orientation = precession * state.orientation * spin;
    orientation.renormalize();

    let a = orientation * Vector3::z();
    let omega = l / i.transverse + a * (l.dot(&a) * (1.0 / i.axial - 1.0 / i.transverse));

    let g = Vector3::new(0.0, 0.0, -gravity);
    TossState3D {
        position: state.position + state.linear_velocity * dt + g * (0.5 * dt * dt),
        orientation,
        linear_velocity: state.linear_velocity + g * dt,
        angular_velocity: omega,
    }
}

/// One applied contact impulse, kept for auditing the contact law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpulseRecord {
    pub normal_impulse: f64,
    pub tangential_impulse: f64,
    pub friction: f64,
    pub restitution: f64,
    /// Normal velocity of the contact point before the impulse (negative: approaching).
    pub normal_velocity_before: f64,
    pub normal_velocity_after: f64,
    pub sliding: bool,
}

/// Applies one impulse at `contact` so the contact point leaves with
/// `-e·v_n` along the normal and as little slip as the friction cone allows.
///
/// Returns `None` without touching the state when the point is separating.
pub fn resolve_impact_3d(
    state: &mut TossState3D,
    contact: &ContactPoint,
    material: &Material,
    spec: &CoinSpec,
) -> Option<ImpulseRecord> {
    let law = PointLaw {
        restitution: material.restitution,
        allowed_approach: 0.0,
        friction: material.friction,
    };
    let inv_i = inverse_inertia_world(&state.orientation, spec);
    apply_point_impulse(
        state,
        contact.world_point,
        *contact.normal,
        law,
        spec,
        &inv_i,
    )
}

#[derive(Debug, Clone, Copy)]
struct PointLaw {
    restitution: f64,
    /// Normal approach speed a point still above the ground may keep: it
    /// reaches the ground exactly at the end of the step. Zero for points
    /// already touching.
    allowed_approach: f64,
    friction: f64,
}

fn apply_point_impulse(
    state: &mut TossState3D,
    point: Vector3<f64>,
    n: Vector3<f64>,
    law: PointLaw,
    spec: &CoinSpec,
    inv_i: &Matrix3<f64>,
) -> Option<ImpulseRecord> {
    let PointLaw {
        restitution,
        allowed_approach,
        friction,
    } = law;
    let r = point - state.position;
    let v_point = state.linear_velocity + state.angular_velocity.cross(&r);
    let v_n = v_point.dot(&n);
    if v_n >= -allowed_approach {
        return None;
    }
    let v_t = v_point - n * v_n;
    let target_n = if allowed_approach > 0.0 {
        -allowed_approach
    } else {
        -restitution * v_n
    };
    let dv_n = target_n - v_n;

    let rx = r.cross_matrix();
    let k_mat = Matrix3::identity() / spec.mass() - rx * inv_i * rx;

    let target = n * dv_n - v_t;
    let mut impulse = k_mat
        .try_inverse()
        .map(|k_inv| k_inv * target)
        .unwrap_or_else(|| n * (dv_n / n.dot(&(k_mat * n))));
    let mut j_n = impulse.dot(&n);
    let mut j_t = impulse - n * j_n;
    let mut sliding = false;

    if j_t.norm() > friction * j_n || j_n < 0.0 {
        sliding = true;
        let slip = v_t.norm();
        let t_hat = if slip > 1e-12 {
            v_t / slip
        } else if j_t.norm() > 0.0 {
            -j_t.normalize()
        } else {
            Vector3::zeros()
        };
        let dir = n - t_hat * friction;
        let denom = n.dot(&(k_mat * dir));
        let (dir, denom) = if denom > 0.0 {
            (dir, denom)
        } else {
            (n, n.dot(&(k_mat * n)))
        };
        j_n = dv_n / denom;
        impulse = dir * j_n;
        j_t = impulse - n * impulse.dot(&n);
        j_n = impulse.dot(&n);
    }

    state.linear_velocity += impulse / spec.mass();
    state.angular_velocity += inv_i * r.cross(&impulse);

    let v_after = state.linear_velocity + state.angular_velocity.cross(&r);
    Some(ImpulseRecord {
        normal_impulse: j_n,
        tangential_impulse: j_t.norm(),
        friction,
        restitution: if allowed_approach > 0.0 {
            0.0
        } else {
            restitution
        },
        normal_velocity_before: v_n,
        normal_velocity_after: v_after.dot(&n),
        sliding,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TossConfig3D {
    pub energy_stop_fraction: f64,
    pub max_impacts: usize,
    pub timestep: f64,
    pub gravity: f64,
    /// Consecutive resting steps required before the coin counts as settled.
    pub settle_steps: usize,
    /// Simulated-time budget for one trial, in seconds.
    pub max_time: f64,
    /// Approach speeds below this (m/s) get no restitution.
    pub bounce_threshold: f64,
    /// Angular damping rate (1/s) applied while touching the ground.
    pub rolling_damping: f64,
    /// Largest tilt deviation (rad) from a flat face or the lateral line
    /// that still counts as a rest pose.
    pub rest_pose_tolerance: f64,
}

impl Default for TossConfig3D {
    fn default() -> Self {
        Self {
            energy_stop_fraction: 0.01,
            max_impacts: 10_000,
            timestep: 1e-3,
            gravity: STANDARD_GRAVITY,
            settle_steps: 50,
            max_time: 60.0,
            bounce_threshold: 0.05,
            rolling_damping: 3.0,
            rest_pose_tolerance: 0.05,
        }
    }
}

impl TossConfig3D {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_stop_fraction > 0.0 && self.energy_stop_fraction < 1.0) {
            return Err(invalid(
                "sim3d.energy_stop_fraction",
                format!("must lie in (0, 1), got {}", self.energy_stop_fraction),
            ));
        }
        if self.max_impacts == 0 {
            return Err(invalid("sim3d.max_impacts", "must be >= 1"));
        }
        require_positive("sim3d.timestep", self.timestep)?;
        require_positive("sim3d.gravity", self.gravity)?;
        require_positive("sim3d.max_time", self.max_time)?;
        require_non_negative("sim3d.bounce_threshold", self.bounce_threshold)?;
        require_non_negative("sim3d.rolling_damping", self.rolling_damping)?;
        require_positive("sim3d.rest_pose_tolerance", self.rest_pose_tolerance)?;
        Ok(())
    }
}

/// Release conditions of one 3-D trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Launch3D {
    /// Clearance of the lowest point above the ground.
    pub height: f64,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl Launch3D {
    pub fn state(&self, spec: &CoinSpec) -> TossState3D {
        let axis = self.orientation * Vector3::z();
        let offset = lowest_height(0.0, &axis, spec);
        TossState3D {
            position: Vector3::new(0.0, 0.0, self.height - offset),
            orientation: self.orientation,
            linear_velocity: self.linear_velocity,
            angular_velocity: self.angular_velocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlightRecord {
    pub duration: f64,
    pub momentum_before: [f64; 3],
    pub momentum_after: [f64; 3],
}

/// Pose after a flight or contact step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateSample3D {
    pub time: f64,
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
}

impl StateSample3D {
    fn new(time: f64, s: &TossState3D) -> Self {
        let q = s.orientation.quaternion();
        Self {
            time,
            position: s.position.into(),
            orientation: [q.w, q.i, q.j, q.k],
            linear_velocity: s.linear_velocity.into(),
            angular_velocity: s.angular_velocity.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TossLog3D {
    pub impulses: Vec<ImpulseRecord>,
    pub flights: Vec<FlightRecord>,
    pub states: Vec<StateSample3D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TossReport3D {
    pub outcome: Outcome,
    pub impacts: usize,
    pub duration: f64,
    pub final_state: TossState3D,
    pub log: Option<TossLog3D>,
}

pub fn simulate_toss_3d(
    spec: &CoinSpec,
    material: &Material,
    config: &TossConfig3D,
    launch: &Launch3D,
) -> Result<TossReport3D> {
    simulate_toss_3d_logged(spec, material, config, launch, false)
}

pub fn simulate_toss_3d_logged(
    spec: &CoinSpec,
    material: &Material,
    config: &TossConfig3D,
    launch: &Launch3D,
    keep_log: bool,
) -> Result<TossReport3D> {
    config.validate()?;
    let material = material.validated()?;
    require_non_negative("launch.height", launch.height)?;

    let mut sim = Simulation {
        spec,
        material: &material,
        config,
        state: launch.state(spec),
        time: 0.0,
        impacts: 0,
        log: keep_log.then(TossLog3D::default),
    };
    sim.sample();
    let g = config.gravity;
    let rest_floor = (0.5 * spec.height()).min(spec.radius());
    let e0 = kinetic_energy(&sim.state, spec)
        + spec.mass() * g * (sim.state.position.z - rest_floor).max(0.0);
    // A body resting on the ground still carries the g·dt it picks up in
    // each step, so the threshold cannot go below that.
    let dt = config.timestep;
    let stop = (config.energy_stop_fraction * e0).max(spec.mass() * (g * dt).powi(2));
    let slop = TOUCH_SLOP * spec.half_diagonal();

    let mut resting_steps = 0usize;
    loop {
        if sim.time > config.max_time || sim.impacts > config.max_impacts {
            return Err(Error::NonTermination {
                limit: config.max_impacts,
            });
        }
        let height = lowest_height(sim.state.position.z, &sim.state.axis(), spec);
        if height > slop {
            resting_steps = 0;
            sim.fly();
            sim.sample();
            continue;
        }

        sim.contact_step();
        sim.sample();
        let ke = kinetic_energy(&sim.state, spec);
        if ke <= stop && sim.near_rest_pose() {
            resting_steps += 1;
            if resting_steps >= config.settle_steps {
                break;
            }
        } else {
            resting_steps = 0;
        }
    }

    Ok(TossReport3D {
        outcome: classify_rest_3d(&sim.state.orientation, spec),
        impacts: sim.impacts,
        duration: sim.time,
        final_state: sim.state,
        log: sim.log,
    })
}

struct Simulation<'a> {
    spec: &'a CoinSpec,
    material: &'a Material,
    config: &'a TossConfig3D,
    state: TossState3D,
    time: f64,
    impacts: usize,
    log: Option<TossLog3D>,
}

impl Simulation<'_> {
    fn sample(&mut self) {
        if let Some(log) = self.log.as_mut() {
            log.states.push(StateSample3D::new(self.time, &self.state));
        }
    }

    fn height_after(&self, dt: f64) -> f64 {
        let s = propagate_flight(&self.state, self.spec, dt, self.config.gravity);
        lowest_height(s.position.z, &s.axis(), self.spec)
    }

    /// Free flight until the coin touches down, or for at most a second.
    ///
    /// Only touchdowns after the coin has cleared the contact band count as
    /// impacts, so rocking and rolling hops do not.
    fn fly(&mut self) {
        let g = self.config.gravity;
        let dt = self.config.timestep;
        let reach = self.spec.half_diagonal();
        let margin = CONTACT_MARGIN * reach;
        let momentum_before = angular_momentum(&self.state, self.spec);
        let start_time = self.time;
        let base = self.state;

        let mut cleared = lowest_height(base.position.z, &base.axis(), self.spec) > margin;
        let mut elapsed = 0.0;
        let above = base.position.z - reach;
        if above > 0.0 {
            let v = base.linear_velocity.z;
            let t_cross = (v + (v * v + 2.0 * g * above).sqrt()) / g;
            if t_cross > dt {
                elapsed = t_cross - dt;
                cleared = true;
            }
        }
        loop {
            let h = self.height_after(elapsed + dt);
            if h <= 0.0 {
                let mut lo = elapsed;
                let mut hi = elapsed + dt;
                while hi - lo > CONTACT_TIME_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if self.height_after(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.state = propagate_flight(&base, self.spec, hi, g);
                self.time = start_time + hi;
                let h = lowest_height(self.state.position.z, &self.state.axis(), self.spec);
                self.state.position.z -= h;
                if cleared {
                    self.impacts += 1;
                }
                break;
            }
            cleared |= h > margin;
            elapsed += dt;
            if elapsed > 1.0 {
                self.state = propagate_flight(&base, self.spec, elapsed, g);
                self.time = start_time + elapsed;
                break;
            }
        }
        if let Some(log) = self.log.as_mut() {
            let after = angular_momentum(&self.state, self.spec);
            log.flights.push(FlightRecord {
                duration: self.time - start_time,
                momentum_before: momentum_before.into(),
                momentum_after: after.into(),
            });
        }
    }

    /// Candidate contact points: evenly spaced samples on the lower rim,
    /// starting at the steepest-descent azimuth, and the lowest point of the
    /// upper rim.
    fn rim_samples(&self) -> [Vector3<f64>; LOWER_RIM_SAMPLES + 1] {
        let a = self.state.axis();
        let half_h = 0.5 * self.spec.height();
        let r = self.spec.radius();
        let descent = -Vector3::z() + a * a.z;
        let d = if descent.norm() > 1e-12 {
            descent.normalize()
        } else {
            // Face flat: any in-plane direction will do.
            let helper = if a.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            a.cross(&helper).normalize()
        };
        let e = a.cross(&d);
        let lower_sign = if a.z >= 0.0 { -1.0 } else { 1.0 };
        let lower = self.state.position + a * (lower_sign * half_h);
        let upper = self.state.position - a * (lower_sign * half_h);
        let mut out = [upper + d * r; LOWER_RIM_SAMPLES + 1];
        for (p, (c, s)) in out.iter_mut().zip(RIM_AZIMUTHS) {
            *p = lower + (d * c + e * s) * r;
        }
        out
    }

    /// One step while touching the ground: impulses at the touching points,
    /// then ballistic drift, cut short if another part of the coin would sink
    /// deeper than the sag gravity produces over one step.
    fn contact_step(&mut self) {
        let dt = self.config.timestep;
        let g = self.config.gravity;
        let slop = TOUCH_SLOP * self.spec.half_diagonal();
        let samples = self.rim_samples();
        let (touch_sum, touch_count) = samples
            .iter()
            .filter(|p| p.z <= slop)
            .fold((Vector3::zeros(), 0usize), |(sum, n), p| (sum + p, n + 1));
        let n = Vector3::z();
        // A face lying flat touches along its whole rim; one central impulse
        // handles it exactly.
        let centroid = (touch_count > 1).then(|| touch_sum / touch_count as f64);
        let inv_i = inverse_inertia_world(&self.state.orientation, self.spec);

        for _ in 0..SOLVER_PASSES {
            let mut any = false;
            for point in centroid.iter().chain(samples.iter()) {
                let gap = point.z;
                let allowed_approach = if gap <= slop { 0.0 } else { gap / dt };
                let r = point - self.state.position;
                let v_point = self.state.linear_velocity + self.state.angular_velocity.cross(&r);
                let approach = -v_point.dot(&n);
                let restitution = if approach > self.config.bounce_threshold {
                    self.material.restitution
                } else {
                    0.0
                };
                let law = PointLaw {
                    restitution,
                    allowed_approach,
                    friction: self.material.friction,
                };
                if let Some(rec) =
                    apply_point_impulse(&mut self.state, *point, n, law, self.spec, &inv_i)
                {
                    any = true;
                    if let Some(log) = self.log.as_mut() {
                        log.impulses.push(rec);
                    }
                }
            }
            if !any {
                break;
            }
        }

        if touch_count > 0 {
            self.state.angular_velocity /= 1.0 + self.config.rolling_damping * dt;
        }

        // Rolling and gravity sag dip the lowest point slightly every step;
        // only a deeper plunge by some other part of the rim shortens it.
        let allowance = (g * dt * dt).max(PENETRATION_ALLOWANCE * self.spec.half_diagonal());
        let mut step = dt;
        if self.height_after(dt) < -allowance {
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > STEP_SEARCH_TOLERANCE * dt {
                let mid = 0.5 * (lo + hi);
                if self.height_after(mid) < -allowance {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            step = lo.max(MIN_STEP_FRACTION * dt);
        }
        let mut next = propagate_flight(&self.state, self.spec, step, g);
        let h = lowest_height(next.position.z, &next.axis(), self.spec);
        if h < 0.0 {
            next.position.z -= h;
        }
        self.state = next;
        self.time += step;
    }

    fn near_rest_pose(&self) -> bool {
        let tilt = tilt_of(&self.state.orientation);
        let tol = self.config.rest_pose_tolerance;
        tilt < tol || (std::f64::consts::FRAC_PI_2 - tilt) < tol
    }
}
