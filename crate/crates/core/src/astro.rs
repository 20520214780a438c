//! Orbital state representation, two-body + J2 secular propagation and the
//! frame conversions everything else builds on.
//!
//! Units are km, km/s, rad and seconds since scenario start throughout.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Physical constants and frame parameters shared by every model.
///
/// The default record describes a spherical Earth with uniform rotation and
/// the WGS-84 equatorial radius. `theta0` is the Earth rotation angle at the
/// scenario epoch (2023-03-01 00:00:00 UTC by default).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstroConstants {
    /// Gravitational parameter (km^3/s^2).
    pub mu: f64,
    /// Second zonal harmonic, dimensionless.
    pub j2: f64,
    /// Earth radius (km).
    pub earth_radius: f64,
    /// Earth rotation rate (rad/s).
    pub earth_rotation_rate: f64,
    /// Earth rotation angle at t = 0 (rad).
    pub theta0: f64,
    /// When false, propagation is pure two-body.
    pub j2_enabled: bool,
}

/// Greenwich mean sidereal angle at 2023-03-01 00:00:00 UTC (rad).
pub const GMST_2023_03_01: f64 = 2.767_123_771_552_757_5;

impl Default for AstroConstants {
    fn default() -> Self {
        Self {
            mu: 398_600.441_8,
            j2: 1.082_626_68e-3,
            earth_radius: 6378.137,
            earth_rotation_rate: 7.292_115_9e-5,
            theta0: GMST_2023_03_01,
            j2_enabled: true,
        }
    }
}

impl AstroConstants {
    pub fn two_body() -> Self {
        Self {
            j2_enabled: false,
            ..Self::default()
        }
    }

    /// Circular speed at radius `a` (km/s).
    pub fn circular_speed(&self, a: f64) -> f64 {
        (self.mu / a).sqrt()
    }

    /// Two-body mean motion (rad/s).
    pub fn mean_motion(&self, a: f64) -> f64 {
        (self.mu / (a * a * a)).sqrt()
    }

    pub fn period(&self, a: f64) -> f64 {
        TAU / self.mean_motion(a)
    }
}

/// Wrap an angle into [0, 2pi).
pub fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_two_pi(x + PI) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Classical orbital elements of one orbit at `epoch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalOrbitalElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_periapsis: f64,
    pub true_anomaly: f64,
    pub epoch: f64,
}

impl ClassicalOrbitalElements {
    /// Build from degrees, as tabulated element sets usually are.
    pub fn from_degrees(a: f64, e: f64, i: f64, raan: f64, argp: f64, nu: f64) -> Self {
        Self {
            semi_major_axis: a,
            eccentricity: e,
            inclination: i.to_radians(),
            raan: wrap_two_pi(raan.to_radians()),
            arg_periapsis: wrap_two_pi(argp.to_radians()),
            true_anomaly: wrap_two_pi(nu.to_radians()),
            epoch: 0.0,
        }
    }

    pub fn validate(&self, consts: &AstroConstants) -> Result<()> {
        let e = self.eccentricity;
        if !(self.semi_major_axis > consts.earth_radius) {
            return Err(Error::InvalidElements(format!(
                "semi-major axis {} km is not above the Earth radius",
                self.semi_major_axis
            )));
        }
        if !(0.0..1.0).contains(&e) {
            return Err(Error::InvalidElements(format!("eccentricity {e} outside [0, 1)")));
        }
        if !(0.0..=PI).contains(&self.inclination) {
            return Err(Error::InvalidElements(format!(
                "inclination {} outside [0, pi]",
                self.inclination
            )));
        }
        for (name, v) in [
            ("raan", self.raan),
            ("arg_periapsis", self.arg_periapsis),
            ("true_anomaly", self.true_anomaly),
        ] {
            if !(0.0..TAU).contains(&v) {
                return Err(Error::InvalidElements(format!("{name} {v} outside [0, 2pi)")));
            }
        }
        Ok(())
    }

    /// Argument of latitude u = argp + nu, the phase used for near-circular slots.
    pub fn arg_latitude(&self) -> f64 {
        wrap_two_pi(self.arg_periapsis + self.true_anomaly)
    }

    pub fn semi_latus_rectum(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.eccentricity * self.eccentricity)
    }

    /// Unit angular-momentum vector of the orbital plane.
    pub fn plane_normal(&self) -> Vec3 {
        let (si, ci) = self.inclination.sin_cos();
        let (so, co) = self.raan.sin_cos();
        [si * so, -si * co, ci]
    }
}

/// Cartesian ECI state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
}

impl StateVector {
    pub fn radius(&self) -> f64 {
        norm(&self.position)
    }

    pub fn speed(&self) -> f64 {
        norm(&self.velocity)
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * dot(&self.velocity, &self.velocity) - mu / self.radius()
    }
}

/// Spherical-Earth geodetic point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPoint {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl GeodeticPoint {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        if !(-PI / 2.0..=PI / 2.0).contains(&latitude) {
            return Err(Error::Validation(format!("latitude {latitude} rad out of range")));
        }
        if !longitude.is_finite() || altitude < 0.0 {
            return Err(Error::Validation("bad longitude or negative altitude".into()));
        }
        Ok(Self {
            latitude,
            longitude: wrap_pi(longitude),
            altitude,
        })
    }
}

/// Scenario discretisation: `num_steps` propagation steps of `step` seconds,
/// grouped into `num_stages` equal stages, with attitude control every
/// `control_step` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub duration: f64,
    pub step: f64,
    pub control_step: f64,
    pub num_steps: usize,
    pub num_stages: usize,
    pub steps_per_stage: usize,
}

impl TimeGrid {
    pub fn new(duration: f64, step: f64, control_step: f64, num_stages: usize) -> Result<Self> {
        if !(step > 0.0) || !(duration > 0.0) {
            return Err(Error::InvalidGrid("duration and step must be positive".into()));
        }
        if control_step < step {
            return Err(Error::InvalidGrid("control step shorter than time step".into()));
        }
        let ratio = control_step / step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "control step {control_step} s is not a multiple of step {step} s"
            )));
        }
        let steps = duration / step;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidGrid(format!(
                "duration {duration} s is not a multiple of step {step} s"
            )));
        }
        let num_steps = steps.round() as usize;
        if num_stages == 0 || num_steps % num_stages != 0 {
            return Err(Error::InvalidGrid(format!(
                "{num_steps} steps cannot be split into {num_stages} equal stages; adjust the duration or step"
            )));
        }
        Ok(Self {
            duration,
            step,
            control_step,
            num_steps,
            num_stages,
            steps_per_stage: num_steps / num_stages,
        })
    }

    /// Same grid, different stage count.
    pub fn with_stages(&self, num_stages: usize) -> Result<Self> {
        Self::new(self.duration, self.step, self.control_step, num_stages)
    }

    /// Time (s) of 1-based global step `t`.
    pub fn time_of_step(&self, t: usize) -> f64 {
        (t - 1) as f64 * self.step
    }

    /// Time (s) of 1-based step `t` within 1-based stage `s`.
    pub fn time_of_stage_step(&self, s: usize, t: usize) -> f64 {
        self.time_of_step((s - 1) * self.steps_per_stage + t)
    }

    /// Epoch of the boundary at the start of 1-based stage `s`.
    pub fn stage_start(&self, s: usize) -> f64 {
        ((s - 1) * self.steps_per_stage) as f64 * self.step
    }

    pub fn steps_per_control(&self) -> usize {
        (self.control_step / self.step).round() as usize
    }

    /// Number of attitude control opportunities covering all steps.
    pub fn num_controls(&self) -> usize {
        self.num_steps.div_ceil(self.steps_per_control())
    }

    /// Control opportunity of 1-based step `t`: ceil(t dt / dtau).
    pub fn control_of_step(&self, t: usize) -> usize {
        t.div_ceil(self.steps_per_control())
    }
}

const KEPLER_TOL: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;

/// Solve M = E - e sin E by Newton iteration.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    let m = wrap_two_pi(mean_anomaly);
    let mut ecc = if m > PI { m - e } else { m + e };
    if e < 1e-3 {
        ecc = m;
    }
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc - e * ecc.sin() - m;
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() < KEPLER_TOL {
            return Ok(ecc);
        }
    }
    Err(Error::KeplerNonConvergence {
        eccentricity: e,
        mean_anomaly: m,
    })
}

pub fn true_to_mean_anomaly(nu: f64, e: f64) -> f64 {
    let ecc = 2.0 * (((1.0 - e) / (1.0 + e)).sqrt() * (nu / 2.0).tan()).atan();
    wrap_two_pi(ecc - e * ecc.sin())
}

pub fn eccentric_to_true_anomaly(ecc: f64, e: f64) -> f64 {
    let (s, c) = (ecc / 2.0).sin_cos();
    wrap_two_pi(2.0 * ((1.0 + e).sqrt() * s).atan2((1.0 - e).sqrt() * c))
}

/// Secular rates (raan_dot, argp_dot, mean_anomaly_dot) in rad/s.
pub fn secular_rates(coe: &ClassicalOrbitalElements, consts: &AstroConstants) -> (f64, f64, f64) {
    let n = consts.mean_motion(coe.semi_major_axis);
    if !consts.j2_enabled {
        return (0.0, 0.0, n);
    }
    let e = coe.eccentricity;
    let p = coe.semi_latus_rectum();
    let k = consts.j2 * (consts.earth_radius / p).powi(2);
    let ci = coe.inclination.cos();
    let raan_dot = -1.5 * n * k * ci;
    let argp_dot = 0.75 * n * k * (5.0 * ci * ci - 1.0);
    let m_dot = n * (1.0 + 0.75 * k * (1.0 - e * e).sqrt() * (3.0 * ci * ci - 1.0));
    (raan_dot, argp_dot, m_dot)
}

/// Advance elements by `dt` seconds under two-body motion plus J2 secular
/// drift of RAAN, argument of periapsis and mean anomaly.
pub fn propagate(
    coe: &ClassicalOrbitalElements,
    dt: f64,
    consts: &AstroConstants,
) -> Result<ClassicalOrbitalElements> {
    if dt < 0.0 {
        return Err(Error::InvalidElements(format!("negative propagation interval {dt}")));
    }
    if dt == 0.0 {
        return Ok(*coe);
    }
    let e = coe.eccentricity;
    let (raan_dot, argp_dot, m_dot) = secular_rates(coe, consts);
    let m0 = true_to_mean_anomaly(coe.true_anomaly, e);
    let m = wrap_two_pi(m0 + m_dot * dt);
    let ecc = solve_kepler(m, e)?;
    Ok(ClassicalOrbitalElements {
        raan: wrap_two_pi(coe.raan + raan_dot * dt),
        arg_periapsis: wrap_two_pi(coe.arg_periapsis + argp_dot * dt),
        true_anomaly: eccentric_to_true_anomaly(ecc, e),
        epoch: coe.epoch + dt,
        ..*coe
    })
}

/// Propagate to an absolute epoch (must not precede the element epoch).
pub fn propagate_to(
    coe: &ClassicalOrbitalElements,
    epoch: f64,
    consts: &AstroConstants,
) -> Result<ClassicalOrbitalElements> {
    propagate(coe, epoch - coe.epoch, consts)
}

/// Perifocal-to-ECI rotation applied to a perifocal vector.
fn perifocal_to_eci(v: [f64; 2], raan: f64, argp: f64, inc: f64) -> Vec3 {
    let (so, co) = raan.sin_cos();
    let (sw, cw) = argp.sin_cos();
    let (si, ci) = inc.sin_cos();
    let r11 = co * cw - so * sw * ci;
    let r12 = -co * sw - so * cw * ci;
    let r21 = so * cw + co * sw * ci;
    let r22 = -so * sw + co * cw * ci;
    let r31 = sw * si;
    let r32 = cw * si;
    [
        r11 * v[0] + r12 * v[1],
        r21 * v[0] + r22 * v[1],
        r31 * v[0] + r32 * v[1],
    ]
}

pub fn coe_to_state(coe: &ClassicalOrbitalElements, consts: &AstroConstants) -> StateVector {
    let e = coe.eccentricity;
    let p = coe.semi_latus_rectum();
    let (sn, cn) = coe.true_anomaly.sin_cos();
    let r = p / (1.0 + e * cn);
    let vf = (consts.mu / p).sqrt();
    let pos = perifocal_to_eci([r * cn, r * sn], coe.raan, coe.arg_periapsis, coe.inclination);
    let vel = perifocal_to_eci(
        [-vf * sn, vf * (e + cn)],
        coe.raan,
        coe.arg_periapsis,
        coe.inclination,
    );
    StateVector {
        position: pos,
        velocity: vel,
        time: coe.epoch,
    }
}

const DEGENERATE_E: f64 = 1e-8;
const DEGENERATE_I: f64 = 1e-8;

/// Inverse of [`coe_to_state`].
///
/// Degenerate angles: for e < 1e-8 the argument of periapsis is 0 and the
/// true anomaly is measured from the node; for i < 1e-8 (or within 1e-8 of
/// pi) the RAAN is 0 and the node line is taken as the inertial x axis.
pub fn state_to_coe(state: &StateVector, consts: &AstroConstants) -> Result<ClassicalOrbitalElements> {
    let mu = consts.mu;
    let r = &state.position;
    let v = &state.velocity;
    let rn = norm(r);
    if rn == 0.0 {
        return Err(Error::DegenerateState("zero position".into()));
    }
    let h = cross(r, v);
    let hn = norm(&h);
    if hn <= 1e-10 * rn * norm(v).max(1e-30) {
        return Err(Error::DegenerateState("rectilinear orbit (zero angular momentum)".into()));
    }
    let energy = 0.5 * dot(v, v) - mu / rn;
    if energy >= 0.0 {
        return Err(Error::DegenerateState("orbit is not bound".into()));
    }
    let a = -mu / (2.0 * energy);
    let rv = dot(r, v);
    let vv = dot(v, v);
    let e_vec = scale(&sub(&scale(r, vv - mu / rn), &scale(v, rv)), 1.0 / mu);
    let e = norm(&e_vec);
    let inc = (h[2] / hn).clamp(-1.0, 1.0).acos();

    let equatorial = inc < DEGENERATE_I || (PI - inc) < DEGENERATE_I;
    let circular = e < DEGENERATE_E;

    // node vector (unit), x axis when equatorial
    let node = if equatorial {
        [1.0, 0.0, 0.0]
    } else {
        let n = [-h[1], h[0], 0.0];
        scale(&n, 1.0 / norm(&n))
    };
    let raan = if equatorial { 0.0 } else { wrap_two_pi(node[1].atan2(node[0])) };

    // angle from a reference direction to a vector, measured in the orbit plane
    let hhat = scale(&h, 1.0 / hn);
    let plane_angle = |from: &Vec3, to: &Vec3| -> f64 {
        let c = dot(from, to);
        let s = dot(&cross(from, to), &hhat);
        wrap_two_pi(s.atan2(c))
    };

    let (argp, nu) = if circular {
        (0.0, plane_angle(&node, r))
    } else {
        let argp = plane_angle(&node, &e_vec);
        let nu = plane_angle(&e_vec, r);
        (argp, nu)
    };

    Ok(ClassicalOrbitalElements {
        semi_major_axis: a,
        eccentricity: e,
        inclination: inc,
        raan,
        arg_periapsis: argp,
        true_anomaly: nu,
        epoch: state.time,
    })
}

/// Earth rotation angle at time `t`.
pub fn earth_rotation_angle(t: f64, consts: &AstroConstants) -> f64 {
    consts.earth_rotation_rate * t + consts.theta0
}

/// Spherical-Earth geodetic point to ECI position at time `t`.
pub fn geodetic_to_eci(point: &GeodeticPoint, t: f64, consts: &AstroConstants) -> Vec3 {
    let radius = consts.earth_radius + point.altitude;
    let lon = point.longitude + earth_rotation_angle(t, consts);
    let (sl, cl) = point.latitude.sin_cos();
    let (so, co) = lon.sin_cos();
    [radius * cl * co, radius * cl * so, radius * sl]
}
