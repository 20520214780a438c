//! Agile slewing: Euler-angle pointing, the per-opportunity slew optimizer
//! and the look-angle degraded reward.

use std::fmt::Write as _;

use crate::astro::{
    coe_to_state, cross, dot, norm, propagate_to, scale, AstroConstants, ClassicalOrbitalElements,
    StateVector, TimeGrid, Vec3,
};
use crate::error::{Error, Result};
use crate::visibility::{cone_cos_limit, visible_from, FovSpec};

pub type Mat3 = [[f64; 3]; 3];

pub fn rot_x(alpha: f64) -> Mat3 {
    let (s, c) = alpha.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]]
}

pub fn rot_y(beta: f64) -> Mat3 {
    let (s, c) = beta.sin_cos();
    [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]]
}

pub fn rot_z(gamma: f64) -> Mat3 {
    let (s, c) = gamma.sin_cos();
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// M = Mx(alpha) My(beta) Mz(gamma), expanded.
pub fn rotation_matrix(alpha: f64, beta: f64, gamma: f64) -> Mat3 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    [
        [cb * cg, cb * sg, -sb],
        [sa * sb * cg - ca * sg, sa * sb * sg + ca * cg, sa * cb],
        [ca * sb * cg + sa * sg, ca * sb * sg - sa * cg, ca * cb],
    ]
}

/// D = M(alpha, beta, gamma) N.
pub fn pointing_direction(nadir: &Vec3, angles: [f64; 3]) -> Vec3 {
    mat_vec(&rotation_matrix(angles[0], angles[1], angles[2]), nadir)
}

/// Angle between two non-zero vectors, in [0, pi].
pub fn angular_difference(d: &Vec3, t: &Vec3) -> Result<f64> {
    let nd = norm(d);
    let nt = norm(t);
    if nd == 0.0 || nt == 0.0 {
        return Err(Error::Geometry("angular difference of a zero vector".into()));
    }
    Ok((dot(d, t) / (nd * nt)).clamp(-1.0, 1.0).acos())
}

/// Local-vertical local-horizontal basis as ECI unit vectors `[x, y, z]`:
/// z to nadir, x along the velocity component normal to the radius, y = z x x.
pub fn lvlh_basis(state: &StateVector) -> [Vec3; 3] {
    let r = norm(&state.position);
    let z = scale(&state.position, -1.0 / r);
    let rhat = scale(&state.position, 1.0 / r);
    let vr = dot(&state.velocity, &rhat);
    let vt = [
        state.velocity[0] - vr * rhat[0],
        state.velocity[1] - vr * rhat[1],
        state.velocity[2] - vr * rhat[2],
    ];
    let x = scale(&vt, 1.0 / norm(&vt));
    let y = cross(&z, &x);
    [x, y, z]
}

/// Unit ECI boresight of a satellite slewed by `angles` from nadir.
pub fn slewed_axis(state: &StateVector, angles: [f64; 3]) -> Vec3 {
    let basis = lvlh_basis(state);
    let d = pointing_direction(&[0.0, 0.0, 1.0], angles);
    let mut out = [0.0; 3];
    for (axis, comp) in basis.iter().zip(d) {
        for i in 0..3 {
            out[i] += axis[i] * comp;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgilityConfig {
    /// Per-axis slew rate limits (rad/s).
    pub max_rate: [f64; 3],
    /// Euler angle limit zeta (rad), shared by all axes.
    pub max_angle: f64,
    /// Attitude control step (s).
    pub control_step: f64,
}

impl AgilityConfig {
    /// 3 deg/s on every axis, 35 deg limit, control every 30 minutes.
    pub fn reference() -> Self {
        Self {
            max_rate: [3f64.to_radians(); 3],
            max_angle: 35f64.to_radians(),
            control_step: 1800.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_rate.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Config("slew rates must be non-negative".into()));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.max_angle) {
            return Err(Error::Config("slew angle limit must lie in [0, pi/2]".into()));
        }
        if !(self.control_step > 0.0) {
            return Err(Error::Config("control step must be positive".into()));
        }
        Ok(())
    }

    /// Largest per-opportunity change on each axis.
    pub fn max_step(&self) -> [f64; 3] {
        self.max_rate.map(|r| r * self.control_step)
    }
}

/// Euler angles per control opportunity; `angles[0]` is opportunity 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SlewSchedule {
    pub angles: Vec<[f64; 3]>,
    /// Sum of weighted angular differences achieved (rad).
    pub objective: f64,
}

impl SlewSchedule {
    pub fn nadir(num_controls: usize) -> Self {
        Self {
            angles: vec![[0.0; 3]; num_controls],
            objective: 0.0,
        }
    }

    /// `tau,alpha_deg,beta_deg,gamma_deg`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,alpha_deg,beta_deg,gamma_deg\n");
        for (i, a) in self.angles.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.9},{:.9},{:.9}",
                i + 1,
                a[0].to_degrees(),
                a[1].to_degrees(),
                a[2].to_degrees()
            );
        }
        s
    }
}

/// Feasibility slack for the rate and angle boxes.
pub const SCHEDULE_TOL: f64 = 1e-12;

/// Check angle limits and rate limits, starting from all-zero angles.
pub fn check_schedule(schedule: &SlewSchedule, config: &AgilityConfig) -> Result<()> {
    let step = config.max_step();
    let mut prev = [0.0; 3];
    for (tau, a) in schedule.angles.iter().enumerate() {
        for axis in 0..3 {
            if a[axis].abs() > config.max_angle + SCHEDULE_TOL {
                return Err(Error::Infeasible(format!(
                    "opportunity {}: axis {axis} angle {} exceeds limit",
                    tau + 1,
                    a[axis]
                )));
            }
            if (a[axis] - prev[axis]).abs() > step[axis] + SCHEDULE_TOL {
                return Err(Error::Infeasible(format!(
                    "opportunity {}: axis {axis} slew exceeds rate limit",
                    tau + 1
                )));
            }
        }
        prev = *a;
    }
    Ok(())
}

/// A target to point at, with its objective weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTarget {
    pub position: Vec3,
    pub weight: f64,
}

struct Opportunity {
    /// unit LVLH directions to targets with weights
    targets: Vec<(Vec3, f64)>,
}

impl Opportunity {
    fn new(state: &StateVector, targets: &[WeightedTarget]) -> Self {
        let basis = lvlh_basis(state);
        let dirs = targets
            .iter()
            .filter(|t| t.weight > 0.0)
            .filter_map(|t| {
                let d = [
                    t.position[0] - state.position[0],
                    t.position[1] - state.position[1],
                    t.position[2] - state.position[2],
                ];
                let n = norm(&d);
                (n > 0.0).then(|| {
                    let u = scale(&d, 1.0 / n);
                    ([dot(&basis[0], &u), dot(&basis[1], &u), dot(&basis[2], &u)], t.weight)
                })
            })
            .collect();
        Self { targets: dirs }
    }

    /// Weighted sum of angular differences between boresight and targets.
    fn objective(&self, a: [f64; 3]) -> f64 {
        let d = pointing_direction(&[0.0, 0.0, 1.0], a);
        self.targets
            .iter()
            .map(|(u, w)| w * angular_difference(&d, u).unwrap_or(0.0))
            .sum()
    }

    /// Smooth evaluation used inside the search, with its gradient.
    fn value_and_grad(&self, a: [f64; 3]) -> (f64, [f64; 3]) {
        let (sa, ca) = a[0].sin_cos();
        let (sb, cb) = a[1].sin_cos();
        let d = [-sb, sa * cb, ca * cb];
        let da = [0.0, ca * cb, -sa * cb];
        let db = [-cb, -sa * sb, -ca * sb];
        let mut f = 0.0;
        let mut g = [0.0; 3];
        for (u, w) in &self.targets {
            let c = dot(&d, u);
            let s = norm(&cross(&d, u));
            f += w * s.atan2(c);
            if s > 1e-15 {
                g[0] -= w * dot(u, &da) / s;
                g[1] -= w * dot(u, &db) / s;
            }
        }
        (f, g)
    }
}

fn l1(a: &[f64; 3]) -> f64 {
    a[0].abs() + a[1].abs() + a[2].abs()
}

fn project(x: [f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> [f64; 3] {
    [
        x[0].clamp(lo[0], hi[0]),
        x[1].clamp(lo[1], hi[1]),
        x[2].clamp(lo[2], hi[2]),
    ]
}

/// Projected gradient descent with Armijo backtracking on the box.
fn refine(op: &Opportunity, start: [f64; 3], lo: &[f64; 3], hi: &[f64; 3]) -> ([f64; 3], f64) {
    let mut x = project(start, lo, hi);
    let (mut f, mut g) = op.value_and_grad(x);
    let mut step = 0.5;
    for _ in 0..500 {
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let mut accepted = false;
        let mut trial = step;
        while trial > 1e-16 {
            let cand = project(
                [x[0] - trial * g[0], x[1] - trial * g[1], x[2] - trial * g[2]],
                lo,
                hi,
            );
            let moved = [cand[0] - x[0], cand[1] - x[1], cand[2] - x[2]];
            let decrease = -(g[0] * moved[0] + g[1] * moved[1] + g[2] * moved[2]);
            if moved.iter().all(|m| *m == 0.0) {
                break;
            }
            let (fc, gc) = op.value_and_grad(cand);
            if fc <= f - 1e-4 * decrease {
                x = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (trial * 4.0).min(1.0);
    }
    (x, f)
}

const GRID_POINTS: usize = 7;
const REFINE_STARTS: usize = 4;
const TIE_TOL: f64 = 1e-12;

fn better(cand: ([f64; 3], f64), best: &([f64; 3], f64)) -> bool {
    cand.1 < best.1 - TIE_TOL || (cand.1 <= best.1 + TIE_TOL && l1(&cand.0) < l1(&best.0))
}

/// Minimise one opportunity's objective over the feasible box.
fn solve_opportunity(op: &Opportunity, lo: &[f64; 3], hi: &[f64; 3], prev: [f64; 3]) -> [f64; 3] {
    let zero = project([0.0; 3], lo, hi);
    if op.targets.is_empty() {
        return zero;
    }
    let axis_points = |axis: usize| -> Vec<f64> {
        (0..GRID_POINTS)
            .map(|i| lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect()
    };
    let (ga, gb, gg) = (axis_points(0), axis_points(1), axis_points(2));
    let mut grid: Vec<([f64; 3], f64)> = Vec::with_capacity(GRID_POINTS.pow(3));
    for &a in &ga {
        for &b in &gb {
            for &c in &gg {
                let x = [a, b, c];
                grid.push((x, op.value_and_grad(x).0));
            }
        }
    }
    grid.sort_by(|p, q| p.1.total_cmp(&q.1).then(l1(&p.0).total_cmp(&l1(&q.0))));

    let mut starts: Vec<[f64; 3]> = vec![prev, zero];
    starts.extend(grid.iter().take(REFINE_STARTS).map(|p| p.0));

    let mut best = (zero, op.objective(zero));
    for s in starts {
        let (x, _) = refine(op, s, lo, hi);
        let cand = (x, op.objective(x));
        if better(cand, &best) {
            best = cand;
        }
    }
    best.0
}

/// Sequential slew planning for one satellite.
///
/// `targets[tau - 1]` lists the weighted targets for control opportunity
/// `tau`; the satellite state used is the one at the first time step of that
/// opportunity's interval. Each opportunity is solved over the angle box
/// intersected with the rate box around the previous angles; if the summed
/// objective ends up worse than holding nadir, the nadir schedule is returned.
pub fn optimize_slew_schedule(
    orbit: &ClassicalOrbitalElements,
    targets: &[Vec<WeightedTarget>],
    config: &AgilityConfig,
    grid: &TimeGrid,
    consts: &AstroConstants,
) -> Result<SlewSchedule> {
    config.validate()?;
    if (config.control_step - grid.control_step).abs() > 1e-9 {
        return Err(Error::Config("agility control step differs from the time grid".into()));
    }
    let n = grid.num_controls();
    if targets.len() != n {
        return Err(Error::Dimension(format!(
            "{} opportunity target lists for {n} control opportunities",
            targets.len()
        )));
    }
    let zeta = config.max_angle;
    let max_step = config.max_step();
    let mut prev = [0.0f64; 3];
    let mut angles = Vec::with_capacity(n);
    let mut objective = 0.0;
    let mut nadir_objective = 0.0;
    for (tau, tgts) in targets.iter().enumerate() {
        let step = 1 + tau * grid.steps_per_control();
        let state = coe_to_state(&propagate_to(orbit, grid.time_of_step(step), consts)?, consts);
        let op = Opportunity::new(&state, tgts);
        let lo = [0, 1, 2].map(|i| (-zeta).max(prev[i] - max_step[i]));
        let hi = [0, 1, 2].map(|i| zeta.min(prev[i] + max_step[i]));
        let x = solve_opportunity(&op, &lo, &hi, prev);
        objective += op.objective(x);
        nadir_objective += op.objective([0.0; 3]);
        angles.push(x);
        prev = x;
    }
    if objective > nadir_objective {
        return Ok(SlewSchedule {
            angles: vec![[0.0; 3]; n],
            objective: nadir_objective,
        });
    }
    Ok(SlewSchedule { angles, objective })
}

/// Objective of an arbitrary schedule on the same opportunities.
pub fn schedule_objective(
    orbit: &ClassicalOrbitalElements,
    targets: &[Vec<WeightedTarget>],
    schedule: &SlewSchedule,
    grid: &TimeGrid,
    consts: &AstroConstants,
) -> Result<f64> {
    let mut total = 0.0;
    for (tau, (tgts, a)) in targets.iter().zip(&schedule.angles).enumerate() {
        let step = 1 + tau * grid.steps_per_control();
        let state = coe_to_state(&propagate_to(orbit, grid.time_of_step(step), consts)?, consts);
        total += Opportunity::new(&state, tgts).objective(*a);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgilityScore {
    pub total_reward: f64,
    pub per_step_reward: Vec<f64>,
    pub objective_value: f64,
}

/// Per-step visibility with the boresight slewed by the schedule's angles.
///
/// `step_targets[t - 1]` holds the ECI positions of the targets that count at
/// global step `t`; the step is visible when any of them falls in the cone.
pub fn slewed_visibility(
    orbit: &ClassicalOrbitalElements,
    schedule: &SlewSchedule,
    step_targets: &[Vec<Vec3>],
    fov: &FovSpec,
    grid: &TimeGrid,
    consts: &AstroConstants,
) -> Result<Vec<bool>> {
    if step_targets.len() != grid.num_steps {
        return Err(Error::Dimension("step targets must cover every time step".into()));
    }
    let cos_limit = cone_cos_limit(fov.half_angle);
    let mut out = Vec::with_capacity(grid.num_steps);
    for (i, tgts) in step_targets.iter().enumerate() {
        let t = i + 1;
        if tgts.is_empty() {
            out.push(false);
            continue;
        }
        let tau = grid.control_of_step(t);
        let angles = schedule
            .angles
            .get(tau - 1)
            .ok_or_else(|| Error::Dimension(format!("schedule has no opportunity {tau}")))?;
        let state = coe_to_state(&propagate_to(orbit, grid.time_of_step(t), consts)?, consts);
        let axis = slewed_axis(&state, *angles);
        out.push(
            tgts.iter()
                .any(|p| visible_from(&state.position, p, cos_limit, &axis, consts.earth_radius)),
        );
    }
    Ok(out)
}

/// Degraded reward: each visible step earns
/// 1 - (|alpha| + |beta| + |gamma|) / (2 (3 zeta)) for the angles of its
/// control opportunity.
pub fn score_agility(
    schedule: &SlewSchedule,
    visible: &[bool],
    grid: &TimeGrid,
    config: &AgilityConfig,
) -> AgilityScore {
    let denom = 2.0 * 3.0 * config.max_angle;
    let per_step_reward: Vec<f64> = visible
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !v {
                return 0.0;
            }
            let tau = grid.control_of_step(i + 1);
            let a = schedule.angles.get(tau - 1).copied().unwrap_or([0.0; 3]);
            if denom == 0.0 {
                1.0
            } else {
                1.0 - l1(&a) / denom
            }
        })
        .collect();
    AgilityScore {
        total_reward: per_step_reward.iter().sum(),
        per_step_reward,
        objective_value: schedule.objective,
    }
}
