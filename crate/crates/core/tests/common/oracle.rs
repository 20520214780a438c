//! Independent reference computations shared by the integration and
//! acceptance tests.

use std::f64::consts::TAU;

use conops_core::agility::{slewed_axis, WeightedTarget};
use conops_core::astro::{
    coe_to_state, cross, dot, geodetic_to_eci, norm, propagate_to, sub, AstroConstants, ClassicalOrbitalElements,
    GeodeticPoint, TimeGrid,
};
use conops_core::maneuver::MIN_PHASING_ALTITUDE;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Angle between two orbit planes from their normals.
pub fn plane_angle(i1: f64, o1: f64, i2: f64, o2: f64) -> f64 {
    let n = |i: f64, o: f64| [i.sin() * o.sin(), -i.sin() * o.cos(), i.cos()];
    let (a, b) = (n(i1, o1), n(i2, o2));
    norm(&cross(&a, &b)).atan2(dot(&a, &b))
}

pub fn plane_oracle(a: f64, i1: f64, o1: f64, i2: f64, o2: f64) -> f64 {
    let c = AstroConstants::default();
    2.0 * c.circular_speed(a) * (0.5 * plane_angle(i1, o1, i2, o2)).sin()
}

/// Phasing by brute force over every revolution pair, with the burn speed
/// taken from the ellipse's periapsis or apoapsis speed.
pub fn phasing_oracle(a: f64, dphi: f64, max_revs: u32) -> f64 {
    let c = AstroConstants::default();
    if dphi == 0.0 {
        return 0.0;
    }
    let period = TAU * (a.powi(3) / c.mu).sqrt();
    let mut best = f64::INFINITY;
    for kt in 1..=max_revs {
        let wait = (kt as f64 + dphi / TAU) * period;
        for kf in 1..=max_revs {
            let p_ph = wait / kf as f64;
            let a_ph = (c.mu * (p_ph / TAU).powi(2)).cbrt();
            let e_ph = (a - a_ph).abs() / a_ph;
            let perigee = a_ph * (1.0 - e_ph);
            if perigee < c.earth_radius + MIN_PHASING_ALTITUDE - 1e-9 {
                continue;
            }
            let v = if a_ph >= a {
                (c.mu * (1.0 + e_ph) / (a_ph * (1.0 - e_ph))).sqrt()
            } else {
                (c.mu * (1.0 - e_ph) / (a_ph * (1.0 + e_ph))).sqrt()
            };
            best = best.min(2.0 * (v - c.circular_speed(a)).abs());
        }
    }
    best
}

pub fn slew_sat() -> ClassicalOrbitalElements {
    ClassicalOrbitalElements::from_degrees(7006.01, 17.07e-4, 97.72, 307.83, 77.52, 104.88)
}

/// Sub-satellite latitude/longitude at time `t`, in radians.
fn ground_point(orbit: &ClassicalOrbitalElements, t: f64, c: &AstroConstants) -> (f64, f64) {
    let r = coe_to_state(&propagate_to(orbit, t, c).unwrap(), c).position;
    let lat = (r[2] / norm(&r)).asin();
    let lon = r[1].atan2(r[0]) - (c.theta0 + c.earth_rotation_rate * t);
    (lat, lon)
}

/// Up to two targets scattered a few degrees around the ground track at
/// each opportunity.
pub fn random_targets(rng: &mut ChaCha8Rng, n_ops: usize, grid: &TimeGrid, c: &AstroConstants) -> Vec<Vec<WeightedTarget>> {
    let orbit = slew_sat();
    (0..n_ops)
        .map(|tau| {
            let t = grid.time_of_step(1 + tau * grid.steps_per_control());
            let (lat, lon) = ground_point(&orbit, t, c);
            (0..rng.gen_range(0..=2))
                .map(|_| {
                    let p = GeodeticPoint::new(
                        (lat + rng.gen_range(-0.12..0.12)).clamp(-1.5, 1.5),
                        lon + rng.gen_range(-0.12..0.12),
                        0.0,
                    )
                    .unwrap();
                    WeightedTarget {
                        position: geodetic_to_eci(&p, t, c),
                        weight: rng.gen_range(0.2..2.0),
                    }
                })
                .collect()
        })
        .collect()
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm(&cross(a, b)).atan2(dot(a, b))
}

/// Best objective over a 5 degree grid of the angle box, opportunity by
/// opportunity (the rate box is wider than the angle box at 3 deg/s over
/// 30 minutes, so opportunities decouple).
pub fn slew_grid_oracle(targets: &[Vec<WeightedTarget>], grid: &TimeGrid, c: &AstroConstants) -> f64 {
    let orbit = slew_sat();
    let steps: Vec<f64> = (-7..=7).map(|i| (5.0 * i as f64).to_radians()).collect();
    let mut total = 0.0;
    for (tau, tgts) in targets.iter().enumerate() {
        let t = grid.time_of_step(1 + tau * grid.steps_per_control());
        let st = coe_to_state(&propagate_to(&orbit, t, c).unwrap(), c);
        let mut best = f64::INFINITY;
        for &a in &steps {
            for &b in &steps {
                for &g in &steps {
                    let axis = slewed_axis(&st, [a, b, g]);
                    let f: f64 = tgts
                        .iter()
                        .map(|w| w.weight * angle(&axis, &sub(&w.position, &st.position)))
                        .sum();
                    best = best.min(f);
                }
            }
        }
        total += best;
    }
    total
}
