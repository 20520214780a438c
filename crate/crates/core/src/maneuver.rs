//! Impulsive transfer costs between near-circular slots, candidate slot
//! grids and the per-stage cost matrix.
//!
//! All formulas use the circular speed `sqrt(mu / a)`; slot eccentricities
//! are small enough that the error is first order in `e`.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::astro::{
    cross, dot, norm, propagate_to, wrap_two_pi, AstroConstants, ClassicalOrbitalElements,
    TimeGrid, Vec3,
};
use crate::error::{Error, Result};
use crate::visibility::SlotLists;

/// Minimum periapsis altitude allowed on a phasing ellipse (km).
pub const MIN_PHASING_ALTITUDE: f64 = 100.0;
/// Default revolution cap for the target slot and the phasing orbit.
pub const DEFAULT_MAX_REVS: u32 = 4;

/// Angles below this are treated as zero when classifying a transfer.
const ANGLE_EPS: f64 = 1e-12;
/// Relative tolerance on matching semi-major axes.
const SMA_REL_TOL: f64 = 1e-6;
/// Costs within this of each other are ties, resolved toward simpler strategies.
const COST_TIE: f64 = 1e-12;

/// Transfer types, ordered from simplest to most involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Stay,
    Phasing,
    Inclination,
    Raan,
    CombinedPlane,
    InclinationPhasing,
    RaanPhasing,
    CombinedPhasing,
    Unreachable,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Stay => "stay",
            Strategy::Phasing => "phasing",
            Strategy::Inclination => "inclination",
            Strategy::Raan => "raan",
            Strategy::CombinedPlane => "combined",
            Strategy::InclinationPhasing => "inclination+phasing",
            Strategy::RaanPhasing => "raan+phasing",
            Strategy::CombinedPhasing => "combined+phasing",
            Strategy::Unreachable => "unreachable",
        }
    }

    fn with_phasing(self) -> Self {
        match self {
            Strategy::Stay | Strategy::Phasing => Strategy::Phasing,
            Strategy::Inclination => Strategy::InclinationPhasing,
            Strategy::Raan => Strategy::RaanPhasing,
            Strategy::CombinedPlane => Strategy::CombinedPhasing,
            other => other,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCost {
    /// km/s; `f64::INFINITY` marks an excluded edge.
    pub delta_v: f64,
    pub strategy: Strategy,
    /// Seconds from the first burn to arrival in the slot.
    pub transfer_time: f64,
}

impl TransferCost {
    pub fn stay() -> Self {
        Self {
            delta_v: 0.0,
            strategy: Strategy::Stay,
            transfer_time: 0.0,
        }
    }

    pub fn unreachable() -> Self {
        Self {
            delta_v: f64::INFINITY,
            strategy: Strategy::Unreachable,
            transfer_time: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta_v.is_finite()
    }
}

/// Two-impulse phasing rendezvous within the orbit's own plane.
///
/// `phase_offset` is how far the target slot trails the satellite, in
/// [0, 2pi). The satellite waits on a phasing ellipse for `k_tfr` of its
/// revolutions while the slot covers `2 pi k_tgt + phase_offset`; every pair
/// with `k_tgt, k_tfr` in `1..=max_revs` is tried and the cheapest kept.
/// Pairs whose ellipse dips below 100 km altitude are skipped; if all are,
/// the cost is infinite.
pub fn phasing_cost(
    orbit: &ClassicalOrbitalElements,
    phase_offset: f64,
    max_revs: u32,
    consts: &AstroConstants,
) -> Result<TransferCost> {
    if max_revs == 0 {
        return Err(Error::Config("max_revs must be at least 1".into()));
    }
    let dphi = wrap_two_pi(phase_offset);
    if dphi == 0.0 {
        return Ok(TransferCost::stay());
    }
    let mu = consts.mu;
    let a = orbit.semi_major_axis;
    let n = consts.mean_motion(a);
    let v_circ = consts.circular_speed(a);
    let floor = consts.earth_radius + MIN_PHASING_ALTITUDE;
    let mut best = TransferCost::unreachable();
    for k_tgt in 1..=max_revs {
        let t_phase = (TAU * k_tgt as f64 + dphi) / n;
        for k_tfr in 1..=max_revs {
            let a_phase = mu.cbrt() * (t_phase / (TAU * k_tfr as f64)).powf(2.0 / 3.0);
            let periapsis = if a_phase >= a { a } else { 2.0 * a_phase - a };
            if periapsis < floor {
                continue;
            }
            let v_burn = (2.0 * mu / a - mu / a_phase).sqrt();
            let dv = 2.0 * (v_burn - v_circ).abs();
            if dv < best.delta_v {
                best = TransferCost {
                    delta_v: dv,
                    strategy: Strategy::Phasing,
                    transfer_time: t_phase,
                };
            }
        }
    }
    Ok(best)
}

fn plane_cost(v: f64, sin_half: f64, strategy: Strategy) -> TransferCost {
    TransferCost {
        delta_v: 2.0 * v * sin_half.abs().min(1.0),
        strategy: if sin_half == 0.0 { Strategy::Stay } else { strategy },
        transfer_time: 0.0,
    }
}

/// Single impulse at a node: `2 v sin(|di| / 2)`.
pub fn inclination_change_cost(
    orbit: &ClassicalOrbitalElements,
    di: f64,
    consts: &AstroConstants,
) -> TransferCost {
    let v = consts.circular_speed(orbit.semi_major_axis);
    plane_cost(v, (0.5 * di).sin(), Strategy::Inclination)
}

/// Node rotation at fixed inclination. The rotation angle satisfies
/// `cos theta = cos^2 i + sin^2 i cos draan`, evaluated here in the
/// cancellation-free form `sin(theta/2) = sin i sin(draan/2)`.
pub fn raan_change_cost(
    orbit: &ClassicalOrbitalElements,
    draan: f64,
    consts: &AstroConstants,
) -> TransferCost {
    let v = consts.circular_speed(orbit.semi_major_axis);
    let s = orbit.inclination.sin() * (0.5 * draan).sin();
    plane_cost(v, s, Strategy::Raan)
}

/// Simultaneous inclination and node change to `i + di`, `raan + draan`.
/// Uses `sin^2(theta/2) = sin^2(di/2) + sin i1 sin i2 sin^2(draan/2)`, the
/// half-angle form of `cos theta = cos i1 cos i2 + sin i1 sin i2 cos draan`.
pub fn combined_plane_cost(
    orbit: &ClassicalOrbitalElements,
    di: f64,
    draan: f64,
    consts: &AstroConstants,
) -> TransferCost {
    let v = consts.circular_speed(orbit.semi_major_axis);
    let s = plane_sin_half(orbit.inclination, di, draan);
    plane_cost(v, s, Strategy::CombinedPlane)
}

fn plane_sin_half(i1: f64, di: f64, draan: f64) -> f64 {
    let i2 = i1 + di;
    let a = (0.5 * di).sin();
    let b = (0.5 * draan).sin();
    (a * a + i1.sin() * i2.sin() * b * b).max(0.0).sqrt()
}

/// In-plane angle of `w` measured from the ascending node of (i, raan).
fn angle_in_plane(w: &Vec3, inclination: f64, raan: f64) -> f64 {
    let (so, co) = raan.sin_cos();
    let node = [co, so, 0.0];
    let (si, ci) = inclination.sin_cos();
    let h = [si * so, -si * co, ci];
    let ninety = cross(&h, &node);
    wrap_two_pi(dot(w, &ninety).atan2(dot(w, &node)))
}

/// Where a satellite at argument of latitude `u` in the `from` plane ends up
/// after the minimal rigid rotation onto the `to` plane (rotation about the
/// planes' line of intersection). Identical planes leave `u` unchanged.
pub fn rotate_arg_latitude(
    u: f64,
    from: &ClassicalOrbitalElements,
    to: &ClassicalOrbitalElements,
) -> f64 {
    let line = cross(&from.plane_normal(), &to.plane_normal());
    let ln = norm(&line);
    if ln < ANGLE_EPS {
        return wrap_two_pi(u);
    }
    let u_from = angle_in_plane(&line, from.inclination, from.raan);
    let u_to = angle_in_plane(&line, to.inclination, to.raan);
    wrap_two_pi(u_to + (u - u_from))
}

fn check_compatible(
    from: &ClassicalOrbitalElements,
    to: &ClassicalOrbitalElements,
) -> Result<()> {
    let a = from.semi_major_axis;
    if (a - to.semi_major_axis).abs() > SMA_REL_TOL * a {
        return Err(Error::Validation(format!(
            "semi-major axes differ ({} km vs {} km); altitude transfers are not modelled",
            a, to.semi_major_axis
        )));
    }
    Ok(())
}

/// Cheapest way from `from` to `to` (both at the same epoch): a plane change
/// at the node line, if the planes differ, followed by phasing for whatever
/// phase error remains.
pub fn transfer_cost(
    from: &ClassicalOrbitalElements,
    to: &ClassicalOrbitalElements,
    max_revs: u32,
    consts: &AstroConstants,
) -> Result<TransferCost> {
    check_compatible(from, to)?;
    let di = to.inclination - from.inclination;
    let draan = crate::astro::wrap_pi(to.raan - from.raan);
    let same_i = di.abs() < ANGLE_EPS;
    let same_raan = draan.abs() < ANGLE_EPS;

    // Plane-change legs that land in the target plane.
    let mut legs: Vec<TransferCost> = Vec::with_capacity(3);
    if same_i && same_raan {
        legs.push(TransferCost::stay());
    } else {
        if same_raan {
            legs.push(inclination_change_cost(from, di, consts));
        }
        if same_i {
            legs.push(raan_change_cost(from, draan, consts));
        }
        legs.push(combined_plane_cost(from, di, draan, consts));
    }

    let u_after = rotate_arg_latitude(from.arg_latitude(), from, to);
    let mut residual = wrap_two_pi(u_after - to.arg_latitude());
    if residual < ANGLE_EPS || TAU - residual < ANGLE_EPS {
        residual = 0.0;
    }
    let phase = phasing_cost(from, residual, max_revs, consts)?;

    let mut best = TransferCost::unreachable();
    for leg in legs {
        let cand = if residual == 0.0 {
            leg
        } else {
            TransferCost {
                delta_v: leg.delta_v + phase.delta_v,
                strategy: leg.strategy.with_phasing(),
                transfer_time: leg.transfer_time + phase.transfer_time,
            }
        };
        if !cand.is_finite() {
            continue;
        }
        let clearly_better = cand.delta_v < best.delta_v - COST_TIE;
        let tie_simpler = (cand.delta_v - best.delta_v).abs() <= COST_TIE && cand.strategy < best.strategy;
        if clearly_better || tie_simpler {
            best = cand;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    PhasingOnly,
    Unrestricted,
}

/// Shape of a slot grid. Plane spans left as `None` are sized from the
/// budget so that the outermost plane costs exactly the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotGridSpec {
    /// Phases per plane (ell).
    pub num_phases: usize,
    /// Planes per axis including the initial one (m).
    pub num_plane_axis: usize,
    pub incl_span: Option<f64>,
    pub raan_span: Option<f64>,
}

impl SlotGridSpec {
    pub fn phasing(num_phases: usize) -> Self {
        Self {
            num_phases,
            num_plane_axis: 1,
            incl_span: None,
            raan_span: None,
        }
    }

    pub fn unrestricted(num_phases: usize, num_plane_axis: usize) -> Self {
        Self {
            num_phases,
            num_plane_axis,
            incl_span: None,
            raan_span: None,
        }
    }

    pub fn num_slots(&self, mode: GridMode) -> usize {
        match mode {
            GridMode::PhasingOnly => self.num_phases,
            GridMode::Unrestricted => self.num_phases * (2 * self.num_plane_axis - 1),
        }
    }
}

/// Inclination offset a single budget-sized impulse buys.
pub fn max_inclination_offset(
    orbit: &ClassicalOrbitalElements,
    budget: f64,
    consts: &AstroConstants,
) -> f64 {
    let v = consts.circular_speed(orbit.semi_major_axis);
    2.0 * (budget / (2.0 * v)).clamp(0.0, 1.0).asin()
}

/// RAAN offset a single budget-sized impulse buys at the orbit's inclination.
pub fn max_raan_offset(
    orbit: &ClassicalOrbitalElements,
    budget: f64,
    consts: &AstroConstants,
) -> f64 {
    let v = consts.circular_speed(orbit.semi_major_axis);
    let half = (budget / (2.0 * v)).clamp(0.0, 1.0);
    let si = orbit.inclination.sin();
    if si == 0.0 {
        return 0.0;
    }
    2.0 * (half / si).clamp(0.0, 1.0).asin()
}

/// Offsets along one plane axis: 0 first, then alternating +step, -step,
/// +2 step, ... with `ceil((m-1)/2)` positive and `floor((m-1)/2)` negative
/// entries; the outermost positive entry sits exactly at `span`.
fn axis_offsets(m: usize, span: f64) -> Vec<f64> {
    let pos = (m - 1).div_ceil(2);
    let neg = (m - 1) / 2;
    let mut out = vec![0.0];
    if pos == 0 {
        return out;
    }
    let step = span / pos as f64;
    for i in 1..=pos {
        out.push(i as f64 * step);
        if i <= neg {
            out.push(-(i as f64) * step);
        }
    }
    out
}

/// Candidate slots around `initial`.
///
/// Index 0 is always `initial` itself. Phasing-only grids hold `ell` slots in
/// the initial plane spaced `2 pi / ell` in argument of latitude from the
/// initial phase, so the `2 ell` grid contains the `ell` grid. Unrestricted
/// grids add `m - 1` planes on each of the inclination and RAAN axes; each
/// plane carries `ell` phases anchored where a pure plane change from the
/// initial slot would arrive.
pub fn generate_slot_grid(
    initial: &ClassicalOrbitalElements,
    spec: &SlotGridSpec,
    budget: f64,
    mode: GridMode,
    consts: &AstroConstants,
) -> Result<Vec<ClassicalOrbitalElements>> {
    if spec.num_phases == 0 || spec.num_plane_axis == 0 {
        return Err(Error::Config("slot grid needs at least one phase and one plane".into()));
    }
    if !(budget >= 0.0) {
        return Err(Error::Config("budget must be non-negative".into()));
    }
    initial.validate(consts)?;

    let mut planes: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    if mode == GridMode::Unrestricted && spec.num_plane_axis > 1 {
        let di = spec
            .incl_span
            .unwrap_or_else(|| max_inclination_offset(initial, budget, consts));
        let dr = spec
            .raan_span
            .unwrap_or_else(|| max_raan_offset(initial, budget, consts));
        let m = spec.num_plane_axis;
        planes.extend(axis_offsets(m, di).into_iter().skip(1).map(|d| (d, 0.0)));
        planes.extend(axis_offsets(m, dr).into_iter().skip(1).map(|d| (0.0, d)));
    }

    let u0 = initial.arg_latitude();
    let mut out = Vec::with_capacity(planes.len() * spec.num_phases);
    for (di, dr) in planes {
        let mut plane = *initial;
        plane.inclination = initial.inclination + di;
        plane.raan = wrap_two_pi(initial.raan + dr);
        if !(0.0..=std::f64::consts::PI).contains(&plane.inclination) {
            return Err(Error::Config(format!(
                "slot plane inclination {} rad leaves [0, pi]; reduce the budget or span",
                plane.inclination
            )));
        }
        let anchor = rotate_arg_latitude(u0, initial, &plane);
        for k in 0..spec.num_phases {
            let mut slot = plane;
            if k == 0 && di == 0.0 && dr == 0.0 {
                out.push(*initial);
                continue;
            }
            let u = anchor + TAU * k as f64 / spec.num_phases as f64;
            slot.true_anomaly = wrap_two_pi(u - slot.arg_periapsis);
            out.push(slot);
        }
    }
    Ok(out)
}

/// One (stage, satellite) block: rows are the previous stage's slots,
/// columns the current stage's.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlock {
    pub rows: usize,
    pub cols: usize,
    pub delta_v: Vec<f64>,
    pub strategy: Vec<Strategy>,
}

impl CostBlock {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta_v[i * self.cols + j]
    }

    pub fn strategy(&self, i: usize, j: usize) -> Strategy {
        self.strategy[i * self.cols + j]
    }
}

/// `c[s][k][i][j]` for stages `1..=S` plus per-satellite budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    num_stages: usize,
    num_sats: usize,
    /// indexed (s - 1) * K + k
    blocks: Vec<CostBlock>,
    pub budget: Vec<f64>,
}

impl CostMatrix {
    pub fn from_blocks(
        num_stages: usize,
        num_sats: usize,
        blocks: Vec<CostBlock>,
        budget: Vec<f64>,
    ) -> Result<Self> {
        if blocks.len() != num_stages * num_sats || budget.len() != num_sats {
            return Err(Error::Dimension("cost blocks or budgets do not match (S, K)".into()));
        }
        for k in 0..num_sats {
            for s in 1..num_stages {
                if blocks[s * num_sats + k].rows != blocks[(s - 1) * num_sats + k].cols {
                    return Err(Error::Dimension(format!(
                        "satellite {k}: stage {} rows do not match stage {} columns",
                        s + 1,
                        s
                    )));
                }
            }
        }
        for b in &blocks {
            if b.delta_v.len() != b.rows * b.cols || b.strategy.len() != b.delta_v.len() {
                return Err(Error::Dimension("cost block storage size".into()));
            }
            if b.delta_v.iter().any(|c| c.is_nan() || *c < 0.0) {
                return Err(Error::Validation("costs must be non-negative".into()));
            }
        }
        Ok(Self {
            num_stages,
            num_sats,
            blocks,
            budget,
        })
    }

    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    pub fn num_sats(&self) -> usize {
        self.num_sats
    }

    /// Block for 1-based stage `s` and satellite `k`.
    pub fn block(&self, s: usize, k: usize) -> &CostBlock {
        &self.blocks[(s - 1) * self.num_sats + k]
    }

    pub fn get(&self, s: usize, k: usize, i: usize, j: usize) -> f64 {
        self.block(s, k).get(i, j)
    }

    /// `stage,sat,from_slot,to_slot,delta_v_km_s,strategy`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,sat,from_slot,to_slot,delta_v_km_s,strategy\n");
        for s in 1..=self.num_stages {
            for k in 0..self.num_sats {
                let b = self.block(s, k);
                for i in 0..b.rows {
                    for j in 0..b.cols {
                        let c = b.get(i, j);
                        let cs = if c.is_finite() { format!("{c:.9}") } else { "inf".into() };
                        let _ = writeln!(out, "{s},{k},{i},{j},{cs},{}", b.strategy(i, j));
                    }
                }
            }
        }
        out
    }
}

/// Costs for every stage transition.
///
/// `initial[k]` is satellite k's stage-0 slot and `slots[k][s - 1]` its
/// stage-s candidates. Transition into stage `s` happens at the stage's start
/// epoch, with both slots propagated there.
pub fn build_cost_matrix(
    initial: &[ClassicalOrbitalElements],
    slots: &SlotLists,
    grid: &TimeGrid,
    max_revs: u32,
    budget: f64,
    consts: &AstroConstants,
) -> Result<CostMatrix> {
    let sats = initial.len();
    if slots.len() != sats {
        return Err(Error::Dimension("one slot list per satellite required".into()));
    }
    let stages = grid.num_stages;
    if slots.iter().any(|l| l.len() != stages) {
        return Err(Error::Dimension("slot lists must cover every stage".into()));
    }
    let jobs: Vec<(usize, usize)> = (1..=stages)
        .flat_map(|s| (0..sats).map(move |k| (s, k)))
        .collect();
    let blocks: Vec<Result<CostBlock>> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let epoch = grid.stage_start(s);
            let prev: Vec<ClassicalOrbitalElements> = if s == 1 {
                vec![initial[k]]
            } else {
                slots[k][s - 2].clone()
            };
            let prop = |v: &[ClassicalOrbitalElements]| -> Result<Vec<ClassicalOrbitalElements>> {
                v.iter().map(|c| propagate_to(c, epoch, consts)).collect()
            };
            let from = prop(&prev)?;
            let to = prop(&slots[k][s - 1])?;
            let mut delta_v = Vec::with_capacity(from.len() * to.len());
            let mut strategy = Vec::with_capacity(from.len() * to.len());
            for (i, f) in from.iter().enumerate() {
                for (j, t) in to.iter().enumerate() {
                    let same = prev[i] == slots[k][s - 1][j];
                    let c = if same {
                        TransferCost::stay()
                    } else {
                        transfer_cost(f, t, max_revs, consts)?
                    };
                    delta_v.push(c.delta_v);
                    strategy.push(c.strategy);
                }
            }
            Ok(CostBlock {
                rows: from.len(),
                cols: to.len(),
                delta_v,
                strategy,
            })
        })
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    CostMatrix::from_blocks(stages, sats, blocks, vec![budget; sats])
}
