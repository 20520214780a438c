//! Pointing geometry and the binary visibility tensor `V[s][k][j][t][p]`.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::astro::{
    coe_to_state, dot, norm, propagate_to, scale, sub, AstroConstants, ClassicalOrbitalElements,
    StateVector, TimeGrid, Vec3,
};
use crate::error::{Error, Result};

/// Where the sensor cone is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    Nadir,
    PointingDirection,
}

/// Conical field of view described by its half-angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FovSpec {
    pub half_angle: f64,
    pub axis_mode: AxisMode,
}

impl FovSpec {
    pub fn nadir_degrees(half_angle_deg: f64) -> Result<Self> {
        Self::new(half_angle_deg.to_radians(), AxisMode::Nadir)
    }

    pub fn new(half_angle: f64, axis_mode: AxisMode) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!(
                "FOV half-angle {half_angle} rad must lie in (0, pi/2)"
            )));
        }
        Ok(Self {
            half_angle,
            axis_mode,
        })
    }
}

/// Cone boundary slack; points on the boundary count as inside.
const CONE_TOL: f64 = 1e-12;
/// The occluding sphere sits 1 mm below the surface so sea-level targets are
/// never occluded by themselves.
const OCCLUSION_MARGIN_KM: f64 = 1e-6;

/// Unit vector from the satellite to the target.
pub fn target_pointing(sat_pos: &Vec3, target_pos: &Vec3) -> Result<Vec3> {
    let d = sub(target_pos, sat_pos);
    let n = norm(&d);
    if n == 0.0 {
        return Err(Error::Geometry("satellite and target positions coincide".into()));
    }
    Ok(scale(&d, 1.0 / n))
}

/// True when the segment satellite -> target stays outside the Earth sphere.
pub fn line_of_sight(sat_pos: &Vec3, target_pos: &Vec3, earth_radius: f64) -> bool {
    let occ = earth_radius - OCCLUSION_MARGIN_KM;
    let d = sub(sat_pos, target_pos);
    let pd = dot(target_pos, &d);
    let dd = dot(&d, &d);
    let pp = dot(target_pos, target_pos);
    let min_sq = if pd >= 0.0 || dd == 0.0 {
        pp
    } else {
        let s = (-pd / dd).min(1.0);
        pp + 2.0 * s * pd + s * s * dd
    };
    min_sq >= occ * occ
}

/// Cone containment plus Earth line-of-sight.
pub fn is_visible(
    sat_state: &StateVector,
    target_eci: &Vec3,
    fov: &FovSpec,
    cone_axis: &Vec3,
    consts: &AstroConstants,
) -> bool {
    visible_from(
        &sat_state.position,
        target_eci,
        cone_cos_limit(fov.half_angle),
        cone_axis,
        consts.earth_radius,
    )
}

/// Cosine threshold for a cone of `half_angle`, boundary inclusive.
#[inline]
pub(crate) fn cone_cos_limit(half_angle: f64) -> f64 {
    (half_angle + CONE_TOL).cos()
}

#[inline]
pub(crate) fn visible_from(
    sat_pos: &Vec3,
    target: &Vec3,
    cos_limit: f64,
    axis: &Vec3,
    earth_radius: f64,
) -> bool {
    let d = sub(target, sat_pos);
    let dn = norm(&d);
    if dn == 0.0 {
        return false;
    }
    let an = norm(axis);
    if dot(axis, &d) < cos_limit * an * dn {
        return false;
    }
    line_of_sight(sat_pos, target, earth_radius)
}

/// Packed `V[s][k][j][t][p]`, 0-based indices, `p` fastest then `t`, `j`,
/// `k`, `s`. Bit `i` lives in word `i / 64` at bit `i % 64`; the byte dump is
/// the little-endian byte sequence of those words truncated to ceil(n/8).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityTensor {
    dims: [usize; 5],
    /// J_s^k for s in 1..=S, indexed (s-1)*K + k.
    slot_counts: Vec<usize>,
    bits: Vec<u64>,
}

impl VisibilityTensor {
    pub fn zeros(stages: usize, sats: usize, slots: usize, steps: usize, targets: usize) -> Self {
        let n = stages * sats * slots * steps * targets;
        Self {
            dims: [stages, sats, slots, steps, targets],
            slot_counts: vec![slots; stages * sats],
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn with_slot_counts(
        stages: usize,
        sats: usize,
        steps: usize,
        targets: usize,
        slot_counts: Vec<usize>,
    ) -> Result<Self> {
        if slot_counts.len() != stages * sats {
            return Err(Error::Dimension("slot counts must be given per (stage, satellite)".into()));
        }
        let jmax = slot_counts.iter().copied().max().unwrap_or(0);
        let mut v = Self::zeros(stages, sats, jmax, steps, targets);
        v.slot_counts = slot_counts;
        Ok(v)
    }

    /// (S, K, J_max, T_s, P)
    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn num_stages(&self) -> usize {
        self.dims[0]
    }
    pub fn num_sats(&self) -> usize {
        self.dims[1]
    }
    pub fn max_slots(&self) -> usize {
        self.dims[2]
    }
    pub fn steps_per_stage(&self) -> usize {
        self.dims[3]
    }
    pub fn num_targets(&self) -> usize {
        self.dims[4]
    }

    /// J_s^k for 0-based stage `s` (stage 1 is index 0).
    pub fn slot_count(&self, s: usize, k: usize) -> usize {
        self.slot_counts[s * self.dims[1] + k]
    }

    #[inline]
    fn index(&self, s: usize, k: usize, j: usize, t: usize, p: usize) -> usize {
        let [_, kk, jj, tt, pp] = self.dims;
        (((s * kk + k) * jj + j) * tt + t) * pp + p
    }

    /// 0-based indices.
    #[inline]
    pub fn get(&self, s: usize, k: usize, j: usize, t: usize, p: usize) -> bool {
        let i = self.index(s, k, j, t, p);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, s: usize, k: usize, j: usize, t: usize, p: usize, value: bool) {
        let i = self.index(s, k, j, t, p);
        if value {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Split a single-stage tensor into `stages` equal stages, keeping only
    /// the slots listed in `subset[k]` (in that order) for satellite `k`.
    /// Because slot orbits are defined at a common epoch, this equals the
    /// tensor computed directly on the multi-stage grid.
    pub fn restage(&self, stages: usize, subset: &[Vec<usize>]) -> Result<Self> {
        let [s1, sats, _, steps, points] = self.dims;
        if s1 != 1 {
            return Err(Error::Dimension("restaging needs a single-stage tensor".into()));
        }
        if stages == 0 || steps % stages != 0 {
            return Err(Error::InvalidGrid(format!("{steps} steps cannot be split into {stages} stages")));
        }
        if subset.len() != sats {
            return Err(Error::Dimension("one slot subset per satellite required".into()));
        }
        for (k, sub) in subset.iter().enumerate() {
            if sub.iter().any(|&j| j >= self.slot_count(0, k)) {
                return Err(Error::Dimension(format!("satellite {k}: slot subset out of range")));
            }
        }
        let ts = steps / stages;
        let counts = (0..stages).flat_map(|_| subset.iter().map(Vec::len)).collect();
        let mut out = Self::with_slot_counts(stages, sats, ts, points, counts)?;
        let block = steps * points;
        for (k, sub) in subset.iter().enumerate() {
            for (jn, &j) in sub.iter().enumerate() {
                let start = self.index(0, k, j, 0, 0);
                let mut i = start;
                while i < start + block {
                    let word = self.bits[i / 64] >> (i % 64);
                    if word == 0 {
                        i += 64 - i % 64;
                        continue;
                    }
                    i += word.trailing_zeros() as usize;
                    if i >= start + block {
                        break;
                    }
                    let local = i - start;
                    let (t, p) = (local / points, local % points);
                    out.set(t / ts, k, jn, t % ts, p, true);
                    i += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn packed_bytes(&self) -> Vec<u8> {
        let nbytes = self.len().div_ceil(8);
        let mut out = Vec::with_capacity(self.bits.len() * 8);
        for w in &self.bits {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(nbytes);
        out
    }

    /// Dump: five little-endian u64 dimensions followed by the packed bits.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&self.packed_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    /// Inverse of [`write_to`](Self::write_to). Slot counts are taken as
    /// J_max everywhere since the dump does not carry them.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut dims = [0usize; 5];
        for d in dims.iter_mut() {
            *d = read_u64(&mut r)? as usize;
        }
        let mut t = Self::zeros(dims[0], dims[1], dims[2], dims[3], dims[4]);
        let nbytes = t.len().div_ceil(8);
        let mut buf = vec![0u8; nbytes];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated visibility bitset".into()))?;
        for (i, chunk) in buf.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            t.bits[i] = u64::from_le_bytes(word);
        }
        Ok(t)
    }

    pub(crate) fn set_slot_counts(&mut self, counts: Vec<usize>) -> Result<()> {
        if counts.len() != self.dims[0] * self.dims[1] {
            return Err(Error::Dimension("slot counts length".into()));
        }
        if counts.iter().any(|&c| c > self.dims[2]) {
            return Err(Error::Dimension("slot count exceeds J_max".into()));
        }
        self.slot_counts = counts;
        Ok(())
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

/// Per-satellite, per-stage candidate slot lists: `slots[k][s - 1]`.
pub type SlotLists = Vec<Vec<Vec<ClassicalOrbitalElements>>>;

/// Build `V` with a nadir cone axis.
///
/// `targets[g][p]` is the ECI position of target `p` at 0-based global step
/// `g`; it must cover every step of the grid. Work is split over
/// (stage, satellite, slot) triples with disjoint writes.
pub fn compute_vtw_tensor(
    slots: &SlotLists,
    targets: &[Vec<Vec3>],
    grid: &TimeGrid,
    fov: &FovSpec,
    consts: &AstroConstants,
) -> Result<VisibilityTensor> {
    let stages = grid.num_stages;
    let sats = slots.len();
    let steps = grid.steps_per_stage;
    if targets.len() != grid.num_steps {
        return Err(Error::Dimension(format!(
            "target positions cover {} steps, grid has {}",
            targets.len(),
            grid.num_steps
        )));
    }
    let num_targets = targets.first().map_or(0, |t| t.len());
    if targets.iter().any(|t| t.len() != num_targets) {
        return Err(Error::Dimension("ragged target table".into()));
    }
    let mut counts = Vec::with_capacity(stages * sats);
    for s in 0..stages {
        for (k, per_stage) in slots.iter().enumerate() {
            if per_stage.len() != stages {
                return Err(Error::Dimension(format!(
                    "satellite {k} has slot lists for {} stages, grid has {stages}",
                    per_stage.len()
                )));
            }
            counts.push(per_stage[s].len());
        }
    }
    let mut tensor = VisibilityTensor::with_slot_counts(stages, sats, steps, num_targets, counts)?;
    let jmax = tensor.max_slots();
    if tensor.is_empty() {
        return Ok(tensor);
    }

    let jobs: Vec<(usize, usize, usize)> = (0..stages)
        .flat_map(|s| (0..sats).flat_map(move |k| (0..jmax).map(move |j| (s, k, j))))
        .collect();
    let rows: Vec<Result<Vec<(usize, usize)>>> = jobs
        .par_iter()
        .map(|&(s, k, j)| {
            let list = &slots[k][s];
            if j >= list.len() {
                return Ok(Vec::new());
            }
            let slot = &list[j];
            let cos_limit = cone_cos_limit(fov.half_angle);
            let mut hits = Vec::new();
            for t in 0..steps {
                let g = s * steps + t;
                let time = grid.time_of_step(g + 1);
                let st = coe_to_state(&propagate_to(slot, time, consts)?, consts);
                let axis = scale(&st.position, -1.0);
                for (p, target) in targets[g].iter().enumerate() {
                    if visible_from(&st.position, target, cos_limit, &axis, consts.earth_radius) {
                        hits.push((t, p));
                    }
                }
            }
            Ok(hits)
        })
        .collect();
    for (&(s, k, j), hits) in jobs.iter().zip(rows) {
        for (t, p) in hits? {
            tensor.set(s, k, j, t, p, true);
        }
    }
    Ok(tensor)
}
