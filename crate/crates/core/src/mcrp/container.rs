//! Binary container for solver instances.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "MCRPINST"
//! version  u64      1
//! S K T_s P         u64 each
//! for s in 1..=S, k in 0..K:
//!     rows cols     u64 each
//!     delta_v       rows * cols f64 (row-major, +inf allowed)
//! budget            K f64
//! pi                S * T_s * P f64, p fastest
//! r                 S * T_s * P u32
//! visibility        tensor dump (5 u64 dims + packed bits)
//! ```

use std::io::{Read, Write};

use super::RewardMatrix;
use crate::error::{Error, Result};
use crate::maneuver::{CostBlock, CostMatrix, Strategy};
use crate::visibility::{read_u64, VisibilityTensor};

const MAGIC: &[u8; 8] = b"MCRPINST";
const VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct McrpInstance {
    pub visibility: VisibilityTensor,
    pub rewards: RewardMatrix,
    pub costs: CostMatrix,
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated requirement table".into()))?;
    Ok(u32::from_le_bytes(b))
}

impl McrpInstance {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let [stages, sats, _, steps, points] = self.visibility.dims();
        w.write_all(MAGIC)?;
        for x in [VERSION, stages as u64, sats as u64, steps as u64, points as u64] {
            w.write_all(&x.to_le_bytes())?;
        }
        for s in 1..=stages {
            for k in 0..sats {
                let b = self.costs.block(s, k);
                w.write_all(&(b.rows as u64).to_le_bytes())?;
                w.write_all(&(b.cols as u64).to_le_bytes())?;
                for c in &b.delta_v {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        for b in &self.costs.budget {
            w.write_all(&b.to_le_bytes())?;
        }
        let (pi, req) = self.rewards.raw();
        for v in pi {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in req {
            w.write_all(&v.to_le_bytes())?;
        }
        self.visibility.write_to(&mut w)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("missing magic".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not an instance container".into()));
        }
        let version = read_u64(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = read_u64(&mut r)? as usize;
        }
        let [stages, sats, steps, points] = dims;
        let mut blocks = Vec::with_capacity(stages * sats);
        let mut slot_counts = Vec::with_capacity(stages * sats);
        for _ in 0..stages * sats {
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format("cost block too large".into()))?;
            let delta_v = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            slot_counts.push(cols);
            blocks.push(CostBlock {
                rows,
                cols,
                strategy: vec![Strategy::Unreachable; n],
                delta_v,
            });
        }
        let budget = (0..sats).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let costs = CostMatrix::from_blocks(stages, sats, blocks, budget)?;
        let n = stages * steps * points;
        let pi = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let req = (0..n).map(|_| read_u32(&mut r)).collect::<Result<Vec<_>>>()?;
        let rewards = RewardMatrix::new(stages, steps, points, pi, req)?;
        let mut visibility = VisibilityTensor::read_from(&mut r)?;
        let [vs, vk, _, vt, vp] = visibility.dims();
        if [vs, vk, vt, vp] != [stages, sats, steps, points] {
            return Err(Error::Format("visibility dimensions disagree with header".into()));
        }
        visibility.set_slot_counts(slot_counts)?;
        Ok(Self {
            visibility,
            rewards,
            costs,
        })
    }
}
