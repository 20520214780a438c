//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod oracle;

use conops_core::maneuver::{CostBlock, CostMatrix, Strategy};
use conops_core::mcrp::RewardMatrix;
use conops_core::visibility::VisibilityTensor;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub max_sats: usize,
    pub max_stages: usize,
    pub max_slots: usize,
    pub max_steps: usize,
    pub max_points: usize,
    /// Draw requirements of 2 on some entries.
    pub multi_cover: bool,
    /// Draw fractional rewards instead of 0/1.
    pub fractional: bool,
}

impl InstanceShape {
    pub fn small() -> Self {
        Self {
            max_sats: 2,
            max_stages: 2,
            max_slots: 4,
            max_steps: 20,
            max_points: 3,
            multi_cover: false,
            fractional: false,
        }
    }
}

pub struct Instance {
    pub v: VisibilityTensor,
    pub rewards: RewardMatrix,
    pub costs: CostMatrix,
}

/// Random solver instance: slot counts per (stage, satellite), sparse-ish
/// visibility, unit or fractional rewards, costs with some unreachable
/// transitions and a zero-cost stay on slot 0.
pub fn random_instance<R: Rng>(rng: &mut R, shape: &InstanceShape) -> Instance {
    let sats = rng.gen_range(1..=shape.max_sats);
    let stages = rng.gen_range(1..=shape.max_stages);
    let steps = rng.gen_range(1..=shape.max_steps);
    let points = rng.gen_range(1..=shape.max_points);
    let counts: Vec<usize> = (0..stages * sats).map(|_| rng.gen_range(1..=shape.max_slots)).collect();
    let mut v = VisibilityTensor::with_slot_counts(stages, sats, steps, points, counts.clone()).unwrap();
    let density = rng.gen_range(0.05..0.6);
    for s in 0..stages {
        for k in 0..sats {
            for j in 0..counts[s * sats + k] {
                for t in 0..steps {
                    for p in 0..points {
                        if rng.gen_bool(density) {
                            v.set(s, k, j, t, p, true);
                        }
                    }
                }
            }
        }
    }
    let n = stages * steps * points;
    let pi: Vec<f64> = (0..n)
        .map(|_| {
            if !rng.gen_bool(0.7) {
                0.0
            } else if shape.fractional {
                rng.gen_range(0.1..2.0)
            } else {
                1.0
            }
        })
        .collect();
    let req: Vec<u32> = (0..n)
        .map(|_| if shape.multi_cover && rng.gen_bool(0.4) { 2 } else { 1 })
        .collect();
    let rewards = RewardMatrix::new(stages, steps, points, pi, req).unwrap();

    let mut blocks = Vec::with_capacity(stages * sats);
    for s in 0..stages {
        for k in 0..sats {
            let rows = if s == 0 { 1 } else { counts[(s - 1) * sats + k] };
            let cols = counts[s * sats + k];
            let mut delta_v = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    let c = if i == j {
                        0.0
                    } else if rng.gen_bool(0.1) {
                        f64::INFINITY
                    } else {
                        // coarse values so equal-cost ties actually occur
                        (rng.gen_range(1..=12) as f64) * 0.125
                    };
                    delta_v.push(c);
                }
            }
            blocks.push(CostBlock {
                rows,
                cols,
                strategy: vec![Strategy::Phasing; rows * cols],
                delta_v,
            });
        }
    }
    let budget = (0..sats).map(|_| rng.gen_range(0..=16) as f64 * 0.125).collect();
    let costs = CostMatrix::from_blocks(stages, sats, blocks, budget).unwrap();
    Instance { v, rewards, costs }
}
