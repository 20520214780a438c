//! Multistage constellation reconfiguration: reward matrices, plan scoring
//! and the exact solvers.

mod container;
mod solver;

use std::fmt::Write as _;

pub use container::McrpInstance;
pub use solver::{solve_mcrp, solve_mcrp_exhaustive, solve_mcrp_with, SolverOptions, EXHAUSTIVE_LIMIT};

use crate::error::{Error, Result};
use crate::maneuver::CostMatrix;
use crate::visibility::VisibilityTensor;

/// 1-based inclusive step window `[start, end]` during which point `p`
/// (1-based) of `num_points` carries reward over `num_steps` steps. Windows
/// tile `1..=num_steps`; a window with `end < start` is empty.
pub fn active_window(p: usize, num_steps: usize, num_points: usize) -> (usize, usize) {
    let start = 1 + (p - 1) * num_steps / num_points;
    let end = p * num_steps / num_points;
    (start, end)
}

/// `pi[s][t][p]` and `r[s][t][p]`, stored flat with `p` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    num_stages: usize,
    steps_per_stage: usize,
    num_points: usize,
    pi: Vec<f64>,
    coverage_req: Vec<u32>,
}

impl RewardMatrix {
    pub fn new(
        num_stages: usize,
        steps_per_stage: usize,
        num_points: usize,
        pi: Vec<f64>,
        coverage_req: Vec<u32>,
    ) -> Result<Self> {
        let n = num_stages * steps_per_stage * num_points;
        if pi.len() != n || coverage_req.len() != n {
            return Err(Error::Dimension(format!(
                "reward storage must hold {n} entries for (S, T_s, P) = ({num_stages}, {steps_per_stage}, {num_points})"
            )));
        }
        if pi.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Validation("rewards must be finite and non-negative".into()));
        }
        if coverage_req.contains(&0) {
            return Err(Error::Validation("coverage requirements must be at least 1".into()));
        }
        Ok(Self {
            num_stages,
            steps_per_stage,
            num_points,
            pi,
            coverage_req,
        })
    }

    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    pub fn steps_per_stage(&self) -> usize {
        self.steps_per_stage
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    #[inline]
    fn index(&self, s: usize, t: usize, p: usize) -> usize {
        (s * self.steps_per_stage + t) * self.num_points + p
    }

    /// Reward at 0-based (stage, step, point).
    pub fn pi(&self, s: usize, t: usize, p: usize) -> f64 {
        self.pi[self.index(s, t, p)]
    }

    pub fn requirement(&self, s: usize, t: usize, p: usize) -> u32 {
        self.coverage_req[self.index(s, t, p)]
    }

    pub fn set(&mut self, s: usize, t: usize, p: usize, pi: f64, req: u32) -> Result<()> {
        if !(pi >= 0.0) || req == 0 {
            return Err(Error::Validation("reward must be >= 0 and requirement >= 1".into()));
        }
        let i = self.index(s, t, p);
        self.pi[i] = pi;
        self.coverage_req[i] = req;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.pi.iter().sum()
    }

    pub(crate) fn raw(&self) -> (&[f64], &[u32]) {
        (&self.pi, &self.coverage_req)
    }
}

/// Unit rewards for a point track: point `p` is worth 1 during its window,
/// the horizon is cut into `num_stages` equal stages, and one observing
/// satellite suffices everywhere.
pub fn build_reward_matrix(num_steps: usize, num_points: usize, num_stages: usize) -> Result<RewardMatrix> {
    if num_stages == 0 || num_steps % num_stages != 0 {
        return Err(Error::InvalidGrid(format!(
            "{num_steps} steps cannot be split into {num_stages} equal stages; adjust the duration or time step"
        )));
    }
    let ts = num_steps / num_stages;
    let mut pi = vec![0.0; num_steps * num_points];
    for p in 1..=num_points {
        let (start, end) = active_window(p, num_steps, num_points);
        for t in start..=end {
            pi[(t - 1) * num_points + (p - 1)] = 1.0;
        }
    }
    RewardMatrix::new(num_stages, ts, num_points, pi, vec![1; num_steps * num_points])
}

/// `y[s][t][p]`: whether the coverage requirement is met.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageProfile {
    pub dims: [usize; 3],
    pub y: Vec<bool>,
}

impl CoverageProfile {
    pub fn get(&self, s: usize, t: usize, p: usize) -> bool {
        self.y[(s * self.dims[1] + t) * self.dims[2] + p]
    }
}

/// Slot path per satellite plus the costs it incurs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigPlan {
    /// `paths[k][s]` for s in 0..=S; entry 0 indexes the stage-0 set.
    pub paths: Vec<Vec<usize>>,
    /// `per_stage_cost[k][s - 1]` in km/s.
    pub per_stage_cost: Vec<Vec<f64>>,
    pub objective: f64,
    /// False when the node budget ran out before optimality was proven.
    pub optimal: bool,
    /// Upper bound on `best possible z - objective`; 0 when optimal.
    pub gap: f64,
    pub nodes: u64,
}

impl ReconfigPlan {
    /// Every satellite stays in slot 0 (the initial slot) throughout.
    pub fn all_stay(num_sats: usize, num_stages: usize) -> Self {
        Self {
            paths: vec![vec![0; num_stages + 1]; num_sats],
            per_stage_cost: vec![vec![0.0; num_stages]; num_sats],
            objective: 0.0,
            optimal: true,
            gap: 0.0,
            nodes: 0,
        }
    }

    pub fn total_cost(&self, k: usize) -> f64 {
        self.per_stage_cost[k].iter().sum()
    }

    /// `sat,stage,from_slot,to_slot,delta_v_km_s`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sat,stage,from_slot,to_slot,delta_v_km_s\n");
        for (k, path) in self.paths.iter().enumerate() {
            for s in 1..path.len() {
                let _ = writeln!(
                    out,
                    "{k},{s},{},{},{:.9}",
                    path[s - 1],
                    path[s],
                    self.per_stage_cost[k][s - 1]
                );
            }
        }
        out
    }
}

fn check_paths(paths: &[Vec<usize>], v: &VisibilityTensor) -> Result<()> {
    let [stages, sats, ..] = v.dims();
    if paths.len() != sats {
        return Err(Error::Dimension(format!("plan has {} satellites, tensor {sats}", paths.len())));
    }
    for (k, path) in paths.iter().enumerate() {
        if path.len() != stages + 1 {
            return Err(Error::Dimension(format!(
                "satellite {k}: path length {} for {stages} stages",
                path.len()
            )));
        }
        for s in 1..=stages {
            if path[s] >= v.slot_count(s - 1, k) {
                return Err(Error::Validation(format!(
                    "satellite {k}, stage {s}: slot {} out of range",
                    path[s]
                )));
            }
        }
    }
    Ok(())
}

fn check_rewards(v: &VisibilityTensor, rewards: &RewardMatrix) -> Result<()> {
    let [stages, _, _, steps, points] = v.dims();
    if rewards.num_stages != stages || rewards.steps_per_stage != steps || rewards.num_points != points {
        return Err(Error::Dimension("reward matrix and visibility tensor disagree".into()));
    }
    Ok(())
}

/// Coverage indicator implied by a plan.
pub fn coverage_profile(
    paths: &[Vec<usize>],
    v: &VisibilityTensor,
    rewards: &RewardMatrix,
) -> Result<CoverageProfile> {
    check_rewards(v, rewards)?;
    check_paths(paths, v)?;
    let [stages, _, _, steps, points] = v.dims();
    let mut y = Vec::with_capacity(stages * steps * points);
    for s in 0..stages {
        for t in 0..steps {
            for p in 0..points {
                let count = paths
                    .iter()
                    .enumerate()
                    .filter(|(k, path)| v.get(s, *k, path[s + 1], t, p))
                    .count();
                y.push(count as u64 >= rewards.requirement(s, t, p) as u64);
            }
        }
    }
    Ok(CoverageProfile {
        dims: [stages, steps, points],
        y,
    })
}

/// Objective of the plan's paths: rewards summed in (s, t, p) order over
/// entries whose coverage requirement is met.
pub fn score_plan(plan: &ReconfigPlan, v: &VisibilityTensor, rewards: &RewardMatrix) -> Result<f64> {
    score_paths(&plan.paths, v, rewards)
}

pub fn score_paths(paths: &[Vec<usize>], v: &VisibilityTensor, rewards: &RewardMatrix) -> Result<f64> {
    let y = coverage_profile(paths, v, rewards)?;
    let mut z = 0.0;
    for (i, covered) in y.y.iter().enumerate() {
        let pi = rewards.pi[i];
        if *covered && pi > 0.0 {
            z += pi;
        }
    }
    Ok(z)
}

/// Fill in per-stage costs from the matrix and check the budget.
pub fn plan_costs(paths: &[Vec<usize>], costs: &CostMatrix) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let mut row = Vec::with_capacity(costs.num_stages());
        for s in 1..=costs.num_stages() {
            let b = costs.block(s, k);
            if path[s - 1] >= b.rows || path[s] >= b.cols {
                return Err(Error::Validation(format!("satellite {k}, stage {s}: slot out of range")));
            }
            row.push(b.get(path[s - 1], path[s]));
        }
        out.push(row);
    }
    Ok(out)
}
