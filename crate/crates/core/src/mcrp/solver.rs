//! Depth-first branch-and-bound for the reconfiguration problem, and the
//! enumeration oracle it is checked against.
//!
//! Decisions are taken satellite by satellite, stage by stage, trying slots
//! in ascending order, so the search visits complete plans in lexicographic
//! order of the flattened path vector. Costs are quantised to integer units
//! of 1e-9 km/s so budget sums and cost tie-breaks do not depend on
//! summation order.
//!
//! With every coverage requirement equal to one, the objective of a plan is
//! the weight of the union of its satellites' coverage sets. The bound at a
//! node is then
//!
//! * the weight already covered, plus
//! * the exact best completion of the current satellite given what earlier
//!   satellites cover (a resource-constrained longest path over the
//!   remaining stages, solved once per satellite entry with Pareto labels),
//!   plus
//! * for each later satellite, the smaller of its standalone optimum and its
//!   budget-free per-stage best gain, capped by the weight they could cover
//!   together.
//!
//! Union coverage is subadditive, so the bound never underestimates.
//! Instances with a requirement above one fall back to a counting bound.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use super::{plan_costs, score_paths, RewardMatrix, ReconfigPlan};
use crate::error::{Error, Result};
use crate::maneuver::CostMatrix;
use crate::visibility::VisibilityTensor;

/// Largest joint path count the enumeration oracle accepts.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

const COST_SCALE: f64 = 1e9;
const INF: u64 = u64::MAX;
const ASCENT_ROUNDS: usize = 25;
const CACHE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Search nodes to expand before giving up on proving optimality.
    pub node_budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            node_budget: 20_000_000,
        }
    }
}

fn quantize(c: f64) -> u64 {
    if c.is_finite() {
        (c * COST_SCALE).round() as u64
    } else {
        INF
    }
}

fn lex(a: &[usize], b: &[usize]) -> Ordering {
    a.cmp(b)
}

struct Problem {
    sats: usize,
    stages: usize,
    /// J for 1-based stage s and satellite k at `(s - 1) * K + k`.
    cols: Vec<usize>,
    rows: Vec<usize>,
    cost: Vec<Vec<u64>>,
    budget: Vec<u64>,
    words: Vec<usize>,
    weight: Vec<Vec<f64>>,
    req: Vec<Vec<u32>>,
    unit_weight: bool,
    integral: bool,
    unit_req: bool,
    /// Coverage bitsets `cov[(s - 1) * K + k][j]` over stage entries.
    cov: Vec<Vec<Vec<u64>>>,
    /// Union over all slots of one (stage, satellite).
    any: Vec<Vec<u64>>,
    /// Union over satellites `>= k` of `any`, per stage: `any_from[s0][k]`.
    any_from: Vec<Vec<Vec<u64>>>,
}

impl Problem {
    fn new(v: &VisibilityTensor, rewards: &RewardMatrix, costs: &CostMatrix) -> Result<Self> {
        let [stages, sats, _, steps, points] = v.dims();
        if rewards.num_stages() != stages
            || rewards.steps_per_stage() != steps
            || rewards.num_points() != points
        {
            return Err(Error::Dimension("reward matrix and visibility tensor disagree".into()));
        }
        if costs.num_stages() != stages || costs.num_sats() != sats {
            return Err(Error::Dimension("cost matrix and visibility tensor disagree".into()));
        }
        let mut cols = Vec::with_capacity(stages * sats);
        let mut rows = Vec::with_capacity(stages * sats);
        let mut cost = Vec::with_capacity(stages * sats);
        for s in 1..=stages {
            for k in 0..sats {
                let b = costs.block(s, k);
                if b.cols != v.slot_count(s - 1, k) {
                    return Err(Error::Dimension(format!(
                        "stage {s}, satellite {k}: {} cost columns for {} slots",
                        b.cols,
                        v.slot_count(s - 1, k)
                    )));
                }
                if b.rows == 0 || b.cols == 0 {
                    return Err(Error::Dimension("every stage needs at least one slot".into()));
                }
                cols.push(b.cols);
                rows.push(b.rows);
                cost.push(b.delta_v.iter().map(|c| quantize(*c)).collect());
            }
        }
        let budget: Vec<u64> = costs
            .budget
            .iter()
            .map(|b| if b.is_finite() { quantize(b.max(0.0)) } else { INF })
            .collect();

        let (pi, req_all) = rewards.raw();
        let mut words = Vec::with_capacity(stages);
        let mut weight = Vec::with_capacity(stages);
        let mut req = Vec::with_capacity(stages);
        let mut entries: Vec<Vec<(usize, usize)>> = Vec::with_capacity(stages);
        for s in 0..stages {
            let mut e = Vec::new();
            let mut w = Vec::new();
            let mut r = Vec::new();
            for t in 0..steps {
                for p in 0..points {
                    let i = (s * steps + t) * points + p;
                    if pi[i] > 0.0 {
                        e.push((t, p));
                        w.push(pi[i]);
                        r.push(req_all[i]);
                    }
                }
            }
            words.push(e.len().div_ceil(64));
            weight.push(w);
            req.push(r);
            entries.push(e);
        }
        let unit_weight = weight.iter().flatten().all(|w| *w == 1.0);
        let integral = weight.iter().flatten().all(|w| w.fract() == 0.0)
            && weight.iter().flatten().sum::<f64>() < 2f64.powi(52);
        let unit_req = req.iter().flatten().all(|r| *r == 1);

        let mut cov = Vec::with_capacity(stages * sats);
        let mut any = Vec::with_capacity(stages * sats);
        for s in 0..stages {
            for k in 0..sats {
                let j_count = cols[s * sats + k];
                let mut per_slot = Vec::with_capacity(j_count);
                let mut union = vec![0u64; words[s]];
                for j in 0..j_count {
                    let mut bits = vec![0u64; words[s]];
                    for (e, &(t, p)) in entries[s].iter().enumerate() {
                        if v.get(s, k, j, t, p) {
                            bits[e / 64] |= 1 << (e % 64);
                        }
                    }
                    for (u, b) in union.iter_mut().zip(&bits) {
                        *u |= b;
                    }
                    per_slot.push(bits);
                }
                cov.push(per_slot);
                any.push(union);
            }
        }
        let mut any_from = Vec::with_capacity(stages);
        for s in 0..stages {
            let mut per = vec![vec![0u64; words[s]]; sats + 1];
            for k in (0..sats).rev() {
                let mut acc = per[k + 1].clone();
                for (a, b) in acc.iter_mut().zip(&any[s * sats + k]) {
                    *a |= b;
                }
                per[k] = acc;
            }
            any_from.push(per);
        }
        Ok(Self {
            sats,
            stages,
            cols,
            rows,
            cost,
            budget,
            words,
            weight,
            req,
            unit_weight,
            integral,
            unit_req,
            cov,
            any,
            any_from,
        })
    }

    #[inline]
    fn bi(&self, s: usize, k: usize) -> usize {
        (s - 1) * self.sats + k
    }

    #[inline]
    fn cost(&self, s: usize, k: usize, i: usize, j: usize) -> u64 {
        let b = self.bi(s, k);
        self.cost[b][i * self.cols[b] + j]
    }

    #[inline]
    fn cov(&self, s: usize, k: usize, j: usize) -> &[u64] {
        &self.cov[self.bi(s, k)][j]
    }

    /// Weight of the entries of 0-based stage `s0` set in `a` and clear in `u`.
    fn gain(&self, s0: usize, a: &[u64], u: Option<&[u64]>) -> f64 {
        if self.unit_weight {
            let n: u32 = match u {
                Some(u) => a.iter().zip(u).map(|(x, y)| (x & !y).count_ones()).sum(),
                None => a.iter().map(|x| x.count_ones()).sum(),
            };
            return n as f64;
        }
        let w = &self.weight[s0];
        let mut total = 0.0;
        for (wi, &word) in a.iter().enumerate() {
            let mut bits = match u {
                Some(u) => word & !u[wi],
                None => word,
            };
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                total += w[wi * 64 + b];
                bits &= bits - 1;
            }
        }
        total
    }

    /// Objective of complete paths, summed in entry order.
    fn evaluate(&self, paths: &[Vec<usize>]) -> f64 {
        let mut z = 0.0;
        for s in 1..=self.stages {
            let s0 = s - 1;
            let n = self.weight[s0].len();
            if self.unit_req {
                let mut u = vec![0u64; self.words[s0]];
                for (k, path) in paths.iter().enumerate() {
                    for (a, b) in u.iter_mut().zip(self.cov(s, k, path[s])) {
                        *a |= b;
                    }
                }
                z += self.gain(s0, &u, None);
            } else {
                for e in 0..n {
                    let count = paths
                        .iter()
                        .enumerate()
                        .filter(|(k, path)| self.cov(s, *k, path[s])[e / 64] >> (e % 64) & 1 == 1)
                        .count() as u32;
                    if count >= self.req[s0][e] {
                        z += self.weight[s0][e];
                    }
                }
            }
        }
        z
    }

    fn path_cost(&self, k: usize, path: &[usize]) -> u64 {
        let mut c = 0u64;
        for s in 1..=self.stages {
            let e = self.cost(s, k, path[s - 1], path[s]);
            if e == INF {
                return INF;
            }
            c = c.saturating_add(e);
        }
        c
    }

    fn feasible(&self, paths: &[Vec<usize>]) -> Option<u64> {
        let mut total = 0u64;
        for (k, p) in paths.iter().enumerate() {
            let c = self.path_cost(k, p);
            if c == INF || c > self.budget[k] {
                return None;
            }
            total = total.saturating_add(c);
        }
        Some(total)
    }

    fn same_value(&self, a: f64, b: f64) -> bool {
        if self.integral {
            a == b
        } else {
            (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
        }
    }

    /// Pareto labels of one satellite's best completions, given that the
    /// entries in `u` are already covered.
    fn suffix_table(&self, k: usize, u: &[Vec<u64>]) -> Suffix {
        let stages = self.stages;
        let gains: Vec<Vec<f64>> = (1..=stages)
            .map(|s| {
                (0..self.cols[self.bi(s, k)])
                    .map(|j| self.gain(s - 1, self.cov(s, k, j), Some(&u[s - 1])))
                    .collect()
            })
            .collect();
        let budget = self.budget[k];
        let mut q: Vec<Vec<Vec<(u64, f64)>>> = vec![Vec::new(); stages];
        let trivial = vec![(0u64, 0.0f64)];
        let mut cand: Vec<(u64, f64)> = Vec::new();
        for s in (0..stages).rev() {
            // q[s][i]: from slot i at the end of stage s, best over stages s+1..
            let rows = self.rows[self.bi(s + 1, k)];
            let cols = self.cols[self.bi(s + 1, k)];
            let mut level = Vec::with_capacity(rows);
            for i in 0..rows {
                cand.clear();
                for j in 0..cols {
                    let c = self.cost(s + 1, k, i, j);
                    if c == INF || c > budget {
                        continue;
                    }
                    let next: &[(u64, f64)] = if s + 1 == stages { &trivial } else { &q[s + 1][j] };
                    for &(lc, lr) in next {
                        let tc = c + lc;
                        if tc > budget {
                            break;
                        }
                        cand.push((tc, gains[s][j] + lr));
                    }
                }
                cand.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
                let mut front: Vec<(u64, f64)> = Vec::new();
                for &(c, r) in &cand {
                    if front.last().is_none_or(|l| r > l.1) {
                        front.push((c, r));
                    }
                }
                level.push(front);
            }
            q[s] = level;
        }
        Suffix { q, gains }
    }

    /// Best path for satellite `k` under `suffix`: most reward, then least
    /// cost, then lexicographically smallest.
    fn best_path(&self, k: usize, suffix: &Suffix) -> Option<Vec<usize>> {
        let (mut c_rem, mut r_rem) = query(&suffix.q[0][0], self.budget[k])?;
        let mut path = vec![0usize];
        let mut i = 0;
        for s in 0..self.stages {
            let cols = self.cols[self.bi(s + 1, k)];
            let mut chosen = None;
            for j in 0..cols {
                let c = self.cost(s + 1, k, i, j);
                if c == INF || c > c_rem {
                    continue;
                }
                let want_c = c_rem - c;
                let want_r = r_rem - suffix.gains[s][j];
                let ok = if s + 1 == self.stages {
                    want_c == 0 && self.same_value(want_r, 0.0)
                } else {
                    suffix.q[s + 1][j]
                        .iter()
                        .any(|&(lc, lr)| lc == want_c && self.same_value(lr, want_r))
                };
                if ok {
                    chosen = Some((j, want_c, want_r));
                    break;
                }
            }
            let (j, c, r) = chosen?;
            path.push(j);
            i = j;
            c_rem = c;
            r_rem = r;
        }
        Some(path)
    }

    fn union_of(&self, paths: &[Vec<usize>], skip: Option<usize>) -> Vec<Vec<u64>> {
        (1..=self.stages)
            .map(|s| {
                let mut u = vec![0u64; self.words[s - 1]];
                for (k, p) in paths.iter().enumerate() {
                    if Some(k) == skip {
                        continue;
                    }
                    for (a, b) in u.iter_mut().zip(self.cov(s, k, p[s])) {
                        *a |= b;
                    }
                }
                u
            })
            .collect()
    }

    fn flatten(&self, paths: &[Vec<usize>]) -> Vec<usize> {
        paths.iter().flat_map(|p| p[1..].iter().copied()).collect()
    }
}

struct Suffix {
    /// `q[s][i]`: (cost, reward) labels, cost ascending, reward strictly increasing.
    q: Vec<Vec<Vec<(u64, f64)>>>,
    gains: Vec<Vec<f64>>,
}

/// Cheapest label achieving the most reward within budget `b`, as (cost, reward).
fn query(labels: &[(u64, f64)], b: u64) -> Option<(u64, f64)> {
    let n = labels.partition_point(|l| l.0 <= b);
    (n > 0).then(|| labels[n - 1])
}

/// Cheapest label within budget `b` whose reward reaches `need`.
fn min_cost_reaching(labels: &[(u64, f64)], b: u64, need: f64) -> Option<u64> {
    let n = labels.partition_point(|l| l.0 <= b);
    let i = labels[..n].partition_point(|l| l.1 < need);
    (i < n).then(|| labels[i].0)
}

#[derive(Clone)]
struct Incumbent {
    z: f64,
    cost: u64,
    flat: Vec<usize>,
    paths: Vec<Vec<usize>>,
}

struct Search<'a> {
    pb: &'a Problem,
    node_budget: u64,
    nodes: u64,
    aborted: bool,
    u: Vec<Vec<u64>>,
    counts: Vec<Vec<u32>>,
    paths: Vec<Vec<usize>>,
    flat: Vec<usize>,
    z: f64,
    cost_k: u64,
    cost_total: u64,
    inc: Option<Incumbent>,
    suffix: Vec<Option<Arc<Suffix>>>,
    rest: Vec<f64>,
    /// Per-satellite terms of `rest[k]` for satellites after `k`, uncapped.
    rest_parts: Vec<Vec<f64>>,
    standalone: Vec<f64>,
    /// Standalone Pareto labels of each satellite's whole path.
    standalone_labels: Vec<Vec<(u64, f64)>>,
    cache: Vec<HashMap<Vec<u64>, Arc<Suffix>>>,
}

impl<'a> Search<'a> {
    fn new(pb: &'a Problem, node_budget: u64) -> Self {
        Self {
            pb,
            node_budget,
            nodes: 0,
            aborted: false,
            u: pb.words.iter().map(|w| vec![0; *w]).collect(),
            counts: pb.weight.iter().map(|w| vec![0; w.len()]).collect(),
            paths: vec![vec![0; pb.stages + 1]; pb.sats],
            flat: Vec::with_capacity(pb.sats * pb.stages),
            z: 0.0,
            cost_k: 0,
            cost_total: 0,
            inc: None,
            suffix: vec![None; pb.sats],
            rest: vec![0.0; pb.sats],
            rest_parts: vec![Vec::new(); pb.sats],
            standalone: vec![0.0; pb.sats],
            standalone_labels: vec![Vec::new(); pb.sats],
            cache: vec![HashMap::new(); pb.sats],
        }
    }

    fn eps(&self) -> f64 {
        if self.pb.integral {
            0.0
        } else {
            1e-9 * (1.0 + self.inc.as_ref().map_or(0.0, |i| i.z.abs()))
        }
    }

    /// Offer a complete plan to the incumbent.
    fn offer(&mut self, paths: &[Vec<usize>]) {
        let Some(cost) = self.pb.feasible(paths) else {
            return;
        };
        let z = self.pb.evaluate(paths);
        let flat = self.pb.flatten(paths);
        let better = match &self.inc {
            None => true,
            Some(inc) => {
                z > inc.z
                    || (z == inc.z && cost < inc.cost)
                    || (z == inc.z && cost == inc.cost && lex(&flat, &inc.flat) == Ordering::Less)
            }
        };
        if better {
            self.inc = Some(Incumbent {
                z,
                cost,
                flat,
                paths: paths.to_vec(),
            });
        }
    }

    fn prune(&self, ub: f64, lb_cost: u64) -> bool {
        let Some(inc) = &self.inc else {
            return false;
        };
        if !self.pb.integral {
            return ub < inc.z - self.eps();
        }
        match ub.partial_cmp(&inc.z) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => {
                if lb_cost != inc.cost {
                    return lb_cost > inc.cost;
                }
                lex(&self.flat, &inc.flat[..self.flat.len()]) == Ordering::Greater
            }
            _ => false,
        }
    }

    /// Lower bound on the extra cost (satellite `k`'s remaining stages plus
    /// all later satellites) of any completion that at least ties the
    /// incumbent. `labels` are the current satellite's suffix labels within
    /// budget `b`, whose best reward is `best`. Only used for integral weights.
    fn tie_cost(&self, labels: &[(u64, f64)], b: u64, best: f64, k: usize) -> u64 {
        let pb = self.pb;
        let inc_z = match &self.inc {
            Some(inc) if pb.integral => inc.z,
            _ => return labels.first().map_or(0, |l| l.0),
        };
        let mut total = min_cost_reaching(labels, b, inc_z - self.z - self.rest[k]).unwrap_or(0);
        // later satellite k2 must gain at least what the others cannot supply
        let parts = &self.rest_parts[k];
        let sum: f64 = parts.iter().sum();
        let need_rest = inc_z - self.z - best;
        for (i, k2) in (k + 1..pb.sats).enumerate() {
            let need = need_rest - (sum - parts[i]);
            if need > 0.0 {
                total = total.saturating_add(
                    min_cost_reaching(&self.standalone_labels[k2], pb.budget[k2], need).unwrap_or(0),
                );
            }
        }
        total
    }

    fn suffix_for(&mut self, k: usize) -> Arc<Suffix> {
        let pb = self.pb;
        let key: Vec<u64> = (0..pb.stages)
            .flat_map(|s| {
                let any = &pb.any[s * pb.sats + k];
                self.u[s].iter().zip(any).map(|(a, b)| a & b).collect::<Vec<_>>()
            })
            .collect();
        if let Some(hit) = self.cache[k].get(&key) {
            return hit.clone();
        }
        let table = Arc::new(pb.suffix_table(k, &self.u));
        if self.cache[k].len() >= CACHE_CAP {
            self.cache[k].clear();
        }
        self.cache[k].insert(key, table.clone());
        table
    }

    /// Bound on what satellites after `k` can still add, plus its
    /// per-satellite terms.
    fn rest_bound(&self, k: usize) -> (f64, Vec<f64>) {
        let pb = self.pb;
        let mut parts = Vec::with_capacity(pb.sats - k - 1);
        for k2 in k + 1..pb.sats {
            let mut free = 0.0;
            for s in 1..=pb.stages {
                let mut best = 0.0f64;
                for j in 0..pb.cols[pb.bi(s, k2)] {
                    best = best.max(pb.gain(s - 1, pb.cov(s, k2, j), Some(&self.u[s - 1])));
                }
                free += best;
            }
            parts.push(free.min(self.standalone[k2]));
        }
        let per_sat: f64 = parts.iter().sum();
        let cap: f64 = (0..pb.stages)
            .map(|s| pb.gain(s, &pb.any_from[s][k + 1], Some(&self.u[s])))
            .sum();
        (per_sat.min(cap), parts)
    }

    /// Counting bound for general coverage requirements: an entry can only
    /// pay out if its current count plus the number of undecided
    /// (satellite, stage) choices able to see it reaches the requirement.
    /// Undecided means satellites after `k`, and satellite `k` after stage `s`.
    fn counting_bound(&self, k: usize, s: usize) -> f64 {
        let pb = self.pb;
        let mut ub = 0.0;
        for s2 in 1..=pb.stages {
            let s0 = s2 - 1;
            for e in 0..pb.weight[s0].len() {
                let mut pot = self.counts[s0][e];
                let first = if s2 > s { k } else { k + 1 };
                for k2 in first..pb.sats {
                    pot += (pb.any[s0 * pb.sats + k2][e / 64] >> (e % 64) & 1) as u32;
                }
                if pot >= pb.req[s0][e] {
                    ub += pb.weight[s0][e];
                }
            }
        }
        ub
    }

    fn apply(&mut self, k: usize, s: usize, j: usize, c: u64) -> Vec<u64> {
        let pb = self.pb;
        let cov = pb.cov(s, k, j);
        let saved = self.u[s - 1].clone();
        if pb.unit_req {
            self.z += pb.gain(s - 1, cov, Some(&self.u[s - 1]));
        } else {
            for (e, cnt) in self.counts[s - 1].iter_mut().enumerate() {
                *cnt += (cov[e / 64] >> (e % 64) & 1) as u32;
            }
        }
        for (a, b) in self.u[s - 1].iter_mut().zip(cov) {
            *a |= b;
        }
        self.paths[k][s] = j;
        self.flat.push(j);
        self.cost_k += c;
        self.cost_total += c;
        saved
    }

    fn undo(&mut self, k: usize, s: usize, j: usize, c: u64, saved: Vec<u64>, z_before: f64) {
        let pb = self.pb;
        if !pb.unit_req {
            let cov = pb.cov(s, k, j);
            for (e, cnt) in self.counts[s - 1].iter_mut().enumerate() {
                *cnt -= (cov[e / 64] >> (e % 64) & 1) as u32;
            }
        }
        self.u[s - 1] = saved;
        self.z = z_before;
        self.flat.pop();
        self.paths[k][s] = 0;
        self.cost_k -= c;
        self.cost_total -= c;
    }

    fn enter_sat(&mut self, k: usize) {
        let pb = self.pb;
        if k == pb.sats {
            let paths = self.paths.clone();
            self.offer(&paths);
            return;
        }
        let (ub, lb_cost) = if pb.unit_req {
            let suffix = self.suffix_for(k);
            let Some((_, best)) = query(&suffix.q[0][0], pb.budget[k]) else {
                return;
            };
            (self.rest[k], self.rest_parts[k]) = self.rest_bound(k);
            let extra = self.tie_cost(&suffix.q[0][0], pb.budget[k], best, k);
            self.suffix[k] = Some(suffix);
            (self.z + best + self.rest[k], self.cost_total + extra)
        } else {
            (self.counting_bound(k, 0), self.cost_total)
        };
        if self.prune(ub, lb_cost) {
            return;
        }
        self.cost_k = 0;
        self.paths[k][0] = 0;
        self.stage(k, 1, 0);
    }

    fn stage(&mut self, k: usize, s: usize, i: usize) {
        let pb = self.pb;
        if s > pb.stages {
            let cost_k = self.cost_k;
            self.enter_sat(k + 1);
            self.cost_k = cost_k;
            return;
        }
        let budget = pb.budget[k];
        for j in 0..pb.cols[pb.bi(s, k)] {
            if self.aborted {
                return;
            }
            let c = pb.cost(s, k, i, j);
            if c == INF || c > budget - self.cost_k {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.node_budget {
                self.aborted = true;
                return;
            }
            let z_before = self.z;
            let saved = self.apply(k, s, j, c);
            let bound = if pb.unit_req {
                let rem = budget - self.cost_k;
                if s == pb.stages {
                    Some((self.z + self.rest[k], self.cost_total + self.tie_cost(&[(0, 0.0)], 0, 0.0, k)))
                } else {
                    let table = self.suffix[k].clone().expect("suffix table set on entry");
                    let labels = &table.q[s][j];
                    query(labels, rem).map(|l| {
                        (self.z + l.1 + self.rest[k], self.cost_total + self.tie_cost(labels, rem, l.1, k))
                    })
                }
            } else {
                Some((self.counting_bound(k, s), self.cost_total))
            };
            if let Some((ub, lb_cost)) = bound {
                if !self.prune(ub, lb_cost) {
                    self.stage(k, s + 1, j);
                }
            }
            self.undo(k, s, j, c, saved, z_before);
        }
    }

    /// Greedy satellite-by-satellite plan, then coordinate ascent.
    fn seed(&mut self) {
        let pb = self.pb;
        self.offer(&vec![vec![0; pb.stages + 1]; pb.sats]);
        if !pb.unit_req {
            return;
        }
        let empty: Vec<Vec<u64>> = pb.words.iter().map(|w| vec![0; *w]).collect();
        for k in 0..pb.sats {
            let t = pb.suffix_table(k, &empty);
            self.standalone[k] = query(&t.q[0][0], pb.budget[k]).map_or(0.0, |l| l.1);
            self.standalone_labels[k] = t.q[0][0].clone();
        }

        let mut paths = vec![vec![0; pb.stages + 1]; pb.sats];
        let mut u = empty.clone();
        for k in 0..pb.sats {
            let t = pb.suffix_table(k, &u);
            if let Some(p) = pb.best_path(k, &t) {
                for s in 1..=pb.stages {
                    for (a, b) in u[s - 1].iter_mut().zip(pb.cov(s, k, p[s])) {
                        *a |= b;
                    }
                }
                paths[k] = p;
            }
        }
        self.offer(&paths);

        let Some(mut current) = self.inc.as_ref().map(|i| i.paths.clone()) else {
            return;
        };
        for _ in 0..ASCENT_ROUNDS {
            let mut changed = false;
            for k in 0..pb.sats {
                let others = pb.union_of(&current, Some(k));
                let t = pb.suffix_table(k, &others);
                let Some(p) = pb.best_path(k, &t) else {
                    continue;
                };
                if p == current[k] {
                    continue;
                }
                let mut trial = current.clone();
                trial[k] = p;
                let before = self.inc.as_ref().map(|i| i.flat.clone());
                self.offer(&trial);
                if self.inc.as_ref().map(|i| i.flat.clone()) != before {
                    current = trial;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn root_bound(&self) -> f64 {
        let pb = self.pb;
        if pb.unit_req {
            let sum: f64 = self.standalone.iter().sum();
            let cap: f64 = (0..pb.stages).map(|s| pb.gain(s, &pb.any_from[s][0], None)).sum();
            sum.min(cap)
        } else {
            self.counting_bound(0, 0)
        }
    }
}

fn finish(
    paths: Vec<Vec<usize>>,
    v: &VisibilityTensor,
    rewards: &RewardMatrix,
    costs: &CostMatrix,
    optimal: bool,
    gap: f64,
    nodes: u64,
) -> Result<ReconfigPlan> {
    let per_stage_cost = plan_costs(&paths, costs)?;
    let objective = score_paths(&paths, v, rewards)?;
    Ok(ReconfigPlan {
        paths,
        per_stage_cost,
        objective,
        optimal,
        gap,
        nodes,
    })
}

/// Exact solve with the default node budget.
pub fn solve_mcrp(
    v: &VisibilityTensor,
    rewards: &RewardMatrix,
    costs: &CostMatrix,
) -> Result<ReconfigPlan> {
    solve_mcrp_with(v, rewards, costs, &SolverOptions::default())
}

/// Maximise covered reward subject to every satellite's budget. Ties go to
/// the lower total cost, then to the lexicographically smallest paths.
///
/// If the node budget runs out, the best plan found is returned with
/// `optimal = false` and `gap` bounding how much better a plan could be.
pub fn solve_mcrp_with(
    v: &VisibilityTensor,
    rewards: &RewardMatrix,
    costs: &CostMatrix,
    options: &SolverOptions,
) -> Result<ReconfigPlan> {
    let pb = Problem::new(v, rewards, costs)?;
    let mut search = Search::new(&pb, options.node_budget);
    search.seed();
    let root_ub = search.root_bound();
    search.enter_sat(0);
    let Some(inc) = search.inc.take() else {
        return Err(Error::Infeasible("no slot path fits the budget".into()));
    };
    let optimal = !search.aborted;
    let gap = if optimal { 0.0 } else { (root_ub - inc.z).max(0.0) };
    if !optimal {
        log::warn!(
            "node budget of {} exhausted; returning incumbent z = {} with gap <= {gap}",
            options.node_budget,
            inc.z
        );
    }
    finish(inc.paths, v, rewards, costs, optimal, gap, search.nodes)
}

/// Feasible paths of one satellite, in lexicographic order.
fn satellite_paths(pb: &Problem, k: usize) -> Vec<(Vec<usize>, u64)> {
    fn walk(pb: &Problem, k: usize, path: &mut Vec<usize>, cost: u64, out: &mut Vec<(Vec<usize>, u64)>) {
        let s = path.len();
        if s > pb.stages {
            out.push((path.clone(), cost));
            return;
        }
        let i = path[s - 1];
        for j in 0..pb.cols[pb.bi(s, k)] {
            let c = pb.cost(s, k, i, j);
            if c == INF || cost.saturating_add(c) > pb.budget[k] {
                continue;
            }
            path.push(j);
            walk(pb, k, path, cost + c, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    walk(pb, k, &mut vec![0], 0, &mut out);
    out
}

/// Enumerate every joint plan. Refuses instances with more than
/// [`EXHAUSTIVE_LIMIT`] joint paths (counted before budget filtering).
pub fn solve_mcrp_exhaustive(
    v: &VisibilityTensor,
    rewards: &RewardMatrix,
    costs: &CostMatrix,
) -> Result<ReconfigPlan> {
    let pb = Problem::new(v, rewards, costs)?;
    let mut joint: u128 = 1;
    for k in 0..pb.sats {
        for s in 1..=pb.stages {
            joint = joint.saturating_mul(pb.cols[pb.bi(s, k)] as u128);
        }
    }
    if joint > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(joint));
    }
    let per_sat: Vec<Vec<(Vec<usize>, u64)>> = (0..pb.sats).map(|k| satellite_paths(&pb, k)).collect();
    if per_sat.iter().any(|p| p.is_empty()) {
        return Err(Error::Infeasible("no slot path fits the budget".into()));
    }
    let mut idx = vec![0usize; pb.sats];
    let mut best: Option<(f64, u64, Vec<Vec<usize>>)> = None;
    let mut count = 0u64;
    loop {
        count += 1;
        let paths: Vec<Vec<usize>> = idx.iter().enumerate().map(|(k, &i)| per_sat[k][i].0.clone()).collect();
        let cost: u64 = idx.iter().enumerate().map(|(k, &i)| per_sat[k][i].1).sum();
        let z = pb.evaluate(&paths);
        let replace = match &best {
            None => true,
            Some((bz, bc, _)) => z > *bz || (z == *bz && cost < *bc),
        };
        if replace {
            best = Some((z, cost, paths));
        }
        // advance the mixed-radix counter, last satellite fastest
        let mut k = pb.sats;
        loop {
            if k == 0 {
                let (_, _, paths) = best.expect("at least one plan enumerated");
                return finish(paths, v, rewards, costs, true, 0.0, count);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_sat[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maneuver::{CostBlock, Strategy};
    use crate::mcrp::build_reward_matrix;

    fn block(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CostBlock {
        let mut delta_v = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                delta_v.push(f(i, j));
            }
        }
        CostBlock {
            rows,
            cols,
            strategy: vec![Strategy::Phasing; delta_v.len()],
            delta_v,
        }
    }

    #[test]
    fn single_slot_is_stay() {
        let mut v = VisibilityTensor::zeros(1, 1, 1, 4, 1);
        v.set(0, 0, 0, 1, 0, true);
        let r = build_reward_matrix(4, 1, 1).unwrap();
        let c = CostMatrix::from_blocks(1, 1, vec![block(1, 1, |_, _| 0.0)], vec![2.0]).unwrap();
        let plan = solve_mcrp(&v, &r, &c).unwrap();
        assert_eq!(plan.paths, vec![vec![0, 0]]);
        assert_eq!(plan.objective, 1.0);
        assert!(plan.optimal);
    }

    #[test]
    fn picks_best_affordable_slot() {
        // slot 1 sees 3 steps, slot 2 sees 2, slot 0 sees 1; slot 1 is over budget
        let mut v = VisibilityTensor::zeros(1, 1, 3, 4, 1);
        v.set(0, 0, 0, 0, 0, true);
        for t in 0..3 {
            v.set(0, 0, 1, t, 0, true);
        }
        v.set(0, 0, 2, 2, 0, true);
        v.set(0, 0, 2, 3, 0, true);
        let r = build_reward_matrix(4, 1, 1).unwrap();
        let costs = [0.0, 3.0, 1.0];
        let c = CostMatrix::from_blocks(1, 1, vec![block(1, 3, |_, j| costs[j])], vec![2.0]).unwrap();
        let plan = solve_mcrp(&v, &r, &c).unwrap();
        assert_eq!(plan.paths[0], vec![0, 2]);
        assert_eq!(plan.objective, 2.0);
        let ex = solve_mcrp_exhaustive(&v, &r, &c).unwrap();
        assert_eq!(ex.paths, plan.paths);
    }

    #[test]
    fn zero_budget_keeps_everyone_home() {
        let mut v = VisibilityTensor::zeros(2, 2, 3, 3, 1);
        for s in 0..2 {
            for k in 0..2 {
                v.set(s, k, 2, 1, 0, true);
            }
        }
        let r = build_reward_matrix(6, 1, 2).unwrap();
        let blocks = vec![
            block(1, 3, |_, j| if j == 0 { 0.0 } else { 0.5 }),
            block(1, 3, |_, j| if j == 0 { 0.0 } else { 0.5 }),
            block(3, 3, |i, j| if i == j { 0.0 } else { 0.5 }),
            block(3, 3, |i, j| if i == j { 0.0 } else { 0.5 }),
        ];
        let c = CostMatrix::from_blocks(2, 2, blocks, vec![0.0, 0.0]).unwrap();
        let plan = solve_mcrp(&v, &r, &c).unwrap();
        assert_eq!(plan.paths, vec![vec![0, 0, 0]; 2]);
        assert_eq!(plan.objective, 0.0);
    }

    #[test]
    fn ties_prefer_cheaper_then_lexicographic() {
        // slots 1 and 2 both see everything; slot 2 is cheaper
        let mut v = VisibilityTensor::zeros(1, 1, 3, 2, 1);
        for j in 1..3 {
            for t in 0..2 {
                v.set(0, 0, j, t, 0, true);
            }
        }
        let r = build_reward_matrix(2, 1, 1).unwrap();
        let costs = [0.0, 1.0, 0.5];
        let c = CostMatrix::from_blocks(1, 1, vec![block(1, 3, |_, j| costs[j])], vec![2.0]).unwrap();
        assert_eq!(solve_mcrp(&v, &r, &c).unwrap().paths[0], vec![0, 2]);
        let costs = [0.0, 0.5, 0.5];
        let c = CostMatrix::from_blocks(1, 1, vec![block(1, 3, |_, j| costs[j])], vec![2.0]).unwrap();
        assert_eq!(solve_mcrp(&v, &r, &c).unwrap().paths[0], vec![0, 1]);
        assert_eq!(solve_mcrp_exhaustive(&v, &r, &c).unwrap().paths[0], vec![0, 1]);
    }

    #[test]
    fn oversized_enumeration_refused() {
        let v = VisibilityTensor::zeros(4, 2, 60, 1, 1);
        let r = build_reward_matrix(4, 1, 4).unwrap();
        let mut blocks = Vec::new();
        for s in 0..4 {
            for _ in 0..2 {
                blocks.push(block(if s == 0 { 1 } else { 60 }, 60, |_, _| 0.0));
            }
        }
        let c = CostMatrix::from_blocks(4, 2, blocks, vec![1.0; 2]).unwrap();
        assert!(matches!(solve_mcrp_exhaustive(&v, &r, &c), Err(Error::TooLarge(_))));
    }

    #[test]
    fn pair_requirement_needs_two_satellites() {
        let mut v = VisibilityTensor::zeros(1, 2, 2, 2, 1);
        v.set(0, 0, 1, 0, 0, true);
        v.set(0, 1, 1, 0, 0, true);
        v.set(0, 0, 0, 1, 0, true);
        let mut r = build_reward_matrix(2, 1, 1).unwrap();
        r.set(0, 0, 0, 1.0, 2).unwrap();
        r.set(0, 1, 0, 1.0, 2).unwrap();
        let blocks = vec![block(1, 2, |_, j| j as f64), block(1, 2, |_, j| j as f64)];
        let c = CostMatrix::from_blocks(1, 2, blocks, vec![1.0, 1.0]).unwrap();
        let plan = solve_mcrp(&v, &r, &c).unwrap();
        assert_eq!(plan.objective, 1.0);
        assert_eq!(plan.paths, vec![vec![0, 1], vec![0, 1]]);
        let c1 = CostMatrix::from_blocks(
            1,
            2,
            vec![block(1, 2, |_, j| j as f64), block(1, 2, |_, j| j as f64)],
            vec![1.0, 0.0],
        )
        .unwrap();
        assert_eq!(solve_mcrp(&v, &r, &c1).unwrap().objective, 0.0);
    }
}
