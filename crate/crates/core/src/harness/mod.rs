//! Scenario orchestration: run the CONOPS models over a track corpus and
//! collect the comparison tables.

pub mod config;
pub mod report;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use config::{reference_constellation, ModelKind, ModelSpec, NamedOrbit, ScenarioConfig};
pub use report::{
    emit_report, outperformance_matrix, percent_increase, summarize, ComparisonReport, PctStats,
    ReportFormat, ZTable,
};

use crate::agility::{optimize_slew_schedule, score_agility, slewed_visibility, SlewSchedule, WeightedTarget};
use crate::astro::{geodetic_to_eci, AstroConstants, ClassicalOrbitalElements, TimeGrid, Vec3};
use crate::error::{Error, Result};
use crate::maneuver::{build_cost_matrix, generate_slot_grid, GridMode, SlotGridSpec};
use crate::mcrp::{build_reward_matrix, score_paths, solve_mcrp_with, ReconfigPlan};
use crate::tc::{parse_track_csv, track_to_targets, TargetSet, TcTrack};
use crate::visibility::{compute_vtw_tensor, AxisMode, FovSpec, VisibilityTensor};

/// A track with its single-stage time grid and target geometry.
#[derive(Debug, Clone)]
pub struct PreparedTrack {
    pub track: TcTrack,
    pub grid: TimeGrid,
    pub targets: TargetSet,
    /// `positions[t - 1][p]`: ECI position of every point at every step.
    pub positions: Vec<Vec<Vec3>>,
}

impl PreparedTrack {
    pub fn new(config: &ScenarioConfig, track: TcTrack) -> Result<Self> {
        let grid = TimeGrid::new(track.duration(), config.dt, config.control_step, 1)?;
        let targets = track_to_targets(&track, &grid)?;
        let positions = targets.step_positions(&grid, &config.consts);
        Ok(Self {
            track,
            grid,
            targets,
            positions,
        })
    }

    pub fn name(&self) -> &str {
        &self.track.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub model: String,
    pub z: f64,
    /// Reconfiguration plan for models B, P and U.
    pub plan: Option<ReconfigPlan>,
    /// One slew schedule per satellite for model A.
    pub schedules: Vec<SlewSchedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutcome {
    pub track: String,
    pub polyline: String,
    pub models: Vec<ModelOutcome>,
}

/// Single-stage visibility tensors keyed by the per-satellite slot lists
/// they were computed for. Models whose slots all appear in a cached list
/// reuse it instead of recomputing geometry.
#[derive(Debug, Default)]
pub struct VisibilityCache {
    entries: Vec<(Vec<Vec<ClassicalOrbitalElements>>, VisibilityTensor)>,
}

impl VisibilityCache {
    /// Entry index and per-satellite slot indices covering `slots`.
    fn lookup(&self, slots: &[Vec<ClassicalOrbitalElements>]) -> Option<(usize, Vec<Vec<usize>>)> {
        'entry: for (e, (cached, _)) in self.entries.iter().enumerate() {
            if cached.len() != slots.len() {
                continue;
            }
            let mut subset = Vec::with_capacity(slots.len());
            for (have, want) in cached.iter().zip(slots) {
                let mut idx = Vec::with_capacity(want.len());
                for w in want {
                    match have.iter().position(|h| h == w) {
                        Some(i) => idx.push(i),
                        None => continue 'entry,
                    }
                }
                subset.push(idx);
            }
            return Some((e, subset));
        }
        None
    }

    /// Make sure `slots` is covered, computing a new tensor if needed.
    pub fn ensure(
        &mut self,
        config: &ScenarioConfig,
        prepared: &PreparedTrack,
        slots: &[Vec<ClassicalOrbitalElements>],
    ) -> Result<()> {
        if self.lookup(slots).is_some() {
            return Ok(());
        }
        let fov = FovSpec::new(config.fov_half_angle, AxisMode::Nadir)?;
        let lists: Vec<Vec<Vec<ClassicalOrbitalElements>>> = slots.iter().map(|s| vec![s.clone()]).collect();
        let v = compute_vtw_tensor(&lists, &prepared.positions, &prepared.grid, &fov, &config.consts)?;
        self.entries.push((slots.to_vec(), v));
        Ok(())
    }

    /// Tensor for `slots` on `stages` equal stages.
    pub fn tensor(&self, slots: &[Vec<ClassicalOrbitalElements>], stages: usize) -> Result<VisibilityTensor> {
        let (e, subset) = self
            .lookup(slots)
            .ok_or_else(|| Error::Validation("slot set missing from visibility cache".into()))?;
        self.entries[e].1.restage(stages, &subset)
    }
}

/// Per-satellite candidate slots of a model (identical in every stage).
pub fn model_slots(config: &ScenarioConfig, spec: &ModelSpec) -> Result<Vec<Vec<ClassicalOrbitalElements>>> {
    let (grid_spec, mode) = match spec.kind {
        ModelKind::Baseline | ModelKind::Agility => {
            return Ok(config.satellites.iter().map(|s| vec![s.elements]).collect());
        }
        ModelKind::Phasing => (SlotGridSpec::phasing(spec.num_phases), GridMode::PhasingOnly),
        ModelKind::Unrestricted => (
            SlotGridSpec::unrestricted(spec.num_phases, spec.num_plane_axis),
            GridMode::Unrestricted,
        ),
    };
    config
        .satellites
        .iter()
        .map(|s| generate_slot_grid(&s.elements, &grid_spec, config.budget, mode, &config.consts))
        .collect()
}

/// Model A opportunities: at each control opportunity, the point rewarded
/// at its first step, with unit weight, at that step's ECI position.
pub fn agility_opportunities(prepared: &PreparedTrack, consts: &AstroConstants) -> Vec<Vec<WeightedTarget>> {
    let grid = &prepared.grid;
    let spc = grid.steps_per_control();
    (0..grid.num_controls())
        .map(|tau| {
            let step = 1 + tau * spc;
            prepared
                .targets
                .active_point(step)
                .map(|p| {
                    vec![WeightedTarget {
                        position: geodetic_to_eci(&prepared.targets.points[p], grid.time_of_step(step), consts),
                        weight: 1.0,
                    }]
                })
                .unwrap_or_default()
        })
        .collect()
}

fn run_agility(config: &ScenarioConfig, spec: &ModelSpec, prepared: &PreparedTrack) -> Result<ModelOutcome> {
    let grid = &prepared.grid;
    let consts = &config.consts;
    let opportunities = agility_opportunities(prepared, consts);
    let active = prepared.targets.active_positions(grid, consts);
    let fov = FovSpec::new(config.fov_half_angle, AxisMode::PointingDirection)?;
    let mut z = 0.0;
    let mut schedules = Vec::with_capacity(config.satellites.len());
    for sat in &config.satellites {
        let schedule = optimize_slew_schedule(&sat.elements, &opportunities, &config.agility, grid, consts)?;
        let visible = slewed_visibility(&sat.elements, &schedule, &active, &fov, grid, consts)?;
        z += score_agility(&schedule, &visible, grid, &config.agility).total_reward;
        schedules.push(schedule);
    }
    Ok(ModelOutcome {
        model: spec.name.clone(),
        z,
        plan: None,
        schedules,
    })
}

/// Run one model against a prepared track, taking visibility from `cache`
/// (which must already cover the model's slots unless the model is A).
pub fn run_model_cached(
    config: &ScenarioConfig,
    spec: &ModelSpec,
    prepared: &PreparedTrack,
    cache: &VisibilityCache,
) -> Result<ModelOutcome> {
    if spec.kind == ModelKind::Agility {
        return run_agility(config, spec, prepared);
    }
    let slots = model_slots(config, spec)?;
    let stages = spec.stages;
    let v = cache.tensor(&slots, stages)?;
    let rewards = build_reward_matrix(prepared.grid.num_steps, prepared.targets.num_points(), stages)?;
    let sats = config.satellites.len();
    let plan = if spec.kind == ModelKind::Baseline {
        let mut plan = ReconfigPlan::all_stay(sats, stages);
        plan.objective = score_paths(&plan.paths, &v, &rewards)?;
        plan
    } else {
        let grid = prepared.grid.with_stages(stages)?;
        let initial: Vec<ClassicalOrbitalElements> = config.satellites.iter().map(|s| s.elements).collect();
        let lists = slots.iter().map(|s| vec![s.clone(); stages]).collect();
        let costs = build_cost_matrix(
            &initial,
            &lists,
            &grid,
            config.max_revs,
            config.budget,
            &config.consts,
        )?;
        solve_mcrp_with(&v, &rewards, &costs, &config.solver)?
    };
    Ok(ModelOutcome {
        model: spec.name.clone(),
        z: plan.objective,
        plan: Some(plan),
        schedules: Vec::new(),
    })
}

/// Run one model on one track from scratch.
pub fn run_model(config: &ScenarioConfig, spec: &ModelSpec, track: &TcTrack) -> Result<ModelOutcome> {
    let prepared = PreparedTrack::new(config, track.clone())?;
    let mut cache = VisibilityCache::default();
    if spec.kind != ModelKind::Agility {
        cache.ensure(config, &prepared, &model_slots(config, spec)?)?;
    }
    run_model_cached(config, spec, &prepared, &cache)
}

/// All configured models on one track, sharing visibility between models
/// with nested slot sets.
pub fn run_track(config: &ScenarioConfig, track: TcTrack) -> Result<TrackOutcome> {
    let name = track.name.clone();
    let wrap = |model: &str, e: Error| Error::Job {
        track: name.clone(),
        model: model.to_string(),
        source: Box::new(e),
    };
    let prepared = PreparedTrack::new(config, track).map_err(|e| wrap("-", e))?;
    let mut order: Vec<&ModelSpec> = config.models.iter().filter(|m| m.kind != ModelKind::Agility).collect();
    // largest slot sets first so smaller nested grids hit the cache
    order.sort_by_key(|m| std::cmp::Reverse(m.num_slots()));
    let mut cache = VisibilityCache::default();
    for spec in order {
        let slots = model_slots(config, spec).map_err(|e| wrap(&spec.name, e))?;
        cache.ensure(config, &prepared, &slots).map_err(|e| wrap(&spec.name, e))?;
    }
    log::info!("track {}: geometry ready ({} tensors)", prepared.name(), cache.entries.len());
    let models = config
        .models
        .par_iter()
        .map(|spec| run_model_cached(config, spec, &prepared, &cache).map_err(|e| wrap(&spec.name, e)))
        .collect::<Result<Vec<_>>>()?;
    for m in &models {
        log::info!("track {}: model {} z = {}", prepared.name(), m.model, m.z);
    }
    Ok(TrackOutcome {
        track: prepared.track.name.clone(),
        polyline: prepared.track.polyline_csv(),
        models,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusResult {
    pub tracks: Vec<TrackOutcome>,
    pub report: ComparisonReport,
}

/// Load every track listed in the config.
pub fn load_tracks(config: &ScenarioConfig) -> Result<Vec<TcTrack>> {
    config
        .tracks
        .iter()
        .map(|path| {
            let bytes = fs::read(path)?;
            let mut track = parse_track_csv(&bytes).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?;
            if track.name.is_empty() {
                track.name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
            }
            Ok(track)
        })
        .collect()
}

/// Run every model on every track in a pool of `threads` workers (all cores
/// when `None`). Results come back in (track, model) configuration order.
pub fn run_corpus(config: &ScenarioConfig, tracks: Vec<TcTrack>, threads: Option<usize>) -> Result<CorpusResult> {
    config.validate()?;
    let mut names: Vec<&str> = tracks.iter().map(|t| t.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate track name `{}`", w[0])));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes = pool.install(|| {
        tracks
            .into_par_iter()
            .map(|t| run_track(config, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let report = build_report(config, &outcomes);
    Ok(CorpusResult {
        tracks: outcomes,
        report,
    })
}

fn build_report(config: &ScenarioConfig, outcomes: &[TrackOutcome]) -> ComparisonReport {
    let table = ZTable {
        tracks: outcomes.iter().map(|t| t.track.clone()).collect(),
        models: config.models.iter().map(|m| m.name.clone()).collect(),
        z: outcomes.iter().map(|t| t.models.iter().map(|m| m.z).collect()).collect(),
    };
    let mut notes = vec![
        "orbits use two-body motion with J2 secular drift in place of SGP4 ephemerides".to_string(),
        "model A sums per-satellite rewards without deduplication; models B, P and U count each (step, point) once"
            .to_string(),
        format!(
            "fov half-angle {:.2} deg, time step {} s, control step {} s, budget {} km/s per satellite",
            config.fov_half_angle.to_degrees(),
            config.dt,
            config.control_step,
            config.budget
        ),
    ];
    for t in outcomes {
        for m in &t.models {
            if let Some(p) = m.plan.as_ref().filter(|p| !p.optimal) {
                notes.push(format!(
                    "{} {}: search stopped after {} nodes, z within {} of optimal",
                    t.track, m.model, p.nodes, p.gap
                ));
            }
        }
    }
    ComparisonReport::new(table, notes)
}

/// Write `rewards.csv`, `pct_increase.csv`, `outperform.csv`, `report.txt`
/// and the `plans/`, `schedules/` and `tracks/` dumps under `out`.
pub fn write_outputs(result: &CorpusResult, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let r = &result.report;
    fs::write(out.join("rewards.csv"), emit_report(r, ReportFormat::Csv))?;
    fs::write(out.join("pct_increase.csv"), r.pct_csv())?;
    fs::write(out.join("outperform.csv"), r.outperform_csv())?;
    fs::write(out.join("report.txt"), emit_report(r, ReportFormat::TextTable))?;
    let plans = out.join("plans");
    let schedules = out.join("schedules");
    let tracks = out.join("tracks");
    for d in [&plans, &schedules, &tracks] {
        fs::create_dir_all(d)?;
    }
    for t in &result.tracks {
        fs::write(tracks.join(format!("{}.csv", t.track)), &t.polyline)?;
        for m in &t.models {
            if let Some(p) = &m.plan {
                fs::write(plans.join(format!("{}_{}.csv", t.track, m.model)), p.to_csv())?;
            }
            for (k, s) in m.schedules.iter().enumerate() {
                fs::write(schedules.join(format!("{}_sat{k}.csv", t.track)), s.to_csv())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tc::{TrackSample, SIX_HOURS};

    fn short_track() -> TcTrack {
        let samples = (0..5)
            .map(|i| TrackSample {
                time: i as f64 * SIX_HOURS,
                latitude: (15.0 + 0.5 * i as f64).to_radians(),
                longitude: (-60.0 - 0.8 * i as f64).to_radians(),
            })
            .collect();
        TcTrack::new("T", samples).unwrap()
    }

    fn cfg(models: &str) -> ScenarioConfig {
        ScenarioConfig {
            dt: 300.0,
            models: ModelSpec::parse_list(models).unwrap(),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn single_phase_model_equals_baseline() {
        let mut c = cfg("B");
        c.models.push(ModelSpec {
            name: "P0".into(),
            kind: ModelKind::Phasing,
            stages: 2,
            num_phases: 1,
            num_plane_axis: 1,
        });
        let out = run_track(&c, short_track()).unwrap();
        assert_eq!(out.models[0].z, out.models[1].z);
    }

    #[test]
    fn shared_geometry_matches_standalone_runs() {
        let c = cfg("B,P1,P2");
        let out = run_track(&c, short_track()).unwrap();
        for (spec, m) in c.models.iter().zip(&out.models) {
            let alone = run_model(&c, spec, &short_track()).unwrap();
            assert_eq!(alone.z, m.z, "model {}", spec.name);
        }
        assert!(out.models[2].z >= out.models[1].z);
        assert!(out.models[1].z >= out.models[0].z);
    }

    #[test]
    fn unseen_track_scores_zero() {
        // a single equatorial satellite never sees a point near the pole
        let mut c = cfg("B,A,P1");
        c.satellites = vec![NamedOrbit {
            name: "EQ".into(),
            elements: ClassicalOrbitalElements::from_degrees(7000.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        }];
        let samples = (0..5)
            .map(|i| TrackSample {
                time: i as f64 * SIX_HOURS,
                latitude: 85f64.to_radians(),
                longitude: (10.0 * i as f64).to_radians(),
            })
            .collect();
        let out = run_track(&c, TcTrack::new("POLE", samples).unwrap()).unwrap();
        for m in &out.models {
            assert_eq!(m.z, 0.0, "model {}", m.model);
        }
        let plan = out.models[2].plan.as_ref().unwrap();
        assert!(plan.paths[0].iter().all(|&j| j == 0));
    }
}
