//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::oracle::{phasing_oracle, plane_oracle, random_targets, slew_grid_oracle, slew_sat};
use common::{random_instance, InstanceShape};
use conops_core::agility::{
    check_schedule, mat_mul, optimize_slew_schedule, rot_x, rot_y, rot_z, rotation_matrix, schedule_objective,
    score_agility, AgilityConfig, SlewSchedule,
};
use conops_core::astro::{propagate, wrap_pi, AstroConstants, ClassicalOrbitalElements, TimeGrid};
use conops_core::harness::{
    agility_opportunities, reference_constellation, run_corpus, write_outputs, CorpusResult, ModelKind, ModelSpec,
    PreparedTrack, ScenarioConfig,
};
use conops_core::maneuver::{
    combined_plane_cost, generate_slot_grid, inclination_change_cost, max_inclination_offset, max_raan_offset,
    phasing_cost, raan_change_cost, transfer_cost, GridMode, SlotGridSpec,
};
use conops_core::mcrp::{solve_mcrp, solve_mcrp_exhaustive};
use conops_core::tc::{corpus_track, TcTrack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Corpus runs shared by criteria 2, 3, 5, 8 and 9.
struct Runs {
    config: ScenarioConfig,
    tracks: Vec<TcTrack>,
    single: Result<(CorpusResult, Duration), String>,
    repeat: Result<CorpusResult, String>,
    narrow: Result<CorpusResult, String>,
}

impl Runs {
    fn execute() -> Self {
        let config = ScenarioConfig {
            dt: 100.0,
            ..ScenarioConfig::default()
        };
        let tracks: Vec<TcTrack> = (1..=20).map(|s| corpus_track(s).expect("corpus track")).collect();
        let start = Instant::now();
        let single = run_corpus(&config, tracks.clone(), Some(1))
            .map(|r| (r, start.elapsed()))
            .map_err(|e| e.to_string());
        let repeat = run_corpus(&config, tracks.clone(), Some(2)).map_err(|e| e.to_string());
        let narrow_cfg = ScenarioConfig {
            fov_half_angle: 30f64.to_radians(),
            models: config.models.iter().filter(|m| m.kind != ModelKind::Agility).cloned().collect(),
            ..config.clone()
        };
        let narrow = run_corpus(&narrow_cfg, tracks.clone(), None).map_err(|e| e.to_string());
        Self {
            config,
            tracks,
            single,
            repeat,
            narrow,
        }
    }

    fn single(&self) -> Result<&CorpusResult, String> {
        self.single.as_ref().map(|(r, _)| r).map_err(|e| format!("corpus run failed: {e}"))
    }
}

fn model_names(spec: &[ModelSpec], kinds: &[ModelKind]) -> Vec<String> {
    spec.iter().filter(|m| kinds.contains(&m.kind)).map(|m| m.name.clone()).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let double = InstanceShape {
        multi_cover: true,
        ..InstanceShape::small()
    };
    let mut n = 0;
    for i in 0..300 {
        let shape = if i % 3 == 2 { double } else { InstanceShape::small() };
        let inst = random_instance(&mut rng, &shape);
        let fast = solve_mcrp(&inst.v, &inst.rewards, &inst.costs).map_err(|e| e.to_string())?;
        let slow = solve_mcrp_exhaustive(&inst.v, &inst.rewards, &inst.costs).map_err(|e| e.to_string())?;
        ensure(fast.objective == slow.objective, || {
            format!("instance {i}: branch and bound {} vs exhaustive {}", fast.objective, slow.objective)
        })?;
        n += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("{n} instances took {secs:.1} s"))?;
    Ok(format!("{n} random instances match exhaustive search in {secs:.2} s"))
}

fn criterion_2(runs: &Runs) -> Outcome {
    let (result, elapsed) = runs.single.as_ref().map_err(|e| format!("corpus run failed: {e}"))?;
    let r = &result.report;
    let models = model_names(&runs.config.models, &[ModelKind::Phasing, ModelKind::Unrestricted]);
    for (t, name) in r.table.tracks.iter().enumerate() {
        let b = r.z(t, "B").unwrap();
        for m in &models {
            let z = r.z(t, m).unwrap();
            ensure(z >= b, || format!("{name}: z({m}) = {z} < z(B) = {b}"))?;
        }
    }
    for tr in &result.tracks {
        for m in &tr.models {
            if let Some(p) = m.plan.as_ref().filter(|p| !p.optimal) {
                return Err(format!("{} {}: solve stopped with gap {}", tr.track, m.model, p.gap));
            }
        }
    }
    let secs = elapsed.as_secs_f64();
    ensure(secs < 600.0, || format!("single-threaded corpus took {secs:.1} s"))?;
    Ok(format!(
        "{} tracks, {} reconfigurable models >= B everywhere; single-threaded dt = {} s run in {secs:.1} s",
        runs.tracks.len(),
        models.len(),
        runs.config.dt
    ))
}

fn criterion_3(runs: &Runs) -> Outcome {
    let r = &runs.single()?.report;
    for (t, name) in r.table.tracks.iter().enumerate() {
        for (lo, hi) in [("P1", "P2"), ("P3", "P4")] {
            let (a, b) = (r.z(t, lo).unwrap(), r.z(t, hi).unwrap());
            ensure(b >= a, || format!("{name}: z({hi}) = {b} < z({lo}) = {a}"))?;
        }
    }
    let mean = |m: &str| r.pct.iter().find(|s| s.model == m).and_then(|s| s.mean);
    let mut parts = Vec::new();
    for (lo, hi) in [("P1", "P2"), ("P3", "P4")] {
        let (a, b) = (mean(lo).ok_or("missing mean")?, mean(hi).ok_or("missing mean")?);
        ensure(a <= b, || format!("mean increase {lo} {a:.2}% > {hi} {b:.2}%"))?;
        parts.push(format!("{lo} {a:.1}% <= {hi} {b:.1}%"));
    }
    Ok(format!("pointwise nesting holds on every track; mean increase {}", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let c = AstroConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let a = rng.gen_range(6800.0..7400.0);
        let i = rng.gen_range(0.5f64..179.5).to_radians();
        let o = rng.gen_range(0.0..TAU);
        let di = rng.gen_range(-0.3..0.3f64).clamp(-i, PI - i);
        let dr = rng.gen_range(-0.5..0.5);
        let mut orb = ClassicalOrbitalElements::from_degrees(a, 0.0, 0.0, 0.0, 0.0, 0.0);
        orb.inclination = i;
        orb.raan = o;
        let dphi = rng.gen_range(0.0..TAU);
        let revs = rng.gen_range(1..=4);
        let ph = phasing_cost(&orb, dphi, revs, &c).map_err(|e| e.to_string())?.delta_v;
        let ph_want = phasing_oracle(a, dphi, revs);
        let pairs = [
            (inclination_change_cost(&orb, di, &c).delta_v, plane_oracle(a, i, o, i + di, o)),
            (raan_change_cost(&orb, dr, &c).delta_v, plane_oracle(a, i, o, i, o + dr)),
            (combined_plane_cost(&orb, di, dr, &c).delta_v, plane_oracle(a, i, o, i + di, o + dr)),
            if ph.is_infinite() && ph_want.is_infinite() { (0.0, 0.0) } else { (ph, ph_want) },
        ];
        for (got, want) in pairs {
            let err = (got - want).abs();
            ensure(err < 1e-9, || format!("case {case}: {got} vs oracle {want}"))?;
            worst = worst.max(err);
        }
        let mut prev = f64::INFINITY;
        for r in 1..=6 {
            let v = phasing_cost(&orb, dphi, r, &c).map_err(|e| e.to_string())?.delta_v;
            ensure(v <= prev, || format!("case {case}: phasing cost rises from {prev} to {v} at {r} revs"))?;
            prev = v;
        }
    }
    let mut worst_cal: f64 = 0.0;
    for sat in reference_constellation() {
        let init = sat.elements;
        let grid = generate_slot_grid(&init, &SlotGridSpec::unrestricted(15, 5), 2.0, GridMode::Unrestricted, &c)
            .map_err(|e| e.to_string())?;
        let di = max_inclination_offset(&init, 2.0, &c);
        let dr = max_raan_offset(&init, 2.0, &c);
        let outer_i = grid.iter().find(|s| (s.inclination - init.inclination - di).abs() < 1e-12);
        let outer_r = grid
            .iter()
            .find(|s| s.inclination == init.inclination && (wrap_pi(s.raan - init.raan - dr)).abs() < 1e-12);
        for outer in [outer_i, outer_r] {
            let outer = outer.ok_or_else(|| format!("{}: extreme plane slot missing", sat.name))?;
            let dv = transfer_cost(&init, outer, 4, &c).map_err(|e| e.to_string())?.delta_v;
            ensure((dv - 2.0).abs() <= 1e-6, || format!("{}: extreme slot costs {dv} km/s", sat.name))?;
            worst_cal = worst_cal.max((dv - 2.0).abs());
        }
    }
    Ok(format!(
        "1000 cases within {worst:.1e} km/s of oracles, phasing non-increasing in revs, extreme slots within {worst_cal:.1e} of 2 km/s"
    ))
}

fn criterion_5(runs: &Runs) -> Outcome {
    let c = &runs.config.consts;
    let config = &runs.config.agility;
    // hand values
    let grid = TimeGrid::new(1000.0, 100.0, 100.0, 1).map_err(|e| e.to_string())?;
    let hand = AgilityConfig {
        control_step: 100.0,
        ..*config
    };
    let z = hand.max_angle;
    let one = SlewSchedule {
        angles: vec![[z, 0.0, 0.0]],
        objective: 0.0,
    };
    let ext = SlewSchedule {
        angles: vec![[z, -z, z]],
        objective: 0.0,
    };
    let r1 = score_agility(&one, &[true], &grid, &hand).total_reward;
    let r2 = score_agility(&ext, &[true], &grid, &hand).total_reward;
    ensure(r1 == 5.0 / 6.0 && r2 == 0.5, || format!("hand values {r1} and {r2}"))?;

    // corpus schedules
    let result = runs.single()?;
    let mut checked = 0;
    for (outcome, track) in result.tracks.iter().zip(&runs.tracks) {
        let prepared = PreparedTrack::new(&runs.config, track.clone()).map_err(|e| e.to_string())?;
        let ops = agility_opportunities(&prepared, c);
        let a = outcome.models.iter().find(|m| m.model == "A").ok_or("model A missing")?;
        for (k, sched) in a.schedules.iter().enumerate() {
            check_schedule(sched, config).map_err(|e| format!("{} sat {k}: {e}", outcome.track))?;
            let orbit = &runs.config.satellites[k].elements;
            let nadir = schedule_objective(orbit, &ops, &SlewSchedule::nadir(ops.len()), &prepared.grid, c)
                .map_err(|e| e.to_string())?;
            ensure(sched.objective <= nadir + 1e-9, || {
                format!("{} sat {k}: objective {} worse than nadir {nadir}", outcome.track, sched.objective)
            })?;
            checked += 1;
        }
    }

    // grid oracle
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..40 {
        let n_ops = 1 + case % 2;
        let grid = TimeGrid::new(1800.0 * n_ops as f64, 100.0, 1800.0, 1).map_err(|e| e.to_string())?;
        let targets = random_targets(&mut rng, n_ops, &grid, c);
        let sched = optimize_slew_schedule(&slew_sat(), &targets, config, &grid, c).map_err(|e| e.to_string())?;
        check_schedule(&sched, config).map_err(|e| format!("oracle case {case}: {e}"))?;
        let oracle = slew_grid_oracle(&targets, &grid, c);
        let gap = sched.objective - oracle;
        ensure(gap <= 1e-3, || format!("oracle case {case}: optimizer {} vs grid {oracle}", sched.objective))?;
        worst = worst.max(gap);
    }
    Ok(format!(
        "hand values 5/6 and 0.5 exact; {checked} corpus schedules feasible and no worse than nadir; worst grid-oracle gap {worst:.2e} rad"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let (a, b, g) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let m = rotation_matrix(a, b, g);
        let p = mat_mul(&mat_mul(&rot_x(a), &rot_y(b)), &rot_z(g));
        for i in 0..3 {
            for j in 0..3 {
                let orth: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum::<f64>() - if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[i][j] - p[i][j]).abs()).max(orth.abs());
            }
        }
    }
    ensure(worst < 1e-12, || format!("deviation {worst:e}"))?;
    Ok(format!("10000 angle triples, max deviation {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let two_body = AstroConstants::two_body();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = ClassicalOrbitalElements::from_degrees(
            rng.gen_range(6700.0..42_000.0),
            rng.gen_range(0.0..0.7),
            rng.gen_range(0.0..180.0),
            rng.gen_range(0.0..360.0),
            rng.gen_range(0.0..360.0),
            rng.gen_range(0.0..360.0),
        );
        if c.semi_major_axis * (1.0 - c.eccentricity) <= two_body.earth_radius {
            continue;
        }
        let period = TAU * (c.semi_major_axis.powi(3) / two_body.mu).sqrt();
        let out = propagate(&c, period, &two_body).map_err(|e| e.to_string())?;
        worst = worst.max(wrap_pi(out.true_anomaly - c.true_anomaly).abs());
    }
    ensure(worst < 1e-9, || format!("period closure error {worst:e} rad"))?;
    let k = AstroConstants::default();
    let mut drifts = Vec::new();
    for sat in reference_constellation() {
        let out = propagate(&sat.elements, 86_400.0, &k).map_err(|e| e.to_string())?;
        let drift = wrap_pi(out.raan - sat.elements.raan).to_degrees();
        ensure((drift - 0.9856).abs() / 0.9856 < 0.05, || format!("{}: {drift} deg/day", sat.name))?;
        drifts.push(drift);
    }
    let lo = drifts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = drifts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!("period closure within {worst:.1e} rad; RAAN drift {lo:.4}..{hi:.4} deg/day"))
}

fn criterion_8(runs: &Runs) -> Outcome {
    let a = runs.single()?;
    let b = runs.repeat.as_ref().map_err(|e| format!("repeat run failed: {e}"))?;
    let (da, db) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    write_outputs(a, da.path()).map_err(|e| e.to_string())?;
    write_outputs(b, db.path()).map_err(|e| e.to_string())?;
    for f in ["rewards.csv", "pct_increase.csv", "outperform.csv"] {
        let x = std::fs::read(da.path().join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(db.path().join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    Ok("rewards.csv, pct_increase.csv and outperform.csv byte-identical across 1- and 2-thread runs".into())
}

fn criterion_9(runs: &Runs) -> Outcome {
    let wide = &runs.single()?.report;
    let narrow = &runs.narrow.as_ref().map_err(|e| format!("30 deg run failed: {e}"))?.report;
    let models = model_names(
        &runs.config.models,
        &[ModelKind::Baseline, ModelKind::Phasing, ModelKind::Unrestricted],
    );
    let (mut drops, mut total) = (0, 0);
    for (t, name) in wide.table.tracks.iter().enumerate() {
        for m in &models {
            let (zw, zn) = (wide.z(t, m).unwrap(), narrow.z(t, m).unwrap());
            ensure(zn <= zw, || format!("{name} {m}: z = {zn} at 30 deg > {zw} at 45 deg"))?;
            drops += usize::from(zn < zw);
            total += 1;
        }
    }
    Ok(format!("30 deg z <= 45 deg z on all {total} (track, model) pairs, strictly lower on {drops}"))
}

fn run(n: usize, what: &'static str, f: impl FnOnce() -> Outcome) -> (usize, &'static str, Outcome) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    (n, what, outcome)
}

fn main() -> ExitCode {
    let mut results = vec![
        run(1, "MCRP oracle equivalence", criterion_1),
        run(4, "maneuver costs", criterion_4),
        run(6, "rotation matrix", criterion_6),
        run(7, "propagation", criterion_7),
    ];
    eprintln!("running the 20-track corpus three times (45 deg on 1 and 2 threads, 30 deg)...");
    let runs = Runs::execute();
    results.push(run(2, "baseline dominance", || criterion_2(&runs)));
    results.push(run(3, "slot/stage monotonicity", || criterion_3(&runs)));
    results.push(run(5, "agility feasibility and scoring", || criterion_5(&runs)));
    results.push(run(8, "pipeline determinism", || criterion_8(&runs)));
    results.push(run(9, "FOV study", || criterion_9(&runs)));
    results.sort_by_key(|r| r.0);
    let mut ok = true;
    for (n, what, outcome) in results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({what}): {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL criterion {n} ({what}): {detail}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
