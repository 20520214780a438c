//! Scenario configuration: a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! sat = DMC 3-FM3, 7006.01, 17.07e-4, 97.72, 307.83, 77.52, 104.88
//! fov_deg = 45
//! dt_s = 100
//! control_step_s = 1800
//! slew_rate_deg_s = 3
//! slew_max_deg = 35
//! budget_km_s = 2
//! max_revs = 4
//! j2 = true
//! node_budget = 20000000
//! models = B,A,P1,P2,P3,P4,U1,U2
//! track = tracks/syn_01.csv
//! ```
//!
//! `sat` takes a name followed by a, e, i, RAAN, argument of periapsis and
//! true anomaly (km and degrees) and may repeat, as may `track`. Track paths
//! are relative to the config file.

use std::path::{Path, PathBuf};

use crate::agility::AgilityConfig;
use crate::astro::{AstroConstants, ClassicalOrbitalElements};
use crate::error::{Error, Result};
use crate::maneuver::DEFAULT_MAX_REVS;
use crate::mcrp::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Nadir pointing, fixed orbits.
    Baseline,
    /// Slewing, fixed orbits.
    Agility,
    /// Reconfiguration among phase slots in the initial plane.
    Phasing,
    /// Reconfiguration among inclination, RAAN and phase slots.
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    pub stages: usize,
    /// Phases per plane (ell).
    pub num_phases: usize,
    /// Planes per axis including the initial plane (m).
    pub num_plane_axis: usize,
}

impl ModelSpec {
    /// The eight standard models: B, A, P1-P4, U1, U2.
    pub fn by_name(name: &str) -> Result<Self> {
        let (kind, stages, num_phases, num_plane_axis) = match name {
            "B" => (ModelKind::Baseline, 1, 1, 1),
            "A" => (ModelKind::Agility, 1, 1, 1),
            "P1" => (ModelKind::Phasing, 2, 10, 1),
            "P2" => (ModelKind::Phasing, 2, 20, 1),
            "P3" => (ModelKind::Phasing, 4, 10, 1),
            "P4" => (ModelKind::Phasing, 4, 20, 1),
            "U1" => (ModelKind::Unrestricted, 2, 15, 5),
            "U2" => (ModelKind::Unrestricted, 4, 15, 5),
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        Ok(Self {
            name: name.to_string(),
            kind,
            stages,
            num_phases,
            num_plane_axis,
        })
    }

    pub fn standard() -> Vec<Self> {
        ["B", "A", "P1", "P2", "P3", "P4", "U1", "U2"]
            .iter()
            .map(|n| Self::by_name(n).expect("standard model names are valid"))
            .collect()
    }

    /// Comma-separated model names.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        let models = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Self::by_name)
            .collect::<Result<Vec<_>>>()?;
        if models.is_empty() {
            return Err(Error::Config("empty model list".into()));
        }
        Ok(models)
    }

    /// Slots per satellite and stage.
    pub fn num_slots(&self) -> usize {
        match self.kind {
            ModelKind::Baseline | ModelKind::Agility => 1,
            ModelKind::Phasing => self.num_phases,
            ModelKind::Unrestricted => self.num_phases * (2 * self.num_plane_axis - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedOrbit {
    pub name: String,
    pub elements: ClassicalOrbitalElements,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub satellites: Vec<NamedOrbit>,
    pub fov_half_angle: f64,
    pub dt: f64,
    pub control_step: f64,
    pub agility: AgilityConfig,
    pub budget: f64,
    pub max_revs: u32,
    pub consts: AstroConstants,
    pub models: Vec<ModelSpec>,
    pub tracks: Vec<PathBuf>,
    pub solver: SolverOptions,
}

/// The five sun-synchronous imagers used throughout the study.
pub fn reference_constellation() -> Vec<NamedOrbit> {
    [
        ("DMC 3-FM3", 7006.01, 17.07e-4, 97.72, 307.83, 77.52, 104.88),
        ("DMC 3-FM1", 6992.54, 8.03e-4, 97.72, 306.02, 116.04, 302.43),
        ("HUANJING 1B", 7003.07, 48.93e-4, 97.80, 89.49, 107.47, 140.62),
        ("HUANJING 1A", 7007.36, 39.24e-4, 97.79, 85.41, 116.27, 189.24),
        ("NIGERIASAT 1", 6992.76, 41.58e-4, 97.85, 228.61, 260.58, 149.89),
    ]
    .into_iter()
    .map(|(name, a, e, i, raan, argp, nu)| NamedOrbit {
        name: name.to_string(),
        elements: ClassicalOrbitalElements::from_degrees(a, e, i, raan, argp, nu),
    })
    .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            satellites: reference_constellation(),
            fov_half_angle: 45f64.to_radians(),
            dt: 100.0,
            control_step: 1800.0,
            agility: AgilityConfig::reference(),
            budget: 2.0,
            max_revs: DEFAULT_MAX_REVS,
            consts: AstroConstants::default(),
            models: ModelSpec::standard(),
            tracks: Vec::new(),
            solver: SolverOptions::default(),
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(line, format!("`{key}` expects a number, got `{v}`")))
}

impl ScenarioConfig {
    /// Parse config text; relative track paths are joined to `base_dir`.
    /// Keys not given keep their reference values, except that a file with
    /// any `sat` line replaces the whole constellation.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut sats = Vec::new();
        let mut rate_deg = None;
        let mut max_deg = None;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(n, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "sat" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 7 {
                        return Err(bad(n, "`sat` expects name, a, e, i, raan, argp, nu"));
                    }
                    let v: Vec<f64> = parts[1..]
                        .iter()
                        .map(|p| num(n, key, p))
                        .collect::<Result<_>>()?;
                    let elements = ClassicalOrbitalElements::from_degrees(v[0], v[1], v[2], v[3], v[4], v[5]);
                    elements
                        .validate(&cfg.consts)
                        .map_err(|e| bad(n, e.to_string()))?;
                    sats.push(NamedOrbit {
                        name: parts[0].to_string(),
                        elements,
                    });
                }
                "fov_deg" => cfg.fov_half_angle = num(n, key, value)?.to_radians(),
                "dt_s" => cfg.dt = num(n, key, value)?,
                "control_step_s" => cfg.control_step = num(n, key, value)?,
                "slew_rate_deg_s" => rate_deg = Some(num(n, key, value)?),
                "slew_max_deg" => max_deg = Some(num(n, key, value)?),
                "budget_km_s" => cfg.budget = num(n, key, value)?,
                "max_revs" => {
                    cfg.max_revs = value
                        .parse()
                        .ok()
                        .filter(|r| *r >= 1)
                        .ok_or_else(|| bad(n, "`max_revs` expects a positive integer"))?
                }
                "node_budget" => {
                    cfg.solver.node_budget = value
                        .parse()
                        .map_err(|_| bad(n, "`node_budget` expects an integer"))?
                }
                "j2" => {
                    cfg.consts.j2_enabled = match value {
                        "true" | "on" | "1" => true,
                        "false" | "off" | "0" => false,
                        _ => return Err(bad(n, "`j2` expects true or false")),
                    }
                }
                "models" => cfg.models = ModelSpec::parse_list(value).map_err(|e| bad(n, e.to_string()))?,
                "track" => cfg.tracks.push(base_dir.join(value)),
                other => return Err(bad(n, format!("unknown key `{other}`"))),
            }
        }
        if !sats.is_empty() {
            cfg.satellites = sats;
        }
        cfg.agility.control_step = cfg.control_step;
        if let Some(r) = rate_deg {
            cfg.agility.max_rate = [r.to_radians(); 3];
        }
        if let Some(m) = max_deg {
            cfg.agility.max_angle = m.to_radians();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.satellites.is_empty() {
            return Err(Error::Config("at least one satellite is required".into()));
        }
        for s in &self.satellites {
            s.elements.validate(&self.consts)?;
        }
        if !(self.fov_half_angle > 0.0 && self.fov_half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("fov_deg must lie in (0, 90)".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config("dt_s must be positive".into()));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::Config("budget_km_s must be non-negative".into()));
        }
        self.agility.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        Ok(())
    }
}
