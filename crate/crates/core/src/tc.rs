//! Tropical-cyclone tracks: CSV ingestion, expansion into timed point
//! targets, and a seeded synthetic track generator.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::astro::{geodetic_to_eci, wrap_pi, AstroConstants, GeodeticPoint, TimeGrid, Vec3};
use crate::error::{Error, Result};
use crate::mcrp::active_window;

/// Best-track sampling interval (s).
pub const SIX_HOURS: f64 = 21_600.0;
pub const CSV_HEADER: &str = "name,time_hours,lat_deg,lon_deg";
/// Shortest and longest storm durations the generator accepts (days).
pub const MIN_DURATION_DAYS: f64 = 2.75;
pub const MAX_DURATION_DAYS: f64 = 15.5;
/// Largest great-circle move between consecutive synthetic samples (km).
pub const MAX_STEP_KM: f64 = 200.0;

const SPACING_TOL_S: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    /// Seconds from the scenario start.
    pub time: f64,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcTrack {
    pub name: String,
    pub samples: Vec<TrackSample>,
    pub sample_interval: f64,
}

impl TcTrack {
    pub fn new(name: impl Into<String>, samples: Vec<TrackSample>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains([',', '\n', '\r']) {
            return Err(Error::Validation(format!("bad track name {name:?}")));
        }
        if samples.len() < 2 {
            return Err(Error::Validation("a track needs at least two samples".into()));
        }
        for s in &samples {
            if !(-PI / 2.0..=PI / 2.0).contains(&s.latitude) || !s.longitude.is_finite() {
                return Err(Error::Validation(format!(
                    "sample at {} s has latitude {} deg out of range",
                    s.time,
                    s.latitude.to_degrees()
                )));
            }
        }
        let interval = samples[1].time - samples[0].time;
        if !(interval > 0.0) {
            return Err(Error::Validation("samples must be strictly time-ordered".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if ((w[1].time - w[0].time) - interval).abs() > SPACING_TOL_S {
                return Err(Error::Validation(format!(
                    "non-uniform spacing between samples {} and {}",
                    i + 1,
                    i + 2
                )));
            }
        }
        Ok(Self {
            name,
            samples,
            sample_interval: interval,
        })
    }

    /// (count - 1) * interval, in seconds.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.sample_interval
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with six decimals, the same layout `parse_track_csv` reads.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                self.name,
                s.time / 3600.0,
                s.latitude.to_degrees(),
                s.longitude.to_degrees()
            );
        }
        out
    }

    /// `lat_deg,lon_deg` polyline for external plotting.
    pub fn polyline_csv(&self) -> String {
        let mut out = String::from("lat_deg,lon_deg\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.6},{:.6}", s.latitude.to_degrees(), s.longitude.to_degrees());
        }
        out
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Read a `name,time_hours,lat_deg,lon_deg` track. Blank lines are ignored;
/// every row must carry the same name.
pub fn parse_track_csv(bytes: &[u8]) -> Result<TcTrack> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(1, format!("invalid UTF-8: {e}")))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if header.trim().trim_start_matches('\u{feff}') != CSV_HEADER {
        return Err(parse_err(1, format!("expected header `{CSV_HEADER}`")));
    }
    let mut name: Option<String> = None;
    let mut samples = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |idx: usize, what: &str| -> Result<f64> {
            fields[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(n, format!("bad {what} `{}`", fields[idx])))
        };
        let hours = num(1, "time")?;
        let lat = num(2, "latitude")?;
        let lon = num(3, "longitude")?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Validation(format!("line {n}: latitude {lat} deg out of range")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Validation(format!("line {n}: longitude {lon} deg out of range")));
        }
        match &name {
            None => name = Some(fields[0].to_string()),
            Some(prev) if prev != fields[0] => {
                return Err(parse_err(n, format!("track name changes from `{prev}` to `{}`", fields[0])))
            }
            _ => {}
        }
        samples.push(TrackSample {
            time: hours * 3600.0,
            latitude: lat.to_radians(),
            longitude: wrap_pi(lon.to_radians()),
        });
    }
    TcTrack::new(name.unwrap_or_default(), samples)
}

/// Static point targets with the 1-based step window each one is rewarded in.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub points: Vec<GeodeticPoint>,
    pub windows: Vec<(usize, usize)>,
    pub num_steps: usize,
}

impl TargetSet {
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// 0-based index of the point rewarded at 1-based step `t`.
    pub fn active_point(&self, t: usize) -> Option<usize> {
        self.windows.iter().position(|&(a, b)| a <= t && t <= b)
    }

    /// ECI position of every point at every step: `out[t - 1][p]`.
    pub fn step_positions(&self, grid: &TimeGrid, consts: &AstroConstants) -> Vec<Vec<Vec3>> {
        (1..=grid.num_steps)
            .map(|t| {
                let time = grid.time_of_step(t);
                self.points.iter().map(|p| geodetic_to_eci(p, time, consts)).collect()
            })
            .collect()
    }

    /// ECI position of the rewarded point only, per step.
    pub fn active_positions(&self, grid: &TimeGrid, consts: &AstroConstants) -> Vec<Vec<Vec3>> {
        (1..=grid.num_steps)
            .map(|t| {
                self.active_point(t)
                    .map(|p| vec![geodetic_to_eci(&self.points[p], grid.time_of_step(t), consts)])
                    .unwrap_or_default()
            })
            .collect()
    }
}

/// Each sample becomes a sea-level target rewarded during its slice of the
/// horizon; slices tile steps `1..=T`.
pub fn track_to_targets(track: &TcTrack, grid: &TimeGrid) -> Result<TargetSet> {
    if (grid.duration - track.duration()).abs() > 1e-6 {
        return Err(Error::InvalidGrid(format!(
            "grid covers {} s but track `{}` lasts {} s",
            grid.duration,
            track.name,
            track.duration()
        )));
    }
    let p_count = track.len();
    let points = track
        .samples
        .iter()
        .map(|s| GeodeticPoint::new(s.latitude, s.longitude, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let windows = (1..=p_count).map(|p| active_window(p, grid.num_steps, p_count)).collect();
    Ok(TargetSet {
        points,
        windows,
        num_steps: grid.num_steps,
    })
}

/// Great-circle distance between two (lat, lon) pairs in radians.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius: f64) -> f64 {
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (0.5 * dlat).sin().powi(2) + lat1.cos() * lat2.cos() * (0.5 * dlon).sin().powi(2);
    2.0 * radius * h.sqrt().min(1.0).asin()
}

/// Point reached by travelling `dist` along `heading` (from north, clockwise).
fn destination(lat: f64, lon: f64, heading: f64, dist: f64, radius: f64) -> (f64, f64) {
    let d = dist / radius;
    let lat2 = (lat.sin() * d.cos() + lat.cos() * d.sin() * heading.cos()).asin();
    let lon2 = lon + (heading.sin() * d.sin() * lat.cos()).atan2(d.cos() - lat.sin() * lat2.sin());
    (lat2, wrap_pi(lon2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// North Atlantic / eastern Pacific genesis.
    WestHemisphere,
    /// Western Pacific genesis.
    EastHemisphere,
}

impl Region {
    fn genesis_box(self) -> ((f64, f64), (f64, f64)) {
        match self {
            Region::WestHemisphere => ((10.0, 20.0), (-75.0, -35.0)),
            Region::EastHemisphere => ((8.0, 20.0), (125.0, 160.0)),
        }
    }
}

/// Seeded storm-like track: genesis in the tropics, westward drift that
/// curves poleward and then recurves east, 6-hourly samples, and no step
/// longer than 200 km.
pub fn synthesize_track(seed: u64, duration_days: f64, region: Region) -> Result<TcTrack> {
    if !(MIN_DURATION_DAYS..=MAX_DURATION_DAYS).contains(&duration_days) {
        return Err(Error::Config(format!(
            "duration {duration_days} days outside [{MIN_DURATION_DAYS}, {MAX_DURATION_DAYS}]"
        )));
    }
    let intervals = (duration_days * 24.0 / 6.0).round() as usize;
    let radius = AstroConstants::default().earth_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ((lat_lo, lat_hi), (lon_lo, lon_hi)) = region.genesis_box();
    let mut lat = rng.gen_range(lat_lo..lat_hi).to_radians();
    let mut lon = rng.gen_range(lon_lo..lon_hi).to_radians();
    // heading measured clockwise from north; start heading roughly west-northwest
    let mut heading = rng.gen_range(275.0f64..300.0).to_radians();
    let turn_rate = rng.gen_range(2.0f64..6.0).to_radians();
    let mut samples = Vec::with_capacity(intervals + 1);
    samples.push(TrackSample {
        time: 0.0,
        latitude: lat,
        longitude: lon,
    });
    for i in 1..=intervals {
        let speed_km = rng.gen_range(60.0..(MAX_STEP_KM - 10.0));
        let wobble = rng.gen_range(-3.0f64..3.0).to_radians();
        let recurve = if heading > PI && heading < 2.0 * PI { turn_rate } else { 0.5 * turn_rate };
        heading = (heading + recurve + wobble).rem_euclid(2.0 * PI);
        // stay out of the polar caps: turn back equatorward above 55 deg
        if lat.to_degrees() > 55.0 {
            heading = rng.gen_range(100.0f64..150.0).to_radians();
        }
        let (lat2, lon2) = destination(lat, lon, heading, speed_km, radius);
        lat = lat2;
        lon = lon2;
        samples.push(TrackSample {
            time: i as f64 * SIX_HOURS,
            latitude: lat,
            longitude: lon,
        });
    }
    let region_tag = match region {
        Region::WestHemisphere => "W",
        Region::EastHemisphere => "E",
    };
    TcTrack::new(format!("SYN{seed:03}{region_tag}"), samples)
}

/// Corpus member for `seed`: duration drawn from the seed and rounded to
/// whole 6-hour samples, region alternating with seed parity.
pub fn corpus_track(seed: u64) -> Result<TcTrack> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x00C0_FFEE);
    let days = rng.gen_range(MIN_DURATION_DAYS..=MAX_DURATION_DAYS);
    let quarter_days = (days * 4.0).round() / 4.0;
    let region = if seed % 2 == 1 {
        Region::WestHemisphere
    } else {
        Region::EastHemisphere
    };
    synthesize_track(seed, quarter_days.clamp(MIN_DURATION_DAYS, MAX_DURATION_DAYS), region)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "name,time_hours,lat_deg,lon_deg\nALPHA,0,15.5,-60.25\nALPHA,6,16.0,-61.0\n";

    #[test]
    fn minimal_file() {
        let t = parse_track_csv(TWO_ROWS.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.duration(), SIX_HOURS);
        assert_eq!(t.name, "ALPHA");
    }

    #[test]
    fn twelve_rows_last_66_hours() {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for i in 0..12 {
            s.push_str(&format!("X,{},{},{}\n", 6 * i, 10.0 + i as f64 * 0.5, 130.0));
        }
        assert_eq!(parse_track_csv(s.as_bytes()).unwrap().duration(), 66.0 * 3600.0);
    }

    #[test]
    fn bad_latitude_rejected() {
        let s = "name,time_hours,lat_deg,lon_deg\nA,0,91,0\nA,6,10,0\n";
        assert!(matches!(parse_track_csv(s.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_row_reports_line() {
        let s = "name,time_hours,lat_deg,lon_deg\nA,0,10,0\nA,six,10,0\n";
        match parse_track_csv(s.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uneven_spacing_rejected() {
        let s = "name,time_hours,lat_deg,lon_deg\nA,0,10,0\nA,6,10,1\nA,13,10,2\n";
        assert!(matches!(parse_track_csv(s.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn two_sample_windows_at_100_s() {
        let t = parse_track_csv(TWO_ROWS.as_bytes()).unwrap();
        let grid = TimeGrid::new(t.duration(), 100.0, 1800.0, 1).unwrap();
        let set = track_to_targets(&t, &grid).unwrap();
        assert_eq!(set.windows, vec![(1, 108), (109, 216)]);
        assert_eq!(set.active_point(108), Some(0));
        assert_eq!(set.active_point(109), Some(1));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let t = parse_track_csv(TWO_ROWS.as_bytes()).unwrap();
        let grid = TimeGrid::new(2.0 * SIX_HOURS, 100.0, 1800.0, 1).unwrap();
        assert!(track_to_targets(&t, &grid).is_err());
    }

    #[test]
    fn short_storm_has_twelve_samples() {
        let t = synthesize_track(1, 2.75, Region::WestHemisphere).unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(t, synthesize_track(1, 2.75, Region::WestHemisphere).unwrap());
        assert!(synthesize_track(1, 2.0, Region::EastHemisphere).is_err());
    }

    #[test]
    fn haversine_quarter_meridian() {
        let d = haversine(0.0, 0.0, PI / 2.0, 0.0, 6371.0);
        assert!((d - 6371.0 * PI / 2.0).abs() < 1e-9);
    }
}
