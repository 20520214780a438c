use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use conops_core::harness::{load_tracks, run_corpus, write_outputs, ModelSpec, ScenarioConfig};
use conops_core::tc::{corpus_track, synthesize_track, Region};

#[derive(Parser)]
#[command(name = "conops", version, about = "Compare Earth-observation CONOPS models over cyclone tracks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured models over every track and write the reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated subset of B,A,P1,P2,P3,P4,U1,U2.
        #[arg(long)]
        models: Option<String>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Sensor half-angle in degrees, overriding the config.
        #[arg(long)]
        fov_deg: Option<f64>,
        /// Time step in seconds, overriding the config.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Write one synthetic track CSV.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        days: f64,
        #[arg(long, value_parser = ["west", "east"], default_value = "west")]
        region: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the seeded track corpus plus a scenario config referencing it.
    Corpus {
        #[arg(long, default_value = "data")]
        dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: u64,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            models,
            threads,
            fov_deg,
            dt,
        } => {
            let mut cfg = ScenarioConfig::load(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(m) = models {
                cfg.models = ModelSpec::parse_list(&m)?;
            }
            if let Some(f) = fov_deg {
                cfg.fov_half_angle = f.to_radians();
            }
            if let Some(d) = dt {
                cfg.dt = d;
            }
            cfg.validate()?;
            if cfg.tracks.is_empty() {
                bail!("config lists no tracks");
            }
            let tracks = load_tracks(&cfg)?;
            let start = Instant::now();
            let result = run_corpus(&cfg, tracks, threads)?;
            write_outputs(&result, &out).with_context(|| format!("writing {}", out.display()))?;
            print!("{}", result.report.text_table());
            eprintln!(
                "{} tracks x {} models in {:.1} s; outputs in {}",
                result.tracks.len(),
                cfg.models.len(),
                start.elapsed().as_secs_f64(),
                out.display()
            );
        }
        Command::Synth {
            seed,
            days,
            region,
            out,
        } => {
            let region = if region == "east" {
                Region::EastHemisphere
            } else {
                Region::WestHemisphere
            };
            let track = synthesize_track(seed, days, region)?;
            fs::write(&out, track.to_csv()).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Corpus { dir, count } => {
            let tracks_dir = dir.join("tracks");
            fs::create_dir_all(&tracks_dir)?;
            let mut config = String::from(SAMPLE_CONFIG_HEAD);
            for seed in 1..=count {
                let track = corpus_track(seed)?;
                let file = format!("syn_{seed:02}.csv");
                fs::write(tracks_dir.join(&file), track.to_csv())?;
                config.push_str(&format!("track = tracks/{file}\n"));
            }
            fs::write(dir.join("scenario.conf"), config)?;
            eprintln!("wrote {count} tracks and scenario.conf to {}", dir.display());
        }
    }
    Ok(())
}

const SAMPLE_CONFIG_HEAD: &str = "\
# Reference scenario: five sun-synchronous imagers against the synthetic corpus.
# sat = name, a [km], e, i [deg], raan [deg], argp [deg], true anomaly [deg]
sat = DMC 3-FM3, 7006.01, 17.07e-4, 97.72, 307.83, 77.52, 104.88
sat = DMC 3-FM1, 6992.54, 8.03e-4, 97.72, 306.02, 116.04, 302.43
sat = HUANJING 1B, 7003.07, 48.93e-4, 97.80, 89.49, 107.47, 140.62
sat = HUANJING 1A, 7007.36, 39.24e-4, 97.79, 85.41, 116.27, 189.24
sat = NIGERIASAT 1, 6992.76, 41.58e-4, 97.85, 228.61, 260.58, 149.89
fov_deg = 45
dt_s = 100
control_step_s = 1800
slew_rate_deg_s = 3
slew_max_deg = 35
budget_km_s = 2
max_revs = 4
j2 = true
models = B,A,P1,P2,P3,P4,U1,U2
";
