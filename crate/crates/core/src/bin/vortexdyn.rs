use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use vortexdyn::closed_form::detection_radius;
use vortexdyn::scenario::{self, PrecessionSettings, Scenario};
use vortexdyn::track::{self, Frame};
use vortexdyn::{snapshot, Error, GridSpec, Result};

#[derive(Parser)]
#[command(name = "vortexdyn", version, about = "Vortex dynamics in a harmonically trapped 2D condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every engine of a scenario and write the output bundle.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output_dir` or `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Key overrides, `--beta 0.5 --grid.points_per_axis 128` or `--set beta=0.5`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run a scenario over a parameter grid.
    Sweep {
        scenario: PathBuf,
        /// `key=lo:hi:step` or `key=v1,v2`; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Compare two engine output directories.
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// Matching radius; defaults to v_max times the frame spacing.
        #[arg(long)]
        gate: Option<f64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect vortices in a binary field snapshot.
    Detect {
        field: PathBuf,
        /// Detection disc radius; defaults to 4σ(β) with `--beta`, else the box half-width.
        #[arg(long)]
        r_edge: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Detections CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precession frequency table over x0 and beta.
    Precession {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 1.0, 1.5, 2.0])]
        x0: Vec<f64>,
        #[arg(long, default_value = "beta=0:1:0.1")]
        param: String,
        #[arg(long, default_value_t = 256)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Turns `--a.b v`, `--a.b=v` and `--set a.b=v` into (path, value) pairs.
fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(Error::InvalidParameter(format!("unexpected argument `{a}`")));
        };
        let pair = if key == "set" {
            it.next()
                .ok_or_else(|| Error::InvalidParameter("--set needs key=value".into()))?
                .clone()
        } else if key.contains('=') {
            key.to_string()
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::InvalidParameter(format!("--{key} needs a value")))?;
            format!("{key}={v}")
        };
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{pair}`")))?;
        out.push((k.replace('-', "_"), v.to_string()));
    }
    Ok(out)
}

fn load(path: &Path, overrides: &[String]) -> Result<Scenario> {
    Scenario::load(path)?.with_overrides(&parse_overrides(overrides)?)
}

fn out_dir(s: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| s.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, out, overrides } => {
            let s = load(&scenario, &overrides)?;
            let dir = out_dir(&s, out);
            let m = scenario::run_scenario(&s, &dir)?;
            println!("{}", serde_json::to_string_pretty(&m.engines)?);
            if !m.failures.is_empty() {
                return Err(Error::Unsupported(format!(
                    "engines failed: {}; see {}",
                    m.failures.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(", "),
                    dir.join("bundle.json").display()
                )));
            }
        }
        Command::Sweep { scenario, params, out, overrides } => {
            let s = load(&scenario, &overrides)?;
            let extra = params.iter().map(|p| scenario::parse_param(p)).collect::<Result<Vec<_>>>()?;
            let dir = out_dir(&s, out);
            let r = scenario::sweep(&s, &extra, &dir, scenario::worker_count())?;
            log::info!("{} sweep points written to {}", r.points.len(), dir.display());
        }
        Command::Compare { dir_a, dir_b, gate, out } => {
            let r = scenario::compare(&dir_a, &dir_b, gate)?;
            let text = serde_json::to_string_pretty(&r)?;
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
        Command::Detect { field, r_edge, beta, out } => {
            let f = snapshot::read(&field)?;
            let r_edge = match (r_edge, beta) {
                (Some(r), _) => r,
                (None, Some(b)) => detection_radius(b)?,
                (None, None) => f.grid().extent(),
            };
            let frame = Frame::detect(&f, r_edge)?;
            match out {
                Some(p) => track::write_detections_csv(&[frame], &p)?,
                None => track::write_detections(&[frame], std::io::stdout().lock())?,
            }
        }
        Command::Precession { x0, param, points, dt, out } => {
            let (key, betas) = scenario::parse_param(&param)?;
            if key != "beta" {
                return Err(Error::InvalidParameter(format!("precession sweeps beta, got `{key}`")));
            }
            let settings = PrecessionSettings {
                grid: GridSpec::new(8.0, points)?,
                dt,
                ..Default::default()
            };
            let table = scenario::precession_experiment(&x0, &betas, &settings, scenario::worker_count())?;
            std::fs::create_dir_all(&out)?;
            table.write_csv(&out.join("precession.csv"))?;
            std::fs::write(out.join("precession.json"), serde_json::to_string_pretty(&table)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
