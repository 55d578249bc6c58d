//! Scenario configuration, the three engines, sweeps, engine comparison and
//! the precession-frequency experiment.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::basis::{self, SpectralState, DEFAULT_MAX_DEGREE};
use crate::closed_form::{
    self, detection_radius, precession_frequency, Family, PointVortex, VortexConfig, VortexEvent, ZeroScan,
};
use crate::error::{Error, Result};
use crate::grid::{self, ComplexField2D, GridSpec};
use crate::solver::{self, Background, SnapshotLog, SolverParams};
use crate::track::{self, fmt_f64, Association, AssociationConfig, CountSeries, Frame, VortexObservation};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "VORTEXDYN_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ClosedForm,
    RitzBasis,
    GpeNumeric,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::ClosedForm, Engine::RitzBasis, Engine::GpeNumeric];

    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::ClosedForm => "closed_form",
            Engine::RitzBasis => "ritz_basis",
            Engine::GpeNumeric => "gpe_numeric",
        }
    }
}

fn default_snapshot_interval() -> f64 {
    0.01
}
fn default_dt() -> f64 {
    1e-3
}
fn default_max_degree() -> usize {
    DEFAULT_MAX_DEGREE
}
fn default_scan_cells() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub family: Family,
    /// Half separation for the symmetric families.
    #[serde(default)]
    pub x0: Option<f64>,
    /// Explicit vortices; required for the general family, overrides `x0`.
    #[serde(default)]
    pub vortices: Option<Vec<PointVortex>>,
    pub beta: f64,
    #[serde(default)]
    pub grid: GridSpec,
    pub t_end: f64,
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub engines: Vec<Engine>,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    /// Lattice size of the closed-form zero scan.
    #[serde(default = "default_scan_cells")]
    pub zero_scan_cells: usize,
    /// Detection disc radius; 4σ(β) when absent.
    #[serde(default)]
    pub r_edge: Option<f64>,
    /// Write every n-th numeric snapshot to disk (0 = none).
    #[serde(default)]
    pub write_snapshots_every: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Key path → values, expanded by [`sweep`].
    #[serde(default)]
    pub sweep: BTreeMap<String, Vec<f64>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Scenario::from_value(serde_json::from_str(text)?)
    }

    fn from_value(raw: Value) -> Result<Self> {
        // report a bad grid as such rather than as a parse failure
        if let Some(g) = raw.get("grid") {
            GridSpec::from_value(g)?;
        }
        let s: Scenario = serde_json::from_value(raw)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.engines.is_empty() {
            return Err(Error::InvalidParameter("a scenario needs at least one engine".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some((k, _)) = self.sweep.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidParameter(format!("sweep list `{k}` is empty")));
        }
        if self.zero_scan_cells < 8 {
            return Err(Error::InvalidParameter("zero_scan_cells must be at least 8".into()));
        }
        self.solver_params()?;
        self.config()?;
        Ok(())
    }

    pub fn config(&self) -> Result<VortexConfig> {
        match (&self.vortices, self.x0) {
            (Some(v), _) => VortexConfig::new(self.family, self.beta, v.clone()),
            (None, Some(x0)) => VortexConfig::symmetric(self.family, x0, self.beta),
            (None, None) => Err(Error::InvalidParameter("scenario needs `x0` or `vortices`".into())),
        }
    }

    pub fn solver_params(&self) -> Result<SolverParams> {
        SolverParams::new(self.beta, self.grid)?
            .with_dt(self.dt)?
            .with_snapshot_interval(self.snapshot_interval)
    }

    pub fn r_edge(&self) -> Result<f64> {
        match self.r_edge {
            Some(r) if r > 0.0 => Ok(r),
            Some(r) => Err(Error::InvalidParameter(format!("r_edge must be positive, got {r}"))),
            None => detection_radius(self.beta),
        }
    }

    /// Sample times shared by all engines.
    pub fn frame_times(&self) -> Vec<f64> {
        let stride = ((self.snapshot_interval / self.dt).round() as usize).max(1);
        let n_steps = (self.t_end / self.dt).round() as usize;
        let mut t: Vec<f64> = (0..=n_steps / stride).map(|k| (k * stride) as f64 * self.dt).collect();
        if n_steps % stride != 0 {
            t.push(n_steps as f64 * self.dt);
        }
        t
    }

    /// Applies `key.path=value` overrides. Values are parsed as JSON, falling
    /// back to a plain string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Scenario> {
        let mut v = serde_json::to_value(self)?;
        for (path, raw) in overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut v, path, value)?;
        }
        Scenario::from_value(v)
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidParameter(format!("`{path}` does not name an object field")))?;
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Parses `key=lo:hi:step` or `key=v1,v2,...`.
pub fn parse_param(spec: &str) -> Result<(String, Vec<f64>)> {
    let (key, rhs) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("expected key=values, got `{spec}`")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number in `{spec}`")))
    };
    let values = if rhs.contains(':') {
        let p: Vec<&str> = rhs.split(':').collect();
        if p.len() != 3 {
            return Err(Error::InvalidParameter(format!("ranges are lo:hi:step, got `{rhs}`")));
        }
        let (lo, hi, step) = (num(p[0])?, num(p[1])?, num(p[2])?);
        if !(step > 0.0) || hi < lo {
            return Err(Error::InvalidParameter(format!("empty or invalid range `{rhs}`")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| round12(lo + k as f64 * step)).collect()
    } else {
        rhs.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("no values in `{spec}`")));
    }
    Ok((key.trim().to_string(), values))
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

type BackgroundKey = (u64, u64, usize);

fn background_cache() -> &'static Mutex<HashMap<BackgroundKey, Arc<Background>>> {
    static CACHE: OnceLock<Mutex<HashMap<BackgroundKey, Arc<Background>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Ground state and vortex profile for (β, grid), computed once per process.
pub fn background(params: &SolverParams) -> Result<Arc<Background>> {
    let key = (
        params.beta.to_bits(),
        params.grid.extent().to_bits(),
        params.grid.points_per_axis(),
    );
    if let Some(b) = background_cache().lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let b = Arc::new(Background::compute(params)?);
    background_cache().lock().unwrap().entry(key).or_insert(b.clone());
    Ok(b)
}

/// Ritz-ansatz initial field `e^{−r²/2σ²} Π (x − x_j + i q_j (y − y_j))`.
pub fn ritz_initial_field(config: &VortexConfig, grid: &GridSpec) -> Result<ComplexField2D> {
    let sigma = basis::sigma_broadening(config.beta)?;
    let f = ComplexField2D::from_fn(*grid, 0.0, |x, y| {
        config.vortices.iter().fold(
            Complex64::new((-(x * x + y * y) / (2.0 * sigma * sigma)).exp(), 0.0),
            |acc, v| acc * Complex64::new(x - v.x, v.charge as f64 * (y - v.y)),
        )
    });
    grid::normalize(&f)
}

/// Everything one engine produced for a scenario.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub engine: Engine,
    pub frames: Vec<Frame>,
    pub counts: CountSeries,
    pub association: Association,
    /// Norm and energy per snapshot (numeric engine only).
    pub log: Vec<SnapshotLog>,
    /// Initial spectral state (basis engine only).
    pub spectral: Option<SpectralState>,
    pub warnings: Vec<String>,
}

fn finish(engine: Engine, frames: Vec<Frame>, q: i32) -> EngineOutput {
    let counts = track::count_series(&frames, q);
    let association = track::associate(&frames, &AssociationConfig::default());
    EngineOutput {
        engine,
        frames,
        counts,
        association,
        log: Vec::new(),
        spectral: None,
        warnings: Vec::new(),
    }
}

/// Runs one engine without touching the filesystem. `on_snapshot` sees every
/// numeric snapshot and may write it out.
pub fn run_engine(
    s: &Scenario,
    engine: Engine,
    mut on_snapshot: impl FnMut(&ComplexField2D, &SnapshotLog) -> Result<()>,
) -> Result<EngineOutput> {
    s.validate()?;
    let config = s.config()?;
    let q = config.total_charge();
    let r_edge = s.r_edge()?;
    match engine {
        Engine::ClosedForm => {
            let x0 = match (s.family, &s.vortices) {
                (Family::General, _) | (_, Some(_)) => {
                    return Err(Error::Unsupported(
                        "closed forms exist only for the symmetric families with `x0`".into(),
                    ))
                }
                _ => s.x0.expect("validated"),
            };
            let scan = ZeroScan {
                cells: s.zero_scan_cells,
                ..ZeroScan::new(r_edge)
            };
            let frames = s
                .frame_times()
                .into_iter()
                .map(|t| {
                    let zs = closed_form::zeros_of_closed_form(s.family, x0, s.beta, t, &scan)?;
                    Ok(Frame {
                        t,
                        observations: zs
                            .vortices()
                            .into_iter()
                            .map(|v| VortexObservation {
                                t,
                                x: v.x,
                                y: v.y,
                                charge: v.charge,
                                plaquette: (0, 0),
                                residual: 0.0,
                            })
                            .collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(finish(engine, frames, q))
        }
        Engine::RitzBasis => {
            let init = ritz_initial_field(&config, &s.grid)?;
            let state = basis::project(&init, s.beta, s.max_degree)?;
            let frames = s
                .frame_times()
                .into_iter()
                .map(|t| Frame::detect(&basis::synthesize(&basis::evolve(&state, t), &s.grid), r_edge))
                .collect::<Result<Vec<_>>>()?;
            let mut out = finish(engine, frames, q);
            out.warnings.extend(state.warning().map(str::to_string));
            out.spectral = Some(state);
            Ok(out)
        }
        Engine::GpeNumeric => {
            let params = s.solver_params()?;
            let bg = background(&params)?;
            let init = solver::build_initial_state(&config, &bg)?;
            let mut frames = Vec::new();
            let log = solver::evolve_with(&init, &params, s.t_end, |f, l| {
                frames.push(Frame::detect(f, r_edge)?);
                on_snapshot(f, l)
            })?;
            let mut out = finish(engine, frames, q);
            out.log = log;
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineStatus {
    pub engine: Engine,
    pub ok: bool,
    pub error_kind: Option<String>,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    pub mean_count: Option<f64>,
    pub max_count: Option<usize>,
    pub flagged_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub scenario: Scenario,
    pub engines: Vec<EngineStatus>,
    /// Engines that failed, in run order.
    pub failures: Vec<Engine>,
}

fn write_trajectories_csv(s: &Scenario, assoc: &Association, path: &Path) -> Result<()> {
    let mut rows: Vec<(f64, usize, &VortexObservation)> = assoc
        .tracks
        .iter()
        .flat_map(|tr| tr.observations.iter().map(move |o| (o.t, tr.id, o)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let x0 = s.x0.map(fmt_f64).unwrap_or_default();
    w.write_record(["t", "vortex_index", "x", "y", "charge", "family", "beta", "x0"])
        .map_err(csv_err)?;
    for (t, id, o) in rows {
        w.write_record([
            fmt_f64(t),
            id.to_string(),
            fmt_f64(o.x),
            fmt_f64(o.y),
            o.charge.to_string(),
            s.family.to_string(),
            fmt_f64(s.beta),
            x0.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

const PLOT_TRAJECTORIES: &str = r#"# Vortex trajectories per engine.
import sys, pandas as pd, matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else "."
fig, ax = plt.subplots(figsize=(5, 5))
for engine in ["closed_form", "ritz_basis", "gpe_numeric"]:
    try:
        df = pd.read_csv(f"{root}/{engine}/trajectories.csv")
    except FileNotFoundError:
        continue
    for (_, q), g in df.groupby(["vortex_index", "charge"]):
        ax.plot(g.x, g.y, ".", ms=1, label=f"{engine} q={q}")
ax.set_aspect("equal")
ax.set_xlabel("x")
ax.set_ylabel("y")
plt.savefig(f"{root}/trajectories.png", dpi=150)
"#;

const PLOT_COUNTS: &str = r#"# Vortex number N(t) per engine.
import sys, pandas as pd, matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else "."
fig, ax = plt.subplots(figsize=(7, 3))
for engine in ["closed_form", "ritz_basis", "gpe_numeric"]:
    try:
        df = pd.read_csv(f"{root}/{engine}/counts.csv")
    except FileNotFoundError:
        continue
    ax.step(df.t, df.N, where="mid", label=engine)
ax.set_xlabel("t")
ax.set_ylabel("N")
ax.legend()
plt.savefig(f"{root}/counts.png", dpi=150)
"#;

/// Writes one engine's outputs into `dir` and returns the file names.
pub fn write_engine_output(s: &Scenario, out: &EngineOutput, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    write_trajectories_csv(s, &out.association, &dir.join("trajectories.csv"))?;
    track::write_detections_csv(&out.frames, &dir.join("detections.csv"))?;
    out.counts.write_csv(&dir.join("counts.csv"))?;
    track::write_events_csv(&out.association.events, &dir.join("events.csv"))?;
    track::write_tracks_json(&out.association, &dir.join("tracks.json"))?;
    let mut files: Vec<String> = ["trajectories.csv", "detections.csv", "counts.csv", "events.csv", "tracks.json"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if !out.log.is_empty() {
        let manifest = serde_json::json!({
            "params": s.solver_params()?,
            "snapshots": out.log,
        });
        fs::write(dir.join("evolution.json"), serde_json::to_string_pretty(&manifest)?)?;
        files.push("evolution.json".into());
    }
    if let Some(st) = &out.spectral {
        fs::write(dir.join("spectral_state.json"), serde_json::to_string_pretty(st)?)?;
        files.push("spectral_state.json".into());
    }
    Ok(files)
}

/// Runs every requested engine and writes the bundle into `out_dir`. A
/// failing engine is recorded in the manifest and does not stop the others.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<BundleManifest> {
    s.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut statuses = Vec::new();
    let mut failures = Vec::new();
    for &engine in &s.engines {
        let dir = out_dir.join(engine.as_str());
        let every = s.write_snapshots_every;
        let snap_dir = dir.join("snapshots");
        let result = run_engine(s, engine, |f, l| {
            if every > 0 && l.index % every == 0 {
                fs::create_dir_all(&snap_dir)?;
                crate::snapshot::write(&snap_dir.join(format!("snapshot_{:05}.bin", l.index)), f)?;
            }
            Ok(())
        })
        .and_then(|out| write_engine_output(s, &out, &dir).map(|files| (out, files)));
        match result {
            Ok((out, files)) => statuses.push(EngineStatus {
                engine,
                ok: true,
                error_kind: None,
                error: None,
                files,
                warnings: out.warnings.clone(),
                mean_count: track::average_count(&out.counts, 0.0, s.t_end).ok(),
                max_count: out.counts.max_count(),
                flagged_frames: out.counts.flagged().count(),
            }),
            Err(e) => {
                log::error!("engine {} failed: {e}", engine.as_str());
                failures.push(engine);
                statuses.push(EngineStatus {
                    engine,
                    ok: false,
                    error_kind: Some(e.kind().to_string()),
                    error: Some(e.to_string()),
                    files: Vec::new(),
                    warnings: Vec::new(),
                    mean_count: None,
                    max_count: None,
                    flagged_frames: 0,
                })
            }
        }
    }
    fs::write(out_dir.join("plot_trajectories.py"), PLOT_TRAJECTORIES)?;
    fs::write(out_dir.join("plot_counts.py"), PLOT_COUNTS)?;
    let manifest = BundleManifest {
        scenario: s.clone(),
        engines: statuses,
        failures,
    };
    fs::write(out_dir.join("bundle.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Worker count from `VORTEXDYN_WORKERS`, defaulting to 1.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub values: BTreeMap<String, f64>,
    pub engines: Vec<EngineStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub params: BTreeMap<String, Vec<f64>>,
    pub points: Vec<SweepPoint>,
}

/// Cartesian product of the sweep lists as (label, overrides, values),
/// ordered by key and then by value.
pub fn expand(params: &BTreeMap<String, Vec<f64>>) -> Vec<(String, BTreeMap<String, f64>)> {
    let mut points = vec![(String::new(), BTreeMap::new())];
    for (key, values) in params {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut next = Vec::new();
        for (label, vals) in &points {
            for v in &sorted {
                let mut vals = vals.clone();
                vals.insert(key.clone(), *v);
                let sep = if label.is_empty() { "" } else { "_" };
                next.push((format!("{label}{sep}{key}={v}"), vals));
            }
        }
        points = next;
    }
    points
}

/// Runs `base` at every sweep point, in parallel up to `workers`. Each point
/// writes into its own subdirectory of `out_dir`.
pub fn sweep(base: &Scenario, extra: &[(String, Vec<f64>)], out_dir: &Path, workers: usize) -> Result<SweepReport> {
    let mut params = base.sweep.clone();
    for (k, v) in extra {
        params.insert(k.clone(), v.clone());
    }
    for values in params.values_mut() {
        values.sort_by(f64::total_cmp);
        values.dedup();
    }
    if params.is_empty() {
        return Err(Error::InvalidParameter("nothing to sweep".into()));
    }
    let points = expand(&params);
    let mut base = base.clone();
    base.sweep.clear();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results: Vec<Result<SweepPoint>> = pool.install(|| {
        points
            .par_iter()
            .map(|(label, vals)| {
                let overrides: Vec<(String, String)> =
                    vals.iter().map(|(k, v)| (k.clone(), fmt_f64(*v))).collect();
                let s = base.with_overrides(&overrides)?;
                let m = run_scenario(&s, &out_dir.join(label))?;
                Ok(SweepPoint {
                    label: label.clone(),
                    values: vals.clone(),
                    engines: m.engines,
                })
            })
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let report = SweepReport { params, points };
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    write_sweep_csv(&report, &out_dir.join("sweep.csv"))?;
    Ok(report)
}

fn write_sweep_csv(r: &SweepReport, path: &Path) -> Result<()> {
    let keys: Vec<&String> = r.params.keys().collect();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    header.extend(["engine", "ok", "mean_count", "max_count"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for p in &r.points {
        for e in &p.engines {
            let mut row: Vec<String> = keys.iter().map(|k| fmt_f64(p.values[*k])).collect();
            row.push(e.engine.as_str().into());
            row.push(e.ok.to_string());
            row.push(e.mean_count.map(fmt_f64).unwrap_or_default());
            row.push(e.max_count.map(|n| n.to_string()).unwrap_or_default());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a detections CSV back into frames. Frames without detections are
/// recovered from `counts.csv` next to it when present.
pub fn read_frames(dir: &Path) -> Result<Vec<Frame>> {
    let mut by_t: BTreeMap<u64, Frame> = BTreeMap::new();
    let key = |t: f64| (t * 1e9).round() as u64;
    let counts = dir.join("counts.csv");
    if counts.exists() {
        let mut r = csv::Reader::from_path(&counts).map_err(csv_err)?;
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let t: f64 = parse_field(&rec, 0)?;
            by_t.insert(key(t), Frame { t, observations: Vec::new() });
        }
    }
    let mut r = csv::Reader::from_path(dir.join("detections.csv")).map_err(csv_err)?;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let t: f64 = parse_field(&rec, 0)?;
        let o = VortexObservation {
            t,
            x: parse_field(&rec, 1)?,
            y: parse_field(&rec, 2)?,
            charge: parse_field(&rec, 3)?,
            plaquette: (0, 0),
            residual: parse_field(&rec, 4)?,
        };
        by_t.entry(key(t))
            .or_insert_with(|| Frame { t, observations: Vec::new() })
            .observations
            .push(o);
    }
    Ok(by_t.into_values().collect())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Format(format!("{k:?}")),
    }
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad field {k} in record {rec:?}")))
}

fn read_events(dir: &Path) -> Result<Vec<VortexEvent>> {
    let path = dir.join("events.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(&path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let kind = serde_json::from_value(Value::String(rec.get(1).unwrap_or("").into()))
            .map_err(|_| Error::Format(format!("unknown event type in {rec:?}")))?;
        out.push(VortexEvent {
            t: parse_field(&rec, 0)?,
            kind,
            x: parse_field(&rec, 2)?,
            y: parse_field(&rec, 3)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameComparison {
    pub t: f64,
    pub a: Vec<PointVortex>,
    pub b: Vec<PointVortex>,
    /// (index in a, index in b, distance), same charge only.
    pub matched: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOffset {
    pub kind: closed_form::EventKind,
    pub t_a: f64,
    pub t_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub gate: f64,
    pub frames: Vec<FrameComparison>,
    pub matched_pairs: usize,
    pub mean_error: f64,
    pub max_error: f64,
    pub unmatched_a: usize,
    pub unmatched_b: usize,
    /// Frames where A has vortices and B has none.
    pub frames_only_a: usize,
    pub frames_only_b: usize,
    pub event_offsets: Vec<EventOffset>,
}

impl ComparisonReport {
    /// Mean matched distance over frames with t ≤ `t_max`.
    pub fn mean_error_until(&self, t_max: f64) -> Option<f64> {
        let d: Vec<f64> = self
            .frames
            .iter()
            .filter(|f| f.t <= t_max)
            .flat_map(|f| f.matched.iter().map(|m| m.2))
            .collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }
}

fn to_points(f: &Frame) -> Vec<PointVortex> {
    f.observations.iter().map(|o| PointVortex::new(o.x, o.y, o.charge)).collect()
}

/// Per-frame greedy matching of same-charge vortices within `gate`.
pub fn compare_frames(a: &[Frame], b: &[Frame], a_events: &[VortexEvent], b_events: &[VortexEvent], gate: f64) -> Result<ComparisonReport> {
    if a.len() != b.len() || a.iter().zip(b).any(|(fa, fb)| (fa.t - fb.t).abs() > 1e-9) {
        return Err(Error::FrameMismatch(format!(
            "{} frames vs {} frames, or different sample times",
            a.len(),
            b.len()
        )));
    }
    let mut frames = Vec::new();
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    let (mut ua, mut ub, mut oa, mut ob) = (0, 0, 0, 0);
    for (fa, fb) in a.iter().zip(b) {
        let (pa, pb) = (to_points(fa), to_points(fb));
        let mut cand = Vec::new();
        for (i, va) in pa.iter().enumerate() {
            for (j, vb) in pb.iter().enumerate() {
                let d = (va.x - vb.x).hypot(va.y - vb.y);
                if va.charge == vb.charge && d <= gate {
                    cand.push((d, i, j));
                }
            }
        }
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let (mut used_a, mut used_b) = (vec![false; pa.len()], vec![false; pb.len()]);
        let mut matched = Vec::new();
        for (d, i, j) in cand {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                matched.push((i, j, d));
                sum += d;
                max = max.max(d);
                n += 1;
            }
        }
        ua += pa.len() - matched.len();
        ub += pb.len() - matched.len();
        if !pa.is_empty() && pb.is_empty() {
            oa += 1;
        }
        if pa.is_empty() && !pb.is_empty() {
            ob += 1;
        }
        frames.push(FrameComparison {
            t: fa.t,
            a: pa,
            b: pb,
            matched,
        });
    }
    let mut event_offsets = Vec::new();
    let mut used = vec![false; b_events.len()];
    for ea in a_events {
        let best = b_events
            .iter()
            .enumerate()
            .filter(|(k, eb)| !used[*k] && eb.kind == ea.kind)
            .min_by(|x, y| (x.1.t - ea.t).abs().total_cmp(&(y.1.t - ea.t).abs()));
        if let Some((k, eb)) = best {
            used[k] = true;
            event_offsets.push(EventOffset {
                kind: ea.kind,
                t_a: ea.t,
                t_b: eb.t,
            });
        }
    }
    Ok(ComparisonReport {
        gate,
        frames,
        matched_pairs: n,
        mean_error: if n > 0 { sum / n as f64 } else { 0.0 },
        max_error: max,
        unmatched_a: ua,
        unmatched_b: ub,
        frames_only_a: oa,
        frames_only_b: ob,
        event_offsets,
    })
}

/// Compares two engine output directories (each holding `detections.csv`).
/// The gate defaults to `v_max` times the frame spacing.
pub fn compare(dir_a: &Path, dir_b: &Path, gate: Option<f64>) -> Result<ComparisonReport> {
    let a = read_frames(dir_a)?;
    let b = read_frames(dir_b)?;
    let gate = gate.unwrap_or_else(|| {
        let dt = if a.len() > 1 { a[1].t - a[0].t } else { 0.01 };
        track::DEFAULT_V_MAX * dt
    });
    compare_frames(&a, &b, &read_events(dir_a)?, &read_events(dir_b)?, gate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecessionRow {
    pub x0: f64,
    pub beta: f64,
    pub omega_numeric: Option<f64>,
    pub omega_analytic: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecessionFit {
    pub x0: f64,
    /// c in ω_p = 1 + cβ, least squares over the valid rows.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecessionTable {
    pub rows: Vec<PrecessionRow>,
    pub fits: Vec<PrecessionFit>,
    pub c_analytic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecessionSettings {
    pub grid: GridSpec,
    pub dt: f64,
    pub snapshot_interval: f64,
    /// Number of analytic periods to follow.
    pub periods: f64,
}

impl Default for PrecessionSettings {
    fn default() -> Self {
        PrecessionSettings {
            grid: GridSpec::default(),
            dt: 1e-3,
            snapshot_interval: 0.01,
            periods: 2.0,
        }
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Least-squares c in ω = 1 + cβ.
pub fn fit_c(betas: &[f64], omegas: &[f64]) -> Option<f64> {
    let sbb: f64 = betas.iter().map(|b| b * b).sum();
    let sbw: f64 = betas.iter().zip(omegas).map(|(b, w)| b * (w - 1.0)).sum();
    (sbb > 0.0).then(|| sbw / sbb)
}

/// Numeric precession frequency of one off-center vortex: unwrapped polar
/// angle of the tracked vortex, least-squares slope over `periods` analytic
/// periods.
pub fn measure_precession(x0: f64, beta: f64, settings: &PrecessionSettings) -> Result<f64> {
    let params = SolverParams::new(beta, settings.grid)?
        .with_dt(settings.dt)?
        .with_snapshot_interval(settings.snapshot_interval)?;
    let bg = background(&params)?;
    let config = VortexConfig::symmetric(Family::Single, x0, beta)?;
    let init = solver::build_initial_state(&config, &bg)?;
    let t_end = settings.periods * 2.0 * std::f64::consts::PI / precession_frequency(beta);
    let mut times = Vec::new();
    let mut angles: Vec<f64> = Vec::new();
    let mut last = (x0, 0.0);
    let mut lost = None;
    solver::evolve_with(&init, &params, t_end, |f, _| {
        let obs = track::detect(f, bg.r_edge)?;
        // follow the detection nearest to the previous position
        let Some(o) = obs
            .iter()
            .filter(|o| o.charge == 1)
            .min_by(|a, b| {
                let da = (a.x - last.0).hypot(a.y - last.1);
                let db = (b.x - last.0).hypot(b.y - last.1);
                da.total_cmp(&db)
            })
        else {
            lost.get_or_insert(f.time());
            return Ok(());
        };
        last = (o.x, o.y);
        let a = o.y.atan2(o.x);
        let a = match angles.last() {
            Some(&prev) => prev + closed_form::wrap_phase(a - prev),
            None => a,
        };
        times.push(f.time());
        angles.push(a);
        Ok(())
    })?;
    if let Some(t) = lost {
        return Err(Error::Degenerate(format!("vortex track lost at t = {t:.3}")));
    }
    ls_slope(&times, &angles).ok_or_else(|| Error::Degenerate("too few samples for a slope".into()))
}

/// ω_p(x₀, β) table with the analytic column and c(x₀) fits. Entries whose
/// track is lost are kept with `omega_numeric = None`.
pub fn precession_experiment(x0s: &[f64], betas: &[f64], settings: &PrecessionSettings, workers: usize) -> Result<PrecessionTable> {
    if x0s.is_empty() || betas.is_empty() {
        return Err(Error::InvalidParameter("precession experiment needs x0 and beta values".into()));
    }
    let pairs: Vec<(f64, f64)> = x0s.iter().flat_map(|&x| betas.iter().map(move |&b| (x, b))).collect();
    // backgrounds first, so parallel points share them
    for &b in betas {
        background(&SolverParams::new(b, settings.grid)?)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let rows: Vec<PrecessionRow> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(x0, beta)| {
                let (omega, note) = match measure_precession(x0, beta, settings) {
                    Ok(w) => (Some(w), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                PrecessionRow {
                    x0,
                    beta,
                    omega_numeric: omega,
                    omega_analytic: precession_frequency(beta),
                    note,
                }
            })
            .collect()
    });
    let fits = x0s
        .iter()
        .map(|&x0| {
            let (b, w): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.x0 == x0)
                .filter_map(|r| r.omega_numeric.map(|w| (r.beta, w)))
                .unzip();
            PrecessionFit { x0, c: fit_c(&b, &w) }
        })
        .collect();
    Ok(PrecessionTable {
        rows,
        fits,
        c_analytic: closed_form::precession_coefficient_analytic(),
    })
}

impl PrecessionTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x0", "beta", "omega_numeric", "omega_analytic"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                fmt_f64(r.x0),
                fmt_f64(r.beta),
                r.omega_numeric.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.omega_analytic),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario::from_json(
            r#"{"family": "dipole", "x0": 1.0, "beta": 0.0, "t_end": 0.05,
                "engines": ["closed_form"], "grid": {"extent": 8.0, "points_per_axis": 64}}"#,
        )
        .unwrap()
    }

    #[test]
    fn scenario_validation() {
        let mut s = base();
        s.engines.clear();
        assert!(s.validate().is_err());
        let mut s = base();
        s.t_end = 0.0;
        assert!(s.validate().is_err());
        let mut s = base();
        s.sweep.insert("beta".into(), vec![]);
        assert!(s.validate().is_err());
        assert!(Scenario::from_json(r#"{"family": "dipole", "beta": 0, "t_end": 1, "engines": ["closed_form"]}"#).is_err());
        assert!(Scenario::from_json(r#"{"family": "hexapole", "x0": 1, "beta": 0, "t_end": 1, "engines": []}"#).is_err());
    }

    #[test]
    fn overrides_follow_key_paths() {
        let s = base()
            .with_overrides(&[("grid.points_per_axis".into(), "32".into()), ("beta".into(), "0.5".into())])
            .unwrap();
        assert_eq!(s.grid.points_per_axis(), 32);
        assert_eq!(s.beta, 0.5);
        assert!(base().with_overrides(&[("grid.points_per_axis".into(), "31".into())]).is_err());
    }

    #[test]
    fn frame_times_cover_the_run() {
        let t = base().frame_times();
        assert_eq!(t.len(), 6);
        assert!((t[5] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn param_parsing() {
        let (k, v) = parse_param("beta=0:1:0.1").unwrap();
        assert_eq!(k, "beta");
        assert_eq!(v.len(), 11);
        assert_eq!(v[3], 0.3);
        assert_eq!(parse_param("x0=0.5,1.5").unwrap().1, vec![0.5, 1.5]);
        assert!(parse_param("beta").is_err());
        assert!(parse_param("beta=1:0:0.1").is_err());
    }

    #[test]
    fn expansion_is_sorted_and_labelled() {
        let mut p = BTreeMap::new();
        p.insert("x0".to_string(), vec![1.5, 0.5]);
        p.insert("beta".to_string(), vec![1.0, 0.0]);
        let e = expand(&p);
        let labels: Vec<&str> = e.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["beta=0_x0=0.5", "beta=0_x0=1.5", "beta=1_x0=0.5", "beta=1_x0=1.5"]);
    }

    #[test]
    fn slope() {
        assert_eq!(ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]), Some(2.0));
        assert_eq!(ls_slope(&[1.0], &[1.0]), None);
        assert!((fit_c(&[0.0, 0.5, 1.0], &[1.0, 0.95, 0.9]).unwrap() + 0.1).abs() < 1e-12);
        assert_eq!(fit_c(&[0.0], &[1.0]), None);
    }
}
