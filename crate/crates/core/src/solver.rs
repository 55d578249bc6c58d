//! Split-step Fourier integration of the 2D Gross-Pitaevskii equation
//! `i ∂ψ/∂t = [−½∇² + ½r² + β|ψ|²]ψ`, imaginary-time relaxation for the
//! ground state and the centered vortex state, and the vortex product states
//! built from them.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::sigma_broadening;
use crate::closed_form::{wrap_phase, VortexConfig};
use crate::error::{Error, Result};
use crate::grid::{self, ComplexField2D, GridSpec};
use crate::snapshot;
use crate::spectral::{self, Fft2};

fn default_dt() -> f64 {
    1e-3
}
fn default_snapshot_interval() -> f64 {
    0.01
}
fn default_imag_tolerance() -> f64 {
    1e-12
}
fn default_imag_field_tolerance() -> f64 {
    1e-10
}
fn default_imag_dt() -> f64 {
    1e-2
}
fn default_imag_dt_max() -> f64 {
    2.0
}
fn default_imag_max_iterations() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Time between recorded snapshots, rounded to a whole number of steps.
    #[serde(default = "default_snapshot_interval")]
    pub snapshot_interval: f64,
    pub beta: f64,
    #[serde(default)]
    pub grid: GridSpec,
    /// Relative energy change per unit imaginary time that counts as converged.
    #[serde(default = "default_imag_tolerance")]
    pub imag_tolerance: f64,
    /// Sup-norm field change per unit imaginary time, relative to max |ψ|.
    #[serde(default = "default_imag_field_tolerance")]
    pub imag_field_tolerance: f64,
    #[serde(default = "default_imag_dt")]
    pub imag_dt: f64,
    #[serde(default = "default_imag_dt_max")]
    pub imag_dt_max: f64,
    #[serde(default = "default_imag_max_iterations")]
    pub imag_max_iterations: usize,
}

impl SolverParams {
    pub fn new(beta: f64, grid: GridSpec) -> Result<Self> {
        let p = SolverParams {
            dt: default_dt(),
            snapshot_interval: default_snapshot_interval(),
            beta,
            grid,
            imag_tolerance: default_imag_tolerance(),
            imag_field_tolerance: default_imag_field_tolerance(),
            imag_dt: default_imag_dt(),
            imag_dt_max: default_imag_dt_max(),
            imag_max_iterations: default_imag_max_iterations(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_snapshot_interval(mut self, interval: f64) -> Result<Self> {
        self.snapshot_interval = interval;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("snapshot_interval", self.snapshot_interval)?;
        positive("imag_tolerance", self.imag_tolerance)?;
        positive("imag_field_tolerance", self.imag_field_tolerance)?;
        positive("imag_dt", self.imag_dt)?;
        positive("imag_dt_max", self.imag_dt_max)?;
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        if self.imag_max_iterations == 0 {
            return Err(Error::InvalidParameter("imag_max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Number of real-time steps between snapshots.
    pub fn stride_steps(&self) -> usize {
        ((self.snapshot_interval / self.dt).round() as usize).max(1)
    }
}

fn potential(grid: &GridSpec) -> Array2<f64> {
    let xs = grid.coords();
    let m = grid.points_per_axis();
    Array2::from_shape_fn((m, m), |(i, j)| 0.5 * (xs[i] * xs[i] + xs[j] * xs[j]))
}

fn k_squared(grid: &GridSpec) -> Array2<f64> {
    let k = spectral::wavenumbers(grid);
    let m = grid.points_per_axis();
    Array2::from_shape_fn((m, m), |(a, b)| k[a] * k[a] + k[b] * k[b])
}

/// Reusable Strang stepper: half pointwise phase, full kinetic step in
/// Fourier space, half pointwise phase.
pub struct Stepper {
    grid: GridSpec,
    beta: f64,
    dt: f64,
    fft: Fft2,
    kinetic: Array2<Complex64>,
    half_potential: Array2<Complex64>,
    full_potential: Array2<Complex64>,
    steps: usize,
}

impl Stepper {
    pub fn new(params: &SolverParams) -> Result<Self> {
        params.validate()?;
        let grid = params.grid;
        let dt = params.dt;
        let kinetic = k_squared(&grid).mapv(|k2| Complex64::from_polar(1.0, -0.5 * k2 * dt));
        let v = potential(&grid);
        let half_potential = v.mapv(|v| Complex64::from_polar(1.0, -0.5 * v * dt));
        let full_potential = v.mapv(|v| Complex64::from_polar(1.0, -v * dt));
        Ok(Stepper {
            grid,
            beta: params.beta,
            dt,
            fft: Fft2::new(grid.points_per_axis()),
            kinetic,
            half_potential,
            full_potential,
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Steps taken so far by this stepper.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn pointwise_phase(&self, values: &mut Array2<Complex64>, factor: &Array2<Complex64>, tau: f64) {
        let c = -self.beta * tau;
        if self.beta == 0.0 {
            ndarray::Zip::from(values).and(factor).for_each(|v, p| *v *= p);
        } else {
            ndarray::Zip::from(values)
                .and(factor)
                .for_each(|v, p| *v *= p * Complex64::from_polar(1.0, c * v.norm_sqr()));
        }
    }

    fn kinetic_step(&mut self, values: &mut Array2<Complex64>) {
        // the kinetic factor depends on |k|² only, so the transposed spectrum can be used
        self.fft.forward_transposed(values);
        ndarray::Zip::from(&mut *values)
            .and(&self.kinetic)
            .for_each(|v, k| *v *= k);
        self.fft.inverse_transposed(values);
    }

    /// Advances `f` by one step in place.
    pub fn step(&mut self, f: &mut ComplexField2D) -> Result<()> {
        self.advance(f, 1)
    }

    /// Advances `f` by `n` steps. The pointwise phase leaves |ψ| unchanged,
    /// so the closing half step of one step and the opening half step of the
    /// next are applied together as one full step.
    pub fn advance(&mut self, f: &mut ComplexField2D, n: usize) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::FrameMismatch("field grid differs from the stepper grid".into()));
        }
        if n == 0 {
            return Ok(());
        }
        let t = f.time();
        let values = f.values_mut();
        self.pointwise_phase(values, &self.half_potential, 0.5 * self.dt);
        for k in 0..n {
            self.kinetic_step(values);
            if k + 1 < n {
                self.pointwise_phase(values, &self.full_potential, self.dt);
            }
        }
        self.pointwise_phase(values, &self.half_potential, 0.5 * self.dt);
        self.steps += n;
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite {
                step: self.steps,
                t: t + n as f64 * self.dt,
            });
        }
        f.set_time(t + n as f64 * self.dt);
        Ok(())
    }
}

/// One Strang step of size `params.dt`.
pub fn step_realtime(f: &ComplexField2D, params: &SolverParams) -> Result<ComplexField2D> {
    let mut out = f.clone();
    Stepper::new(params)?.step(&mut out)?;
    Ok(out)
}

/// Per-snapshot diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLog {
    pub index: usize,
    pub step: usize,
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
}

/// Evolves `initial` up to `t_end` and calls `observer` on every snapshot,
/// including the initial and final fields. Snapshot times are computed as
/// `t₀ + step·Δt` rather than accumulated.
pub fn evolve_with<F>(initial: &ComplexField2D, params: &SolverParams, t_end: f64, mut observer: F) -> Result<Vec<SnapshotLog>>
where
    F: FnMut(&ComplexField2D, &SnapshotLog) -> Result<()>,
{
    if !(t_end.is_finite() && t_end >= initial.time()) {
        return Err(Error::InvalidParameter(format!(
            "end time {t_end} precedes the initial time {}",
            initial.time()
        )));
    }
    let t0 = initial.time();
    let n_steps = ((t_end - t0) / params.dt).round() as usize;
    let stride = params.stride_steps();
    let mut stepper = Stepper::new(params)?;
    let mut f = initial.clone();
    let mut logs = Vec::new();
    let mut record = |f: &ComplexField2D, step: usize, logs: &mut Vec<SnapshotLog>| -> Result<()> {
        let log = SnapshotLog {
            index: logs.len(),
            step,
            t: f.time(),
            norm: grid::norm(f),
            energy: grid::energy(f, params.beta),
        };
        observer(f, &log)?;
        logs.push(log);
        Ok(())
    };
    record(&f, 0, &mut logs)?;
    let mut done = 0;
    while done < n_steps {
        let chunk = stride.min(n_steps - done);
        stepper.advance(&mut f, chunk)?;
        done += chunk;
        f.set_time(t0 + done as f64 * params.dt);
        record(&f, done, &mut logs)?;
    }
    Ok(logs)
}

/// Snapshots with their norm and energy logs.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub params: SolverParams,
    pub snapshots: Vec<ComplexField2D>,
    pub log: Vec<SnapshotLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionManifest {
    pub params: SolverParams,
    pub snapshots: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub log: SnapshotLog,
    pub file: Option<String>,
}

/// Evolves and keeps every snapshot in memory.
pub fn evolve_scenario(initial: &ComplexField2D, params: &SolverParams, t_end: f64) -> Result<EvolutionRecord> {
    let mut snapshots = Vec::new();
    let log = evolve_with(initial, params, t_end, |f, _| {
        snapshots.push(f.clone());
        Ok(())
    })?;
    Ok(EvolutionRecord {
        params: params.clone(),
        snapshots,
        log,
    })
}

impl EvolutionRecord {
    pub fn times(&self) -> Vec<f64> {
        self.log.iter().map(|l| l.t).collect()
    }

    pub fn manifest(&self, files: Option<&[String]>) -> EvolutionManifest {
        EvolutionManifest {
            params: self.params.clone(),
            snapshots: self
                .log
                .iter()
                .enumerate()
                .map(|(k, l)| ManifestEntry {
                    log: *l,
                    file: files.map(|f| f[k].clone()),
                })
                .collect(),
        }
    }

    /// Writes `snapshot_NNNNN.bin` files and `evolution.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut names = Vec::new();
        for (k, f) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:05}.bin");
            snapshot::write(&dir.join(&name), f)?;
            names.push(name);
        }
        let manifest = self.manifest(Some(&names));
        fs::write(dir.join("evolution.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// Result of an imaginary-time relaxation.
#[derive(Debug, Clone)]
pub struct Relaxed {
    pub field: ComplexField2D,
    pub energy: f64,
    pub iterations: usize,
    /// Energy after every accepted iteration.
    pub history: Vec<f64>,
}

fn max_abs(values: &Array2<Complex64>) -> f64 {
    values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Preconditioned normalized gradient flow with a stabilizing shift α:
/// `(1 + Δτ(T + α)) ψ̃ = (1 + Δτ(α + μ − V − β|ψ|²)) ψ` with μ the current
/// chemical potential, then renormalize and apply `project`. Eigenstates of
/// the discrete Hamiltonian are exact fixed points, so the converged field
/// does not depend on Δτ.
fn relax<P>(seed: ComplexField2D, params: &SolverParams, mut project: P) -> Result<Relaxed>
where
    P: FnMut(&mut Array2<Complex64>, usize) -> Result<()>,
{
    params.validate()?;
    let grid = params.grid;
    let beta = params.beta;
    let v = potential(&grid);
    let half_k2 = k_squared(&grid).mapv(|k| 0.5 * k);
    let mut fft = Fft2::new(grid.points_per_axis());

    let mut psi = grid::normalize(&seed)?;
    project(psi.values_mut(), 0)?;
    psi = grid::normalize(&psi)?;
    let mut parts = grid::energy_parts(&psi, beta);
    let mut e = parts.total();
    let mut history = vec![e];
    let mut dtau = params.imag_dt;
    let dtau_min = params.imag_dt * 1e-6;
    let mut iterations = 0;

    while iterations < params.imag_max_iterations {
        let b = ndarray::Zip::from(&v)
            .and(psi.values())
            .map_collect(|v, p| v + beta * p.norm_sqr());
        let (bmin, bmax) = b
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let alpha = 0.5 * (bmin + bmax);
        let mu = parts.kinetic + parts.potential + 2.0 * parts.interaction;
        let mut next = ndarray::Zip::from(psi.values())
            .and(&b)
            .map_collect(|p, b| p * (1.0 + dtau * (alpha + mu - b)));
        fft.forward_transposed(&mut next);
        ndarray::Zip::from(&mut next)
            .and(&half_k2)
            .for_each(|p, k| *p /= 1.0 + dtau * (k + alpha));
        fft.inverse_transposed(&mut next);
        project(&mut next, iterations + 1)?;
        let candidate = grid::normalize(&ComplexField2D::new(grid, next, 0.0)?)?;
        let parts_new = grid::energy_parts(&candidate, beta);
        let e_new = parts_new.total();
        if !e_new.is_finite() {
            return Err(Error::NonFinite { step: iterations, t: 0.0 });
        }
        if e_new > e + 1e-12 * e.abs().max(1.0) {
            dtau *= 0.5;
            if dtau < dtau_min {
                return Err(Error::NotConverged {
                    iterations,
                    history: tail(&history),
                });
            }
            continue;
        }
        iterations += 1;
        let de = (e_new - e).abs() / (dtau * e_new.abs().max(1e-300));
        let dpsi = ndarray::Zip::from(candidate.values())
            .and(psi.values())
            .fold(0.0f64, |m, a, b| m.max((a - b).norm()))
            / (dtau * max_abs(candidate.values()));
        psi = candidate;
        e = e_new;
        parts = parts_new;
        history.push(e);
        if de < params.imag_tolerance && dpsi < params.imag_field_tolerance {
            log::debug!("imaginary time converged after {iterations} iterations, E = {e}");
            return Ok(Relaxed {
                field: psi,
                energy: e,
                iterations,
                history,
            });
        }
        dtau = (dtau * 1.25).min(params.imag_dt_max);
    }
    Err(Error::NotConverged {
        iterations,
        history: tail(&history),
    })
}

fn tail(history: &[f64]) -> Vec<f64> {
    history[history.len().saturating_sub(10)..].to_vec()
}

/// Ground state from a Ritz-width Gaussian seed. The result is real,
/// positive and normalized.
pub fn ground_state_relaxed(params: &SolverParams) -> Result<Relaxed> {
    let sigma = sigma_broadening(params.beta)?;
    let seed = ComplexField2D::from_fn(params.grid, 0.0, |x, y| {
        Complex64::new((-(x * x + y * y) / (2.0 * sigma * sigma)).exp(), 0.0)
    });
    let mut r = relax(seed, params, |values, _| {
        values.mapv_inplace(|v| Complex64::new(v.re.abs(), 0.0));
        Ok(())
    })?;
    r.field = grid::normalize(&r.field)?;
    Ok(r)
}

pub fn ground_state(params: &SolverParams) -> Result<ComplexField2D> {
    Ok(ground_state_relaxed(params)?.field)
}

/// Winding of a field along the square loop of half-width `k` grid cells
/// centered on grid point (ic, jc).
pub fn loop_winding(values: &Array2<Complex64>, ic: usize, jc: usize, k: usize) -> i32 {
    let (i0, i1, j0, j1) = (ic - k, ic + k, jc - k, jc + k);
    let mut path = Vec::new();
    for i in i0..i1 {
        path.push((i, j0));
    }
    for j in j0..j1 {
        path.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        path.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        path.push((i0, j));
    }
    let mut total = 0.0;
    for w in 0..path.len() {
        let a = values[path[w]];
        let b = values[path[(w + 1) % path.len()]];
        total += wrap_phase(b.arg() - a.arg());
    }
    (total / (2.0 * PI)).round() as i32
}

fn origin_index(grid: &GridSpec) -> Result<usize> {
    let m = grid.points_per_axis();
    let c = m / 2;
    if grid.coord(c).abs() > 1e-12 {
        return Err(Error::InvalidGrid("the origin is not a grid point".into()));
    }
    Ok(c)
}

/// Lowest-energy state with a charge-q vortex at the origin. The phase is
/// reset to qθ after every iteration, keeping the modulus.
pub fn central_vortex_relaxed(params: &SolverParams, q: i32) -> Result<Relaxed> {
    if q.abs() != 1 {
        return Err(Error::InvalidParameter(format!("central vortex charge must be +1 or -1, got {q}")));
    }
    let grid = params.grid;
    let c = origin_index(&grid)?;
    let xs = grid.coords();
    let m = grid.points_per_axis();
    let phase = Array2::from_shape_fn((m, m), |(i, j)| {
        Complex64::from_polar(1.0, q as f64 * xs[j].atan2(xs[i]))
    });
    let sigma = sigma_broadening(params.beta)?;
    let qf = q as f64;
    let seed = ComplexField2D::from_fn(grid, 0.0, |x, y| {
        Complex64::new(x, qf * y) * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    let loop_k = 3.min(c);
    relax(seed, params, |values, step| {
        if step > 0 && loop_winding(values, c, c, loop_k) != q {
            return Err(Error::WindingLost { step });
        }
        ndarray::Zip::from(&mut *values)
            .and(&phase)
            .for_each(|v, p| *v = p * v.norm());
        values[[c, c]] = Complex64::new(0.0, 0.0);
        Ok(())
    })
}

pub fn central_vortex_state(params: &SolverParams, q: i32) -> Result<ComplexField2D> {
    Ok(central_vortex_relaxed(params, q)?.field)
}

/// Radial factor g(r) of a centered vortex, `ψ_q = g(r)(x + iqy)ψ_gs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub spacing: f64,
    /// g at r = k·spacing.
    pub samples: Vec<f64>,
}

/// Points where ψ_gs drops below this fraction of its maximum carry no
/// information about g; the profile is held constant beyond them.
pub const PROFILE_FLOOR: f64 = 1e-8;

impl RadialProfile {
    /// Extracts g along the positive x axis, where ψ_q is real and positive.
    pub fn extract(gs: &ComplexField2D, vortex: &ComplexField2D) -> Result<Self> {
        let grid = *gs.grid();
        if vortex.grid() != &grid {
            return Err(Error::FrameMismatch("ground state and vortex state grids differ".into()));
        }
        let c = origin_index(&grid)?;
        let m = grid.points_per_axis();
        let h = grid.spacing();
        let gmax = max_abs(gs.values());
        let mut samples = vec![0.0; m - c];
        let mut last = None;
        for k in 1..(m - c) {
            let g0 = gs.values()[[c + k, c]].re;
            if g0 < PROFILE_FLOOR * gmax {
                break;
            }
            samples[k] = vortex.values()[[c + k, c]].norm() / (k as f64 * h * g0);
            last = Some(k);
        }
        let last = last.ok_or_else(|| Error::Degenerate("ground state vanishes next to the origin".into()))?;
        for k in last + 1..samples.len() {
            samples[k] = samples[last];
        }
        // g is even in r, so g(0) follows from g(h) and g(2h)
        samples[0] = if samples.len() > 2 {
            (4.0 * samples[1] - samples[2]) / 3.0
        } else {
            samples[1]
        };
        Ok(RadialProfile { spacing: h, samples })
    }

    /// Profile of the ideal gas, g ≡ 1.
    pub fn constant(spacing: f64, len: usize) -> Self {
        RadialProfile {
            spacing,
            samples: vec![1.0; len.max(2)],
        }
    }

    /// Cubic Lagrange interpolation, using g(−r) = g(r) near the origin and
    /// constant extrapolation past the last sample.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.samples.len();
        let u = r.abs() / self.spacing;
        if u >= (n - 1) as f64 {
            return self.samples[n - 1];
        }
        let k = u.floor() as isize;
        let s = u - k as f64;
        let at = |i: isize| -> f64 {
            let i = i.unsigned_abs().min(n - 1);
            self.samples[i]
        };
        let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        p1 + 0.5
            * s
            * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }

    /// Vortex imprint p_q(x, y) = g(r)(x + iqy) for a vortex at (x₀, y₀).
    pub fn imprint(&self, q: i32, x0: f64, y0: f64, x: f64, y: f64) -> Complex64 {
        let (dx, dy) = (x - x0, y - y0);
        self.eval(dx.hypot(dy)) * Complex64::new(dx, q as f64 * dy)
    }
}

/// Ground state and vortex profile for one β on one grid.
#[derive(Debug, Clone)]
pub struct Background {
    pub beta: f64,
    pub ground: ComplexField2D,
    pub profile: RadialProfile,
    pub r_edge: f64,
}

impl Background {
    pub fn compute(params: &SolverParams) -> Result<Self> {
        let ground = ground_state(params)?;
        let vortex = central_vortex_state(params, 1)?;
        let profile = RadialProfile::extract(&ground, &vortex)?;
        Ok(Background {
            beta: params.beta,
            ground,
            profile,
            r_edge: 4.0 * sigma_broadening(params.beta)?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.ground.grid()
    }
}

/// p_q on the grid for a vortex at the origin.
pub fn vortex_background_factor(background: &Background, q: i32) -> ComplexField2D {
    let p = &background.profile;
    ComplexField2D::from_fn(*background.grid(), 0.0, |x, y| p.imprint(q, 0.0, 0.0, x, y))
}

/// `ψ(r, 0) = α ψ_gs(r) Π_j p_{q_j}(r − r_j)`, normalized.
pub fn build_initial_state(config: &VortexConfig, background: &Background) -> Result<ComplexField2D> {
    for v in &config.vortices {
        if v.radius() >= background.r_edge {
            return Err(Error::OutsideDisc {
                x: v.x,
                y: v.y,
                r_edge: background.r_edge,
            });
        }
    }
    let grid = *background.grid();
    let xs = grid.coords();
    let p = &background.profile;
    let m = grid.points_per_axis();
    let values = Array2::from_shape_fn((m, m), |(i, j)| {
        let (x, y) = (xs[i], xs[j]);
        config
            .vortices
            .iter()
            .fold(background.ground.values()[[i, j]], |acc, v| acc * p.imprint(v.charge, v.x, v.y, x, y))
    });
    grid::normalize(&ComplexField2D::new(grid, values, 0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(beta: f64) -> SolverParams {
        SolverParams::new(beta, GridSpec::new(8.0, 64).unwrap()).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(small(0.0).with_dt(0.0).is_err());
        assert!(SolverParams::new(-1.0, GridSpec::default()).is_err());
        let mut p = small(0.0);
        p.imag_tolerance = 0.0;
        assert!(p.validate().is_err());
        assert_eq!(small(0.0).stride_steps(), 10);
    }

    #[test]
    fn params_json_defaults() {
        let p: SolverParams = serde_json::from_str(r#"{"beta": 1.0}"#).unwrap();
        assert_eq!(p.dt, 1e-3);
        assert_eq!(p.grid, GridSpec::default());
    }

    #[test]
    fn profile_interpolation_is_exact_for_quadratics() {
        let h = 0.1;
        let samples = (0..40).map(|k| 1.0 + 0.3 * (k as f64 * h).powi(2)).collect();
        let p = RadialProfile { spacing: h, samples };
        for &r in &[0.0, 0.04, 0.15, 1.234, 3.0] {
            assert_abs_diff_eq!(p.eval(r), 1.0 + 0.3 * r * r, epsilon = 1e-12);
        }
        assert_eq!(p.eval(100.0), p.samples[39]);
    }

    #[test]
    fn loop_winding_of_analytic_vortex() {
        let g = GridSpec::new(4.0, 32).unwrap();
        let f = ComplexField2D::from_fn(g, 0.0, |x, y| Complex64::new(x, -y));
        assert_eq!(loop_winding(f.values(), 16, 16, 2), -1);
        assert_eq!(loop_winding(f.values(), 8, 8, 2), 0);
    }

    #[test]
    fn nonfinite_field_is_reported() {
        let p = small(1.0);
        let mut f = ComplexField2D::from_fn(p.grid, 0.0, |_, _| Complex64::new(1.0, 0.0));
        f.values_mut()[[3, 3]] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(step_realtime(&f, &p), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn outside_disc_is_rejected() {
        let p = small(0.0);
        let bg = Background {
            beta: 0.0,
            ground: ground_state(&p).unwrap(),
            profile: RadialProfile::constant(p.grid.spacing(), 10),
            r_edge: 4.0,
        };
        let cfg = VortexConfig::symmetric(crate::closed_form::Family::Single, 4.5, 0.0).unwrap();
        assert!(matches!(build_initial_state(&cfg, &bg), Err(Error::OutsideDisc { .. })));
    }
}
