//! Grid descriptor, the sampled wavefunction, and the observables computed on it.
//!
//! Lengths are in units of the oscillator length, time in units of 1/ω and
//! energies in units of ħω. The grid covers `[-L, L)²` with `M` points per
//! axis; axis 0 of every array is x, axis 1 is y.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, Fft2};

pub const DEFAULT_EXTENT: f64 = 8.0;
pub const DEFAULT_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridSpec {
    extent: f64,
    points: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    extent: f64,
    points_per_axis: usize,
}

impl TryFrom<GridRepr> for GridSpec {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        GridSpec::new(r.extent, r.points_per_axis)
    }
}

impl GridSpec {
    /// Parses a `{"extent", "points_per_axis"}` object, keeping grid
    /// validation errors distinct from malformed JSON.
    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        let r: GridRepr = serde_json::from_value(v.clone())?;
        GridSpec::try_from(r)
    }
}

impl From<GridSpec> for GridRepr {
    fn from(g: GridSpec) -> Self {
        GridRepr {
            extent: g.extent,
            points_per_axis: g.points,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            extent: DEFAULT_EXTENT,
            points: DEFAULT_POINTS,
        }
    }
}

impl GridSpec {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 4, got {points}"
            )));
        }
        Ok(GridSpec { extent, points })
    }

    /// Half-width L of the domain.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Index of the grid point mirrored through the origin (periodic wrap).
    pub fn mirror_index(&self, i: usize) -> usize {
        (self.points - i) % self.points
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }
}

/// Wavefunction samples ψ(x_i, y_j) at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    grid: GridSpec,
    values: Array2<Complex64>,
    time: f64,
}

impl ComplexField2D {
    pub fn new(grid: GridSpec, values: Array2<Complex64>, time: f64) -> Result<Self> {
        let m = grid.points_per_axis();
        if values.dim() != (m, m) {
            return Err(Error::InvalidGrid(format!(
                "value array is {:?}, grid expects ({m}, {m})",
                values.dim()
            )));
        }
        // standard layout is assumed by the FFT and the snapshot writer
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(ComplexField2D { grid, values, time })
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        let m = grid.points_per_axis();
        ComplexField2D {
            grid,
            values: Array2::zeros((m, m)),
            time,
        }
    }

    /// Samples `f(x, y)` on every grid point.
    pub fn from_fn(grid: GridSpec, time: f64, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let xs = grid.coords();
        let m = grid.points_per_axis();
        let values = Array2::from_shape_fn((m, m), |(i, j)| f(xs[i], xs[j]));
        ComplexField2D { grid, values, time }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        ComplexField2D {
            grid: self.grid,
            values: self.values.mapv(|v| v * factor),
            time: self.time,
        }
    }

    pub fn conj(&self) -> Self {
        ComplexField2D {
            grid: self.grid,
            values: self.values.mapv(|v| v.conj()),
            time: self.time,
        }
    }

    /// ψ(-x, -y) on the same grid.
    pub fn reflected(&self) -> Self {
        let m = self.grid.points_per_axis();
        let g = self.grid;
        let values = Array2::from_shape_fn((m, m), |(i, j)| {
            self.values[[g.mirror_index(i), g.mirror_index(j)]]
        });
        ComplexField2D {
            grid: self.grid,
            values,
            time: self.time,
        }
    }

    /// Discrete L² distance √(Σ|ψ−φ|² h²).
    pub fn l2_distance(&self, other: &ComplexField2D) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::FrameMismatch("fields live on different grids".into()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_area()).sqrt())
    }

    /// ⟨self, other⟩ = Σ conj(self)·other h².
    pub fn inner(&self, other: &ComplexField2D) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_area()
    }
}

pub fn norm(f: &ComplexField2D) -> f64 {
    let s: f64 = f.values.iter().map(|v| v.norm_sqr()).sum();
    (s * f.grid.cell_area()).sqrt()
}

pub fn normalize(f: &ComplexField2D) -> Result<ComplexField2D> {
    let n = norm(f);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Degenerate(format!("cannot normalize a field of norm {n}")));
    }
    Ok(f.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// Per-particle Gross-Pitaevskii energy
/// `∫ ½|∇ψ|² + ½ r²|ψ|² + (β/2)|ψ|⁴`, kinetic part evaluated in Fourier space.
pub fn energy(f: &ComplexField2D, beta: f64) -> f64 {
    energy_parts(f, beta).total()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }
}

pub fn energy_parts(f: &ComplexField2D, beta: f64) -> EnergyParts {
    let grid = &f.grid;
    let m = grid.points_per_axis();
    let k = spectral::wavenumbers(grid);
    let mut spectrum = f.values.clone();
    Fft2::new(m).forward(&mut spectrum);
    let mut kin = 0.0;
    for ((a, b), v) in spectrum.indexed_iter() {
        kin += (k[a] * k[a] + k[b] * k[b]) * v.norm_sqr();
    }
    let area = grid.cell_area();
    let kinetic = 0.5 * kin * area / (m * m) as f64;

    let xs = grid.coords();
    let mut pot = 0.0;
    let mut int = 0.0;
    for ((i, j), v) in f.values.indexed_iter() {
        let rho = v.norm_sqr();
        pot += 0.5 * (xs[i] * xs[i] + xs[j] * xs[j]) * rho;
        int += 0.5 * beta * rho * rho;
    }
    EnergyParts {
        kinetic,
        potential: pot * area,
        interaction: int * area,
    }
}

/// Probability current `j = Im(ψ* ∇ψ)` from spectral derivatives.
pub fn current_density(f: &ComplexField2D) -> (Array2<f64>, Array2<f64>) {
    let (dx, dy) = spectral::gradient(&f.grid, &f.values);
    let jx = ndarray::Zip::from(&f.values)
        .and(&dx)
        .map_collect(|p, d| (p.conj() * d).im);
    let jy = ndarray::Zip::from(&f.values)
        .and(&dy)
        .map_collect(|p, d| (p.conj() * d).im);
    (jx, jy)
}

/// Laboratory parameters, only used to obtain the dimensionless β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub atom_number: f64,
    pub scattering_length: f64,
    pub omega: f64,
    pub omega_z: f64,
    pub oscillator_length: f64,
}

/// `β = 2 N a_s √(2π ω_z/ω) / a₀`.
pub fn beta_from_physical(p: &PhysicalParams) -> Result<f64> {
    let finite = [
        p.atom_number,
        p.scattering_length,
        p.omega,
        p.omega_z,
        p.oscillator_length,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidParameter("physical parameters must be finite".into()));
    }
    if p.atom_number < 0.0 || p.scattering_length < 0.0 {
        return Err(Error::InvalidParameter(
            "atom number and scattering length must be nonnegative".into(),
        ));
    }
    if p.omega <= 0.0 || p.omega_z <= 0.0 || p.oscillator_length <= 0.0 {
        return Err(Error::InvalidParameter(
            "trap frequencies and oscillator length must be positive".into(),
        ));
    }
    if p.omega_z < 10.0 * p.omega {
        log::warn!(
            "omega_z / omega = {:.3}; the 2D reduction assumes a much tighter axial trap",
            p.omega_z / p.omega
        );
    }
    Ok(2.0 * p.atom_number * p.scattering_length * (2.0 * PI * p.omega_z / p.omega).sqrt()
        / p.oscillator_length)
}
