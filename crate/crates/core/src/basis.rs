//! Harmonic-oscillator modes and their Ritz-broadened counterparts.
//!
//! A broadened mode is `ψ_{n,m,β}(x, y, t) = φ_n(x/σ) φ_m(y/σ) e^{-iμ_{n,m} t} / σ`
//! where `φ_n` is the normalized 1D Hermite function and `σ⁴ = 1 + β/2π`
//! minimizes the Gross-Pitaevskii energy of the broadened Gaussian. Within one
//! β the modes are exactly orthonormal (they are rescaled oscillator modes);
//! modes belonging to different β are not orthogonal to each other.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField2D, GridSpec};

/// Default square truncation: all n, m ≤ 12.
pub const DEFAULT_MAX_DEGREE: usize = 12;

/// Projections capturing less than this weight carry a warning.
pub const CAPTURE_WARNING: f64 = 0.999;

/// Physicists' Hermite polynomial H_n(x).
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut h_prev = 1.0;
    if n == 0 {
        return h_prev;
    }
    let mut h = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * h - 2.0 * k as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    h
}

/// Values `H_k(u) / √(2^k k! √π)` for k = 0..=nmax (no Gaussian factor).
fn normalized_hermite_polys(nmax: usize, u: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(PI.powf(-0.25));
    if nmax >= 1 {
        out.push(2f64.sqrt() * u * out[0]);
    }
    for k in 1..nmax {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Normalized 1D Hermite functions φ_k(u), k = 0..=nmax.
pub fn hermite_functions(nmax: usize, u: f64) -> Vec<f64> {
    let g = (-0.5 * u * u).exp();
    let mut v = normalized_hermite_polys(nmax, u);
    v.iter_mut().for_each(|p| *p *= g);
    v
}

/// Gauss-Hermite nodes and weights for weight e^{-x²}, exact for polynomials
/// up to degree 2n−1.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut z: f64 = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// σ with σ² = √((β + 2π)/2π).
pub fn sigma_broadening(beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "interaction strength must be finite and nonnegative, got {beta}"
        )));
    }
    Ok(((beta + 2.0 * PI) / (2.0 * PI)).powf(0.25))
}

/// Ritz energy of the broadened Gaussian of width σ.
pub fn ritz_gaussian_energy(sigma: f64, beta: f64) -> f64 {
    let s2 = sigma * sigma;
    1.0 / (2.0 * s2) + s2 / 2.0 + beta / (4.0 * PI * s2)
}

/// Coherence length from ξ² = √(π/4β). Diagnostic only; infinite at β = 0.
pub fn coherence_length(beta: f64) -> f64 {
    (PI / (4.0 * beta)).sqrt().sqrt()
}

/// `∫ φ_n(u)⁴ du`, exact via Gauss-Hermite quadrature.
fn quartic_overlap(n: usize) -> f64 {
    // φ_n⁴ = h_n(u)⁴ e^{-2u²}; with u = v/√2 the weight becomes e^{-v²}
    let (nodes, weights) = gauss_hermite(2 * n + 2);
    let sum: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(v, w)| w * normalized_hermite_polys(n, v / 2f64.sqrt())[n].powi(4))
        .sum();
    sum / 2f64.sqrt()
}

/// Phase constant μ_{n,m}: the expectation value of the Gross-Pitaevskii
/// operator (with the full β|ψ|⁴ term) in the broadened mode.
pub fn mu_constant(n: usize, m: usize, beta: f64) -> Result<f64> {
    let sigma = sigma_broadening(beta)?;
    let s2 = sigma * sigma;
    let level = (1 + n + m) as f64;
    Ok(0.5 * level * (1.0 / s2 + s2) + beta * quartic_overlap(n) * quartic_overlap(m) / s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisState {
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub sigma: f64,
    pub mu: f64,
    /// Ideal oscillator energy 1 + n + m.
    pub energy: f64,
}

impl BasisState {
    pub fn new(n: usize, m: usize, beta: f64) -> Result<Self> {
        Ok(BasisState {
            n,
            m,
            beta,
            sigma: sigma_broadening(beta)?,
            mu: mu_constant(n, m, beta)?,
            energy: (1 + n + m) as f64,
        })
    }
}

pub fn mode_function(state: &BasisState, x: f64, y: f64, t: f64) -> Complex64 {
    let s = state.sigma;
    let fx = hermite_functions(state.n, x / s)[state.n];
    let fy = hermite_functions(state.m, y / s)[state.m];
    Complex64::from_polar(fx * fy / s, -state.mu * t)
}

/// Table `A[k][i] = φ_k(x_i/σ)/√σ` so that a mode on the grid is `A[n][i]·A[m][j]`.
fn mode_table(grid: &GridSpec, sigma: f64, max_degree: usize) -> Array2<f64> {
    let xs = grid.coords();
    let mut a = Array2::zeros((max_degree + 1, xs.len()));
    let scale = 1.0 / sigma.sqrt();
    for (i, x) in xs.iter().enumerate() {
        for (k, v) in hermite_functions(max_degree, x / sigma).into_iter().enumerate() {
            a[[k, i]] = v * scale;
        }
    }
    a
}

/// Coefficients of a field in the broadened basis, square truncation n, m ≤ D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralRepr", into = "SpectralRepr")]
pub struct SpectralState {
    max_degree: usize,
    beta: f64,
    time: f64,
    coeffs: Array2<Complex64>,
    mu: Array2<f64>,
    captured_weight: f64,
    warning: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SpectralRepr {
    max_degree: usize,
    beta: f64,
    time: f64,
    /// (n, m, re, im)
    coefficients: Vec<(usize, usize, f64, f64)>,
}

impl From<SpectralState> for SpectralRepr {
    fn from(s: SpectralState) -> Self {
        let coefficients = s
            .coeffs
            .indexed_iter()
            .map(|((n, m), c)| (n, m, c.re, c.im))
            .collect();
        SpectralRepr {
            max_degree: s.max_degree,
            beta: s.beta,
            time: s.time,
            coefficients,
        }
    }
}

impl TryFrom<SpectralRepr> for SpectralState {
    type Error = Error;
    fn try_from(r: SpectralRepr) -> Result<Self> {
        let d = r.max_degree;
        let mut coeffs = Array2::zeros((d + 1, d + 1));
        for (n, m, re, im) in r.coefficients {
            if n > d || m > d {
                return Err(Error::Format(format!("mode ({n}, {m}) exceeds max degree {d}")));
            }
            coeffs[[n, m]] = Complex64::new(re, im);
        }
        SpectralState::from_coefficients(coeffs, r.beta, r.time)
    }
}

fn mu_table(max_degree: usize, beta: f64) -> Result<Array2<f64>> {
    let mut mu = Array2::zeros((max_degree + 1, max_degree + 1));
    for n in 0..=max_degree {
        for m in 0..=max_degree {
            mu[[n, m]] = mu_constant(n, m, beta)?;
        }
    }
    Ok(mu)
}

impl SpectralState {
    /// Builds a state from a square `(D+1)×(D+1)` coefficient array.
    pub fn from_coefficients(coeffs: Array2<Complex64>, beta: f64, time: f64) -> Result<Self> {
        let (a, b) = coeffs.dim();
        if a != b || a == 0 {
            return Err(Error::InvalidParameter(format!(
                "coefficient array must be square and nonempty, got {a}x{b}"
            )));
        }
        let max_degree = a - 1;
        let mu = mu_table(max_degree, beta)?;
        let captured_weight = coeffs.iter().map(|c| c.norm_sqr()).sum();
        Ok(SpectralState {
            max_degree,
            beta,
            time,
            coeffs,
            mu,
            captured_weight,
            warning: None,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn coefficient(&self, n: usize, m: usize) -> Complex64 {
        self.coeffs[[n, m]]
    }

    pub fn coefficients(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn mu(&self, n: usize, m: usize) -> f64 {
        self.mu[[n, m]]
    }

    /// Σ|c_{n,m}|².
    pub fn weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Weight captured at projection time (equal to `weight()` for states
    /// built from coefficients).
    pub fn captured_weight(&self) -> f64 {
        self.captured_weight
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }
}

/// Projects a field onto the broadened basis by grid quadrature.
pub fn project(f: &ComplexField2D, beta: f64, max_degree: usize) -> Result<SpectralState> {
    let grid = *f.grid();
    let sigma = sigma_broadening(beta)?;
    let a = mode_table(&grid, sigma, max_degree);
    let area = grid.cell_area();
    // C = A · F · Aᵀ, modes are real so no conjugation is needed
    let a_c = a.mapv(|v| Complex64::new(v, 0.0));
    let coeffs = a_c.dot(f.values()).dot(&a_c.t()) * Complex64::new(area, 0.0);
    let mut state = SpectralState::from_coefficients(coeffs, beta, f.time())?;
    if state.captured_weight < CAPTURE_WARNING {
        let msg = format!(
            "projection onto n,m <= {max_degree} captured weight {:.6} < {CAPTURE_WARNING}",
            state.captured_weight
        );
        log::warn!("{msg}");
        state.warning = Some(msg);
    }
    Ok(state)
}

/// Advances every coefficient by its own phase: `c(t) = c(t₀) e^{-iμ (t − t₀)}`.
pub fn evolve(s: &SpectralState, t: f64) -> SpectralState {
    let dt = t - s.time;
    let mut out = s.clone();
    for ((n, m), c) in out.coeffs.indexed_iter_mut() {
        *c *= Complex64::from_polar(1.0, -s.mu[[n, m]] * dt);
    }
    out.time = t;
    out
}

/// Pointwise sum `Σ c_{n,m} ψ_{n,m,β}` on the grid.
pub fn synthesize(s: &SpectralState, grid: &GridSpec) -> ComplexField2D {
    let sigma = sigma_broadening(s.beta).expect("beta validated at construction");
    let a = mode_table(grid, sigma, s.max_degree).mapv(|v| Complex64::new(v, 0.0));
    let values = a.t().dot(&s.coeffs).dot(&a);
    ComplexField2D::new(*grid, values, s.time).expect("shape matches grid")
}
