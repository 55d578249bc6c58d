//! Analytic vortex wavefunctions, trajectories and event times.
//!
//! Every field here has the form `A(t) · exp(−r²/2σ²) · P(x, y; t)` with `P` a
//! low-degree polynomial whose coefficients depend on time only. Zeros and
//! winding numbers are properties of `P` alone, so the zero finder works on
//! the polynomial with exact derivatives.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::sigma_broadening;
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Single,
    Pair,
    Dipole,
    Tripole,
    General,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Single => "single",
            Family::Pair => "pair",
            Family::Dipole => "dipole",
            Family::Tripole => "tripole",
            Family::General => "general",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Family::Single),
            "pair" => Ok(Family::Pair),
            "dipole" => Ok(Family::Dipole),
            "tripole" => Ok(Family::Tripole),
            "general" => Ok(Family::General),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointVortex {
    pub x: f64,
    pub y: f64,
    pub charge: i32,
}

impl PointVortex {
    pub fn new(x: f64, y: f64, charge: i32) -> Self {
        PointVortex { x, y, charge }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Initial vortex configuration: positions and unit charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexConfig {
    pub family: Family,
    pub beta: f64,
    pub vortices: Vec<PointVortex>,
}

impl VortexConfig {
    pub fn new(family: Family, beta: f64, vortices: Vec<PointVortex>) -> Result<Self> {
        if let Some(v) = vortices.iter().find(|v| v.charge.abs() != 1) {
            return Err(Error::InvalidParameter(format!(
                "vortex charges must be +1 or -1, got {}",
                v.charge
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
        }
        Ok(VortexConfig {
            family,
            beta,
            vortices,
        })
    }

    /// The symmetric configurations: single `+` at (x₀, 0); pair `+ +` at
    /// (±x₀, 0); dipole `+` at (x₀, 0) and `−` at (−x₀, 0); tripole `+` at
    /// (±x₀, 0) with `−` at the origin.
    pub fn symmetric(family: Family, x0: f64, beta: f64) -> Result<Self> {
        let v = match family {
            Family::Single => vec![PointVortex::new(x0, 0.0, 1)],
            Family::Pair => vec![PointVortex::new(x0, 0.0, 1), PointVortex::new(-x0, 0.0, 1)],
            Family::Dipole => vec![PointVortex::new(x0, 0.0, 1), PointVortex::new(-x0, 0.0, -1)],
            Family::Tripole => vec![
                PointVortex::new(x0, 0.0, 1),
                PointVortex::new(0.0, 0.0, -1),
                PointVortex::new(-x0, 0.0, 1),
            ],
            Family::General => {
                return Err(Error::InvalidParameter(
                    "the general family needs explicit vortex positions".into(),
                ))
            }
        };
        VortexConfig::new(family, beta, v)
    }

    pub fn total_charge(&self) -> i32 {
        self.vortices.iter().map(|v| v.charge).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub vortices: Vec<PointVortex>,
}

/// Dense bivariate polynomial `Σ a[i][j] xⁱ yʲ` with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    coeffs: Vec<Vec<Complex64>>,
}

impl Poly2 {
    pub fn zero(degree: usize) -> Self {
        Poly2 {
            coeffs: vec![vec![Complex64::new(0.0, 0.0); degree + 1]; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&mut self, i: usize, j: usize, a: Complex64) -> &mut Self {
        self.coeffs[i][j] += a;
        self
    }

    pub fn coefficient(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[i][j]
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        self.eval_with_gradient(x, y).0
    }

    /// Value together with ∂/∂x and ∂/∂y.
    pub fn eval_with_gradient(&self, x: f64, y: f64) -> (Complex64, Complex64, Complex64) {
        let d = self.degree();
        let mut xp = vec![1.0; d + 1];
        let mut yp = vec![1.0; d + 1];
        for k in 1..=d {
            xp[k] = xp[k - 1] * x;
            yp[k] = yp[k - 1] * y;
        }
        let mut v = Complex64::new(0.0, 0.0);
        let mut dx = v;
        let mut dy = v;
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                if *a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                v += a * xp[i] * yp[j];
                if i > 0 {
                    dx += a * (i as f64) * xp[i - 1] * yp[j];
                }
                if j > 0 {
                    dy += a * (j as f64) * xp[i] * yp[j - 1];
                }
            }
        }
        (v, dx, dy)
    }
}

/// `amplitude · exp(−r²/2σ²) · poly(x, y)` frozen at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub amplitude: Complex64,
    pub sigma: f64,
    pub poly: Poly2,
}

impl ClosedForm {
    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        let g = (-(x * x + y * y) / (2.0 * self.sigma * self.sigma)).exp();
        self.amplitude * g * self.poly.eval(x, y)
    }
}

/// √(2π)·√(β+2π), the denominator shared by all interacting phases.
fn phase_denominator(beta: f64) -> f64 {
    (2.0 * PI).sqrt() * (beta + 2.0 * PI).sqrt()
}

/// Precession frequency of a single off-center vortex in the Ritz ansatz.
pub fn precession_frequency(beta: f64) -> f64 {
    (beta + 8.0 * PI) / (4.0 * phase_denominator(beta))
}

/// Linear-response slope dω_p/dβ at β = 0, equal to −1/(8π).
pub fn precession_coefficient_analytic() -> f64 {
    -1.0 / (8.0 * PI)
}

/// Ideal single vortex started at (x₁, 0).
pub fn ideal_single_vortex(x1: f64, t: f64, x: f64, y: f64) -> Complex64 {
    let env = (-(x * x + y * y) / 2.0).exp();
    env * cis(-2.0 * t) * (Complex64::new(x, y) - cis(t) * x1)
}

pub fn ideal_vortex_position(x1: f64, t: f64) -> (f64, f64) {
    (x1 * t.cos(), x1 * t.sin())
}

/// Two same-sign vortices in the ideal gas rotate rigidly with unit frequency.
pub fn ideal_pair_trajectories(r1: (f64, f64), r2: (f64, f64), t: f64) -> [(f64, f64); 2] {
    let (s, c) = t.sin_cos();
    let rot = |(x, y): (f64, f64)| (x * c - y * s, x * s + y * c);
    [rot(r1), rot(r2)]
}

/// Ideal pair field for vortices initially at complex positions z₁, z₂:
/// `e^{−r²/2}[e^{−3it}(z − z₁e^{it})(z − z₂e^{it})]`.
pub fn ideal_pair_field(r1: (f64, f64), r2: (f64, f64), t: f64, x: f64, y: f64) -> Complex64 {
    let z = Complex64::new(x, y);
    let z1 = Complex64::new(r1.0, r1.1) * cis(t);
    let z2 = Complex64::new(r2.0, r2.1) * cis(t);
    (-(x * x + y * y) / 2.0).exp() * cis(-3.0 * t) * (z - z1) * (z - z2)
}

/// Ideal symmetric dipole, obtained by evolving `(z − x₀)(z̄ + x₀)·e^{−r²/2}` in
/// oscillator modes: `e^{−r²/2}[2i x₀ y e^{−2it} + (1 − x₀²) e^{−it} + (r² − 1) e^{−3it}]`.
pub fn ideal_dipole_field(x0: f64, t: f64, x: f64, y: f64) -> Complex64 {
    let r2 = x * x + y * y;
    (-(r2) / 2.0).exp()
        * (I * 2.0 * x0 * y * cis(-2.0 * t) + (1.0 - x0 * x0) * cis(-t) + (r2 - 1.0) * cis(-3.0 * t))
}

/// Ideal tripole: `+` at (±x₀, 0), `−` at the origin.
pub fn ideal_tripole_field(x0: f64, t: f64, x: f64, y: f64) -> Complex64 {
    let e2 = cis(2.0 * t);
    let x02 = x0 * x0;
    let poly = x * x * x + I * y * x * x + (y * y - e2 * (x02 - 2.0) - 2.0) * x
        + I * y * (y * y + e2 * (x02 + 2.0) - 2.0);
    (-(x * x + y * y) / 2.0).exp() * cis(-4.0 * t) * poly
}

/// Ideal dipole trajectory. Returns no vortices inside an annihilation window.
/// Charges are read off the local winding of the field, so the `+` vortex
/// starts at (x₀, 0).
pub fn dipole_trajectory_ideal(x0: f64, t: f64) -> TrajectorySample {
    let y = t.sin() * (x0 * x0 - 1.0) / x0;
    let disc = x0 * x0 - y * y;
    let mut vortices = Vec::new();
    if disc >= 0.0 {
        let x = disc.sqrt();
        let poly = family_form(Family::Dipole, x0, 0.0, t).expect("dipole is closed").poly;
        for sx in [1.0, -1.0] {
            let px = sx * x;
            let charge = match jacobian_sign(&poly, px, y) {
                0 => {
                    if px >= 0.0 {
                        1
                    } else {
                        -1
                    }
                }
                s => s,
            };
            vortices.push(PointVortex::new(px, y, charge));
        }
    }
    TrajectorySample { t, vortices }
}

/// Annihilation and reappearance times of the ideal symmetric dipole within
/// the half period [0, π], or `None` if the pair never meets.
pub fn dipole_annihilation_times(x0: f64) -> Result<Option<(f64, f64)>> {
    if !(x0.is_finite() && x0 > 0.0) {
        return Err(Error::InvalidParameter(format!("x0 must be positive, got {x0}")));
    }
    if x0 == 1.0 {
        // the ratio is ill-defined here; the pair sits still
        return Ok(None);
    }
    let mut ratio = x0 * x0 / (x0 * x0 - 1.0).abs();
    if (ratio - 1.0).abs() < 1e-12 {
        ratio = 1.0;
    }
    if ratio > 1.0 {
        return Ok(None);
    }
    let ta = ratio.asin();
    Ok(Some((ta, PI - ta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Creation,
    Annihilation,
    ChargeFlip,
    Crossing,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Creation => "creation",
            EventKind::Annihilation => "annihilation",
            EventKind::ChargeFlip => "charge_flip",
            EventKind::Crossing => "crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexEvent {
    pub t: f64,
    pub kind: EventKind,
    pub x: f64,
    pub y: f64,
}

/// Event schedule of the ideal tripole with x₀ = √2 over `periods` periods of
/// length π: pair creation at the center (π/6), crossings with charge flips
/// at (±√2, 0) (π/4 and 3π/4) and annihilation at the center (5π/6).
pub fn tripole_event_times(x0: f64, periods: usize) -> Result<Vec<VortexEvent>> {
    if (x0 - 2f64.sqrt()).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "closed-form tripole events are only known for x0 = sqrt(2), got {x0}; scan zeros instead"
        )));
    }
    let s2 = 2f64.sqrt();
    let mut out = Vec::new();
    for k in 0..periods {
        let base = k as f64 * PI;
        out.push(VortexEvent { t: base + PI / 6.0, kind: EventKind::Creation, x: 0.0, y: 0.0 });
        for tc in [PI / 4.0, 3.0 * PI / 4.0] {
            for sx in [s2, -s2] {
                out.push(VortexEvent { t: base + tc, kind: EventKind::Crossing, x: sx, y: 0.0 });
                out.push(VortexEvent { t: base + tc, kind: EventKind::ChargeFlip, x: sx, y: 0.0 });
            }
        }
        out.push(VortexEvent { t: base + 5.0 * PI / 6.0, kind: EventKind::Annihilation, x: 0.0, y: 0.0 });
    }
    Ok(out)
}

/// Vortex count of the ideal x₀ = √2 tripole at time t.
pub fn tripole_vortex_count_ideal(t: f64) -> usize {
    let tau = t.rem_euclid(PI);
    let eps = 1e-12;
    if (tau - PI / 4.0).abs() < eps || (tau - 3.0 * PI / 4.0).abs() < eps {
        1
    } else if tau > PI / 6.0 + eps && tau < 5.0 * PI / 6.0 - eps {
        5
    } else {
        3
    }
}

/// Moving pair of the ideal x₀ = √2 tripole, where it exists.
pub fn tripole_moving_pair_ideal(t: f64) -> Option<[(f64, f64); 2]> {
    let r2 = 2.0 - 4.0 * (2.0 * t).cos();
    if r2 < 0.0 {
        return None;
    }
    let r = r2.sqrt();
    let (s, c) = (2.0 * t).sin_cos();
    Some([(r * s, -r * c), (-r * s, r * c)])
}

/// Single vortex trajectory in the Ritz ansatz: an exact circle of radius x₀
/// traversed at the precession frequency.
pub fn interacting_single_vortex_trajectory(x0: f64, beta: f64, t: f64) -> (f64, f64) {
    let w = precession_frequency(beta);
    (x0 * (w * t).cos(), x0 * (w * t).sin())
}

/// The closed form of `family` at time `t`.
pub fn family_form(family: Family, x0: f64, beta: f64, t: f64) -> Result<ClosedForm> {
    let sigma = sigma_broadening(beta)?;
    let s2 = sigma * sigma;
    let d = phase_denominator(beta);
    let pi = PI;
    let form = match family {
        Family::Single => {
            let mut p = Poly2::zero(1);
            p.add(1, 0, c(1.0))
                .add(0, 1, I)
                .add(0, 0, -cis((beta + 8.0 * pi) * t / (4.0 * d)) * x0);
            ClosedForm {
                amplitude: cis(-(7.0 * beta + 16.0 * pi) * t / (4.0 * d)),
                sigma,
                poly: p,
            }
        }
        Family::Pair => {
            let mut p = Poly2::zero(2);
            p.add(2, 0, c(1.0))
                .add(1, 1, 2.0 * I * cis(5.0 * beta * t / (64.0 * d)))
                .add(0, 0, -cis((41.0 * beta + 256.0 * pi) * t / (64.0 * d)) * x0 * x0)
                .add(0, 2, c(-1.0));
            ClosedForm {
                amplitude: cis(-(137.0 * beta + 384.0 * pi) * t / (64.0 * d)),
                sigma,
                poly: p,
            }
        }
        Family::Dipole => {
            let a = cis((233.0 * beta + 512.0 * pi) * t / (64.0 * d));
            let b = cis((249.0 * beta + 640.0 * pi) * t / (64.0 * d));
            let e = cis((13.0 * beta + 24.0 * pi) * t / (4.0 * d));
            let mut p = Poly2::zero(2);
            p.add(0, 1, 2.0 * I * a * x0)
                .add(0, 0, b * (sigma - x0) * (sigma + x0))
                .add(0, 0, -e * s2)
                .add(2, 0, e)
                .add(0, 2, e);
            ClosedForm {
                amplitude: cis(-3.0 * (115.0 * beta + 256.0 * pi) * t / (64.0 * d)),
                sigma,
                poly: p,
            }
        }
        Family::Tripole => {
            let e1 = cis(3.0 * (369.0 * beta + 1024.0 * pi) * t / (256.0 * d));
            let e2 = cis(3.0 * (361.0 * beta + 1024.0 * pi) * t / (256.0 * d));
            let e3 = cis((647.0 * beta + 2048.0 * pi) * t / (128.0 * d));
            let mut p = Poly2::zero(3);
            // e1 [σ²(x + iy) − 2i x (x − iy) y] = e1 [σ² x + iσ² y − 2i x² y − 2 x y²]
            p.add(1, 0, e1 * s2)
                .add(0, 1, e1 * I * s2)
                .add(2, 1, -2.0 * I * e1)
                .add(1, 2, -2.0 * e1);
            // e2 [3σ²(x + iy) − 2(x³ + iy³)]
            p.add(1, 0, e2 * 3.0 * s2)
                .add(0, 1, e2 * I * 3.0 * s2)
                .add(3, 0, -2.0 * e2)
                .add(0, 3, -2.0 * I * e2);
            // −2 e3 [2σ²(x + iy) − (x − iy) x₀²]
            let x02 = x0 * x0;
            p.add(1, 0, -2.0 * e3 * (2.0 * s2 - x02))
                .add(0, 1, -2.0 * e3 * I * (2.0 * s2 + x02));
            // the Gaussian envelope's time-dependent phase is folded into the amplitude
            let amp_phase = -871.0 * beta * t / (128.0 * d)
                - 10.0 * (2.0 * pi).sqrt() * t / (beta + 2.0 * pi).sqrt();
            ClosedForm {
                amplitude: cis(amp_phase),
                sigma,
                poly: p,
            }
        }
        Family::General => {
            return Err(Error::Unsupported(
                "no closed form for general configurations; use the basis engine".into(),
            ))
        }
    };
    Ok(form)
}

/// Closed-form wavefunction (unnormalized) at one point.
pub fn interacting_field(family: Family, x0: f64, beta: f64, t: f64, x: f64, y: f64) -> Result<Complex64> {
    Ok(family_form(family, x0, beta, t)?.eval(x, y))
}

/// Same as [`interacting_field`] but with the family given by name.
pub fn interacting_field_named(family: &str, x0: f64, beta: f64, t: f64, x: f64, y: f64) -> Result<Complex64> {
    interacting_field(family.parse()?, x0, beta, t, x, y)
}

/// Default detection radius, four broadened widths.
pub fn detection_radius(beta: f64) -> Result<f64> {
    Ok(4.0 * sigma_broadening(beta)?)
}

/// A zero of a closed form with its winding number (0 for coincident
/// opposite charges).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub x: f64,
    pub y: f64,
    pub winding: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSet {
    pub t: f64,
    pub zeros: Vec<Zero>,
    /// Candidates whose Newton iteration failed.
    pub dropped: Vec<(f64, f64)>,
}

impl ZeroSet {
    pub fn vortices(&self) -> Vec<PointVortex> {
        self.zeros
            .iter()
            .filter(|z| z.winding != 0)
            .map(|z| PointVortex::new(z.x, z.y, z.winding.signum()))
            .collect()
    }

    pub fn sample(&self) -> TrajectorySample {
        TrajectorySample {
            t: self.t,
            vortices: self.vortices(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroScan {
    pub cells: usize,
    pub r_edge: f64,
    pub tolerance: f64,
    pub merge_radius: f64,
}

impl ZeroScan {
    pub fn new(r_edge: f64) -> Self {
        ZeroScan {
            cells: 512,
            r_edge,
            tolerance: 1e-12,
            merge_radius: 1e-6,
        }
    }
}

fn jacobian_sign(p: &Poly2, x: f64, y: f64) -> i32 {
    let (_, dx, dy) = p.eval_with_gradient(x, y);
    let det = dx.re * dy.im - dy.re * dx.im;
    let scale = (dx.norm() * dy.norm()).max(f64::MIN_POSITIVE);
    if det.abs() <= 1e-10 * scale {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    }
}

fn newton(p: &Poly2, mut x: f64, mut y: f64, tol: f64) -> Option<(f64, f64)> {
    for _ in 0..200 {
        let (v, dx, dy) = p.eval_with_gradient(x, y);
        // J = [[∂x Re, ∂y Re], [∂x Im, ∂y Im]]
        let (a, b, cc, d) = (dx.re, dy.re, dx.im, dy.im);
        let det = a * d - b * cc;
        if det.abs() < 1e-300 {
            return if v.norm() < tol { Some((x, y)) } else { None };
        }
        let sx = (d * v.re - b * v.im) / det;
        let sy = (-cc * v.re + a * v.im) / det;
        // damp steps that would leave the neighbourhood of the seed
        let len = sx.hypot(sy);
        let damp = if len > 0.5 { 0.5 / len } else { 1.0 };
        x -= damp * sx;
        y -= damp * sy;
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        if len < 1e-14 * (1.0 + x.hypot(y)) {
            break;
        }
    }
    if p.eval(x, y).norm() < tol {
        Some((x, y))
    } else {
        None
    }
}

/// Winding of `p` along a circle of radius `r` around (x, y).
pub fn poly_winding(p: &Poly2, x: f64, y: f64, r: f64) -> i32 {
    let n = 64;
    let mut total = 0.0;
    let mut prev = p.eval(x + r, y).arg();
    for k in 1..=n {
        let a = 2.0 * PI * k as f64 / n as f64;
        let cur = p.eval(x + r * a.cos(), y + r * a.sin()).arg();
        total += wrap_phase(cur - prev);
        prev = cur;
    }
    (total / (2.0 * PI)).round() as i32
}

/// Wraps a phase difference into (−π, π].
pub fn wrap_phase(d: f64) -> f64 {
    let mut w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// All zeros of a polynomial inside the disc `r ≤ r_edge`: sign-change scan
/// on a `cells × cells` lattice, Newton refinement, duplicate merge and a
/// winding tag from a small contour around each zero.
pub fn find_zeros(p: &Poly2, scan: &ZeroScan, t: f64) -> ZeroSet {
    let n = scan.cells;
    let lo = -scan.r_edge;
    let h = 2.0 * scan.r_edge / n as f64;
    let vals: Vec<Complex64> = (0..=n)
        .flat_map(|i| (0..=n).map(move |j| (i, j)))
        .map(|(i, j)| p.eval(lo + i as f64 * h, lo + j as f64 * h))
        .collect();
    let at = |i: usize, j: usize| vals[i * (n + 1) + j];
    let mut found: Vec<(f64, f64)> = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let re_change = sign_change(corners.iter().map(|c| c.re));
            let im_change = sign_change(corners.iter().map(|c| c.im));
            if !(re_change && im_change) {
                continue;
            }
            let (x, y) = (lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h);
            match newton(p, x, y, scan.tolerance) {
                Some((zx, zy)) => {
                    if zx.hypot(zy) > scan.r_edge {
                        continue;
                    }
                    if !found
                        .iter()
                        .any(|&(fx, fy)| (fx - zx).hypot(fy - zy) < scan.merge_radius)
                    {
                        found.push((zx, zy));
                    }
                }
                None => {
                    log::debug!("newton failed from ({x:.4}, {y:.4}) at t = {t}");
                    dropped.push((x, y));
                }
            }
        }
    }
    let zeros = found
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let nearest = found
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != k)
                .map(|(_, &(ox, oy))| (ox - x).hypot(oy - y))
                .fold(f64::INFINITY, f64::min);
            let r = (0.3 * nearest).min(1e-3);
            Zero {
                x,
                y,
                winding: poly_winding(p, x, y, r),
            }
        })
        .collect();
    ZeroSet { t, zeros, dropped }
}

fn sign_change(mut it: impl Iterator<Item = f64>) -> bool {
    let first = it.next().unwrap_or(0.0);
    let mut pos = first >= 0.0;
    let mut neg = first <= 0.0;
    for v in it {
        pos |= v >= 0.0;
        neg |= v <= 0.0;
    }
    pos && neg
}

/// Zeros of the closed form of `family` at time `t`.
pub fn zeros_of_closed_form(family: Family, x0: f64, beta: f64, t: f64, scan: &ZeroScan) -> Result<ZeroSet> {
    let form = family_form(family, x0, beta, t)?;
    Ok(find_zeros(&form.poly, scan, t))
}

/// Count of vortices (nonzero winding) of a closed form inside the default disc.
pub fn closed_form_vortex_count(family: Family, x0: f64, beta: f64, t: f64, cells: usize) -> Result<usize> {
    let scan = ZeroScan {
        cells,
        ..ZeroScan::new(detection_radius(beta)?)
    };
    Ok(zeros_of_closed_form(family, x0, beta, t, &scan)?.vortices().len())
}

/// 1/√2: below this the ideal dipole annihilates.
pub const DIPOLE_ANNIHILATION_THRESHOLD: f64 = FRAC_1_SQRT_2;
