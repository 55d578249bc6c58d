//! C ABI over the vortexdyn toolkit.
//!
//! Every fallible call returns a [`VdnStatus`]; on failure the message is
//! kept per thread and read back with [`vdn_last_error`]. Handles are opaque
//! and owned by the caller once returned; release them with the matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::Array2;
use num_complex::Complex64;

use vortexdyn::closed_form::{self, Family, VortexConfig};
use vortexdyn::solver::{self, Background, SolverParams, Stepper};
use vortexdyn::{basis, grid, track, ComplexField2D, Error, GridSpec};

/// Status codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidGrid = 2,
    Degenerate = 3,
    InvalidParameter = 4,
    UnknownFamily = 5,
    Unsupported = 6,
    OutsideDisc = 7,
    NonFinite = 8,
    NotConverged = 9,
    WindingLost = 10,
    GridTooCoarse = 11,
    EmptyWindow = 12,
    FrameMismatch = 13,
    Format = 14,
    Io = 15,
    BufferTooSmall = 16,
    Panic = 99,
}

impl From<&Error> for VdnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) => VdnStatus::InvalidGrid,
            Error::Degenerate(_) => VdnStatus::Degenerate,
            Error::InvalidParameter(_) => VdnStatus::InvalidParameter,
            Error::UnknownFamily(_) => VdnStatus::UnknownFamily,
            Error::Unsupported(_) => VdnStatus::Unsupported,
            Error::OutsideDisc { .. } => VdnStatus::OutsideDisc,
            Error::NonFinite { .. } => VdnStatus::NonFinite,
            Error::NotConverged { .. } => VdnStatus::NotConverged,
            Error::WindingLost { .. } => VdnStatus::WindingLost,
            Error::GridTooCoarse { .. } => VdnStatus::GridTooCoarse,
            Error::EmptyWindow(..) => VdnStatus::EmptyWindow,
            Error::FrameMismatch(_) => VdnStatus::FrameMismatch,
            Error::Format(_) | Error::Json(_) => VdnStatus::Format,
            Error::Io(_) => VdnStatus::Io,
        }
    }
}

/// Wave function sampled on a square grid.
pub struct VdnField(ComplexField2D);

/// Coefficients in the broadened oscillator basis.
pub struct VdnSpectral(basis::SpectralState);

/// Ground state and vortex core profile for one (beta, grid).
pub struct VdnBackground(Background);

/// One detected vortex.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdnVortex {
    pub x: f64,
    pub y: f64,
    pub charge: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(VdnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(VdnStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VdnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VdnStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            VdnStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(VdnStatus::InvalidParameter, format!("`{what}` is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn field<'a>(f: *const VdnField) -> Result<&'a ComplexField2D, Failure> {
    f.as_ref().map(|f| &f.0).ok_or_else(|| null("field"))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vdn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Builds a field from `2 * points * points` interleaved (re, im) values,
/// x-major.
///
/// # Safety
/// `values` must point to `2 * points * points` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_from_values(
    extent: f64,
    points: usize,
    values: *const f64,
    time: f64,
    out: *mut *mut VdnField,
) -> VdnStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let g = GridSpec::new(extent, points)?;
        let raw = std::slice::from_raw_parts(values, 2 * points * points);
        let v = Array2::from_shape_fn((points, points), |(i, j)| {
            let k = 2 * (i * points + j);
            Complex64::new(raw[k], raw[k + 1])
        });
        put(out, VdnField(ComplexField2D::new(g, v, time)?))
    })
}

/// Samples a closed-form solution (`single`, `pair`, `dipole` or `tripole`).
///
/// # Safety
/// `family` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_closed_form(
    family: *const c_char,
    x0: f64,
    beta: f64,
    t: f64,
    extent: f64,
    points: usize,
    out: *mut *mut VdnField,
) -> VdnStatus {
    guard(|| {
        let family: Family = text(family, "family")?.parse()?;
        let g = GridSpec::new(extent, points)?;
        let form = closed_form::family_form(family, x0, beta, t)?;
        put(out, VdnField(ComplexField2D::from_fn(g, t, |x, y| form.eval(x, y))))
    })
}

/// Computes the ground state and vortex core profile for `beta`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_background_compute(
    beta: f64,
    extent: f64,
    points: usize,
    out: *mut *mut VdnBackground,
) -> VdnStatus {
    guard(|| {
        let params = SolverParams::new(beta, GridSpec::new(extent, points)?)?;
        put(out, VdnBackground(Background::compute(&params)?))
    })
}

/// Copies the ground state out of a background.
///
/// # Safety
/// `bg` must come from [`vdn_background_compute`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_background_ground_state(bg: *const VdnBackground, out: *mut *mut VdnField) -> VdnStatus {
    guard(|| {
        let bg = bg.as_ref().ok_or_else(|| null("background"))?;
        put(out, VdnField(bg.0.ground.clone()))
    })
}

/// Symmetric vortex initial state of `family` at half separation `x0`.
///
/// # Safety
/// `bg` must come from [`vdn_background_compute`]; `family` must be a
/// NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_initial_state(
    bg: *const VdnBackground,
    family: *const c_char,
    x0: f64,
    out: *mut *mut VdnField,
) -> VdnStatus {
    guard(|| {
        let bg = bg.as_ref().ok_or_else(|| null("background"))?;
        let family: Family = text(family, "family")?.parse()?;
        let config = VortexConfig::symmetric(family, x0, bg.0.beta)?;
        put(out, VdnField(solver::build_initial_state(&config, &bg.0)?))
    })
}

/// # Safety
/// `bg` must be null or come from [`vdn_background_compute`].
#[no_mangle]
pub unsafe extern "C" fn vdn_background_free(bg: *mut VdnBackground) {
    if !bg.is_null() {
        drop(Box::from_raw(bg));
    }
}

/// Advances `f` in place by `steps` split-step steps of size `dt`.
///
/// # Safety
/// `f` must be a valid field handle.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_evolve(f: *mut VdnField, beta: f64, dt: f64, steps: usize) -> VdnStatus {
    guard(|| {
        let f = f.as_mut().map(|f| &mut f.0).ok_or_else(|| null("field"))?;
        let params = SolverParams::new(beta, *f.grid())?.with_dt(dt)?;
        let mut stepper = Stepper::new(&params)?;
        stepper.advance(f, steps)?;
        Ok(())
    })
}

/// Points per axis, or 0 for a null handle.
///
/// # Safety
/// `f` must be null or a valid field handle.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_points(f: *const VdnField) -> usize {
    f.as_ref().map_or(0, |f| f.0.grid().points_per_axis())
}

/// Field time, or NaN for a null handle.
///
/// # Safety
/// `f` must be null or a valid field handle.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_time(f: *const VdnField) -> f64 {
    f.as_ref().map_or(f64::NAN, |f| f.0.time())
}

/// Writes interleaved (re, im) values, x-major, into `out`.
///
/// # Safety
/// `f` must be a valid handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_values(f: *const VdnField, out: *mut f64, len: usize) -> VdnStatus {
    guard(|| {
        let f = field(f)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = f.grid().points_per_axis();
        if len < 2 * n * n {
            return Err(Failure(
                VdnStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", 2 * n * n),
            ));
        }
        let out = std::slice::from_raw_parts_mut(out, 2 * n * n);
        for ((i, j), v) in f.values().indexed_iter() {
            out[2 * (i * n + j)] = v.re;
            out[2 * (i * n + j) + 1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_norm(f: *const VdnField, out: *mut f64) -> VdnStatus {
    guard(|| {
        let f = field(f)?;
        *out.as_mut().ok_or_else(|| null("out"))? = grid::norm(f);
        Ok(())
    })
}

/// # Safety
/// `f` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_energy(f: *const VdnField, beta: f64, out: *mut f64) -> VdnStatus {
    guard(|| {
        let f = field(f)?;
        *out.as_mut().ok_or_else(|| null("out"))? = grid::energy(f, beta);
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a valid field handle.
#[no_mangle]
pub unsafe extern "C" fn vdn_field_free(f: *mut VdnField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Detects vortices within `r_edge`. Stores the number found in `count` and
/// writes up to `capacity` of them; returns `BufferTooSmall` when truncated.
///
/// # Safety
/// `f` must be a valid handle; `out` must point to `capacity` entries (or be
/// null when `capacity` is 0); `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_detect(
    f: *const VdnField,
    r_edge: f64,
    out: *mut VdnVortex,
    capacity: usize,
    count: *mut usize,
) -> VdnStatus {
    guard(|| {
        let obs = track::detect(field(f)?, r_edge)?;
        *count.as_mut().ok_or_else(|| null("count"))? = obs.len();
        if capacity > 0 && out.is_null() {
            return Err(null("out"));
        }
        for (k, o) in obs.iter().take(capacity).enumerate() {
            *out.add(k) = VdnVortex {
                x: o.x,
                y: o.y,
                charge: o.charge,
            };
        }
        if obs.len() > capacity {
            return Err(Failure(
                VdnStatus::BufferTooSmall,
                format!("{} vortices, room for {capacity}", obs.len()),
            ));
        }
        Ok(())
    })
}

/// Projects `f` onto the broadened oscillator basis up to total degree
/// `max_degree`.
///
/// # Safety
/// `f` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_spectral_project(
    f: *const VdnField,
    beta: f64,
    max_degree: usize,
    out: *mut *mut VdnSpectral,
) -> VdnStatus {
    guard(|| put(out, VdnSpectral(basis::project(field(f)?, beta, max_degree)?)))
}

/// Evolves the spectral state to absolute time `t` and samples it.
///
/// # Safety
/// `s` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vdn_spectral_synthesize(
    s: *const VdnSpectral,
    t: f64,
    extent: f64,
    points: usize,
    out: *mut *mut VdnField,
) -> VdnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectral"))?;
        let g = GridSpec::new(extent, points)?;
        put(out, VdnField(basis::synthesize(&basis::evolve(&s.0, t), &g)))
    })
}

/// # Safety
/// `s` must be null or a valid spectral handle.
#[no_mangle]
pub unsafe extern "C" fn vdn_spectral_free(s: *mut VdnSpectral) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Analytic precession frequency of an off-center vortex; NaN for beta < 0.
#[no_mangle]
pub extern "C" fn vdn_precession_frequency(beta: f64) -> f64 {
    if beta >= 0.0 {
        closed_form::precession_frequency(beta)
    } else {
        f64::NAN
    }
}
