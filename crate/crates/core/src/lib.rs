//! Vortex dynamics in two-dimensional, harmonically trapped Bose-Einstein
//! condensates.
//!
//! The crate provides three independent ways to evolve a vortex
//! configuration and a detector to compare them:
//!
//! * [`closed_form`]: analytic wavefunctions for the ideal gas and their
//!   Ritz-broadened counterparts for weak interactions,
//! * [`basis`]: projection onto (broadened) oscillator modes with exact
//!   per-mode phase evolution,
//! * [`solver`]: the full Gross-Pitaevskii equation by second-order
//!   time-splitting with Fourier kinetics,
//! * [`track`]: phase-winding vortex detection, frame association and vortex
//!   counting,
//! * [`scenario`]: JSON scenarios, sweeps and analytic/numeric comparison.

pub mod basis;
pub mod closed_form;
pub mod error;
pub mod grid;
pub mod snapshot;
pub mod scenario;
pub mod solver;
pub mod spectral;
pub mod track;

pub use error::{Error, Result};
pub use grid::{ComplexField2D, GridSpec};
