//! Square 2D FFTs and spectral derivatives on the periodic grid.
//!
//! The transform is applied row by row, with an in-place transpose between
//! the two passes. Plans are cached per thread and per size.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

/// A reusable square FFT with its scratch buffer.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let (forward, inverse) = plans(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft2 {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Unnormalized forward transform, result in natural orientation.
    pub fn forward(&mut self, data: &mut Array2<Complex64>) {
        self.pass(data, true);
        transpose_in_place(data);
        self.pass(data, true);
        transpose_in_place(data);
    }

    /// Inverse transform including the 1/n² factor.
    pub fn inverse(&mut self, data: &mut Array2<Complex64>) {
        self.pass(data, false);
        transpose_in_place(data);
        self.pass(data, false);
        transpose_in_place(data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    /// Forward transform that leaves the spectrum transposed. Only valid for
    /// multipliers that are symmetric under swapping the two axes, which is
    /// the case for any function of |k|² on a square grid.
    pub fn forward_transposed(&mut self, data: &mut Array2<Complex64>) {
        self.pass(data, true);
        transpose_in_place(data);
        self.pass(data, true);
    }

    /// Inverse of [`Fft2::forward_transposed`], including the 1/n² factor.
    pub fn inverse_transposed(&mut self, data: &mut Array2<Complex64>) {
        self.pass(data, false);
        transpose_in_place(data);
        self.pass(data, false);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.mapv_inplace(|v| v * scale);
    }

    fn pass(&mut self, data: &mut Array2<Complex64>, forward: bool) {
        let plan = if forward { &self.forward } else { &self.inverse };
        let slice = data
            .as_slice_mut()
            .expect("field arrays are always in standard layout");
        plan.process_with_scratch(slice, &mut self.scratch);
    }
}

fn transpose_in_place(data: &mut Array2<Complex64>) {
    let n = data.nrows();
    debug_assert_eq!(n, data.ncols());
    let s = data.as_slice_mut().expect("standard layout");
    for i in 0..n {
        for j in (i + 1)..n {
            s.swap(i * n + j, j * n + i);
        }
    }
}

/// Angular wavenumbers in FFT order for a periodic box of length `2 * extent`.
pub fn wavenumbers(grid: &GridSpec) -> Vec<f64> {
    let n = grid.points_per_axis();
    let dk = 2.0 * PI / (2.0 * grid.extent());
    (0..n)
        .map(|i| {
            let i = i as isize;
            let n = n as isize;
            let m = if i < n / 2 { i } else { i - n };
            m as f64 * dk
        })
        .collect()
}

/// Wavenumbers for odd-order derivatives: the Nyquist mode is zeroed so that
/// derivatives of real data stay real.
pub fn derivative_wavenumbers(grid: &GridSpec) -> Vec<f64> {
    let mut k = wavenumbers(grid);
    let n = k.len();
    k[n / 2] = 0.0;
    k
}

/// Spectral first derivatives (∂x ψ, ∂y ψ). Axis 0 is x, axis 1 is y.
pub fn gradient(grid: &GridSpec, values: &Array2<Complex64>) -> (Array2<Complex64>, Array2<Complex64>) {
    let n = grid.points_per_axis();
    let k = derivative_wavenumbers(grid);
    let mut fft = Fft2::new(n);
    let mut spectrum = values.clone();
    fft.forward(&mut spectrum);
    let i = Complex64::i();
    let mut dx = spectrum.clone();
    let mut dy = spectrum;
    for ((a, _), v) in dx.indexed_iter_mut() {
        *v *= i * k[a];
    }
    for ((_, b), v) in dy.indexed_iter_mut() {
        *v *= i * k[b];
    }
    fft.inverse(&mut dx);
    fft.inverse(&mut dy);
    (dx, dy)
}
