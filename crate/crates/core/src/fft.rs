//! Planned 2D complex FFTs on row-major `(nx, nz)` arrays.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward and inverse 2D transforms. `inverse(forward(a)) = n a`
/// with `n = nx * nz`.
pub struct Fft2 {
    nx: usize,
    nz: usize,
    rows: [Arc<dyn Fft<f64>>; 2],
    cols: [Arc<dyn Fft<f64>>; 2],
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(nx: usize, nz: usize) -> Self {
        let mut planner = FftPlanner::new();
        let rows = [planner.plan_fft_forward(nz), planner.plan_fft_inverse(nz)];
        let cols = [planner.plan_fft_forward(nx), planner.plan_fft_inverse(nx)];
        let scratch_len = rows
            .iter()
            .chain(cols.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            nx,
            nz,
            rows,
            cols,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transposed: vec![Complex64::new(0.0, 0.0); nx * nz],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn forward(&mut self, a: &mut Array2<Complex64>) {
        self.run(a, 0);
    }

    pub fn inverse(&mut self, a: &mut Array2<Complex64>) {
        self.run(a, 1);
    }

    /// Inverse transform scaled by `1/n`.
    pub fn inverse_normalized(&mut self, a: &mut Array2<Complex64>) {
        self.run(a, 1);
        let s = 1.0 / (self.nx * self.nz) as f64;
        a.mapv_inplace(|v| v * s);
    }

    fn run(&mut self, a: &mut Array2<Complex64>, dir: usize) {
        assert_eq!(a.dim(), (self.nx, self.nz), "array shape does not match plan");
        let data = a
            .as_slice_mut()
            .expect("field arrays are standard row-major layout");
        if self.nz > 1 {
            self.rows[dir].process_with_scratch(data, &mut self.scratch);
        }
        if self.nx > 1 {
            let (nx, nz) = (self.nx, self.nz);
            for i in 0..nx {
                for j in 0..nz {
                    self.transposed[j * nx + i] = data[i * nz + j];
                }
            }
            self.cols[dir].process_with_scratch(&mut self.transposed, &mut self.scratch);
            for i in 0..nx {
                for j in 0..nz {
                    data[i * nz + j] = self.transposed[j * nx + i];
                }
            }
        }
    }
}

/// Signed FFT index for position `i` of an `n`-point transform.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Angular wavevectors `2 pi m / (n d)` in FFT order.
pub fn wavevectors(n: usize, spacing: f64) -> Vec<f64> {
    let length = n as f64 * spacing;
    (0..n)
        .map(|i| 2.0 * PI * signed_index(i, n) as f64 / length)
        .collect()
}
