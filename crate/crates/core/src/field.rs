//! The three-component order parameter on a 2D grid and its spin observables.
//!
//! Components are ordered `m = +1, 0, -1`. Amplitudes are in um^-1 so that
//! `|psi_m|^2` is a column density in um^-2.
//!
//! Spin densities use the spin-1 matrices in the `(+1, 0, -1)` basis:
//!
//! ```text
//! F_z    = |psi_+|^2 - |psi_-|^2
//! F_perp = F_x + i F_y = sqrt(2) (psi_+^* psi_0 + psi_0^* psi_-)
//! N_xz   = <(f_x f_z + f_z f_x) / 2> = (Re(psi_+^* psi_0) - Re(psi_0^* psi_-)) / sqrt(2)
//! N_yz   = <(f_y f_z + f_z f_y) / 2> = (Im(psi_+^* psi_0) - Im(psi_0^* psi_-)) / sqrt(2)
//! ```

use std::f64::consts::SQRT_2;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub nz: usize,
    /// um
    pub dx: f64,
    /// um
    pub dz: f64,
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, dx: f64, dz: f64) -> Result<Self> {
        if !nx.is_power_of_two() {
            return Err(Error::param("nx", format!("{nx} is not a power of two")));
        }
        if !nz.is_power_of_two() {
            return Err(Error::param("nz", format!("{nz} is not a power of two")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::param("dx", "must be positive"));
        }
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(Error::param("dz", "must be positive"));
        }
        Ok(Self { nx, nz, dx, dz })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dz
    }

    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn lz(&self) -> f64 {
        self.nz as f64 * self.dz
    }

    pub fn area(&self) -> f64 {
        self.lx() * self.lz()
    }

    /// Cell-centre coordinate with the origin at index `nx / 2`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - (self.nx / 2) as f64) * self.dx
    }

    pub fn z(&self, j: usize) -> f64 {
        (j as f64 - (self.nz / 2) as f64) * self.dz
    }

    pub fn kx(&self) -> Vec<f64> {
        crate::fft::wavevectors(self.nx, self.dx)
    }

    pub fn kz(&self) -> Vec<f64> {
        crate::fft::wavevectors(self.nz, self.dz)
    }

    pub fn zeros(&self) -> Array2<Complex64> {
        Array2::zeros(self.shape())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinField {
    pub grid: Grid2D,
    /// `[psi_+, psi_0, psi_-]`
    pub psi: [Array2<Complex64>; 3],
}

impl SpinField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            psi: [grid.zeros(), grid.zeros(), grid.zeros()],
        }
    }

    pub fn from_components(grid: Grid2D, psi: [Array2<Complex64>; 3]) -> Result<Self> {
        for c in &psi {
            if c.dim() != grid.shape() {
                return Err(Error::GridMismatch(format!(
                    "component shape {:?} vs grid {:?}",
                    c.dim(),
                    grid.shape()
                )));
            }
        }
        Ok(Self { grid, psi })
    }

    /// Everything in `|m = 0>` with the given amplitude profile.
    pub fn polar(grid: Grid2D, psi_zero: Array2<Complex64>) -> Result<Self> {
        Self::from_components(grid, [grid.zeros(), psi_zero, grid.zeros()])
    }

    pub fn plus(&self) -> &Array2<Complex64> {
        &self.psi[0]
    }

    pub fn zero(&self) -> &Array2<Complex64> {
        &self.psi[1]
    }

    pub fn minus(&self) -> &Array2<Complex64> {
        &self.psi[2]
    }

    pub fn density(&self) -> Array2<f64> {
        let mut n = Array2::zeros(self.grid.shape());
        for c in &self.psi {
            Zip::from(&mut n).and(c).for_each(|n, v| *n += v.norm_sqr());
        }
        n
    }

    pub fn atom_number(&self) -> f64 {
        let (p, z, m) = self.zeeman_population();
        p + z + m
    }

    /// `(N_+, N_0, N_-)`
    pub fn zeeman_population(&self) -> (f64, f64, f64) {
        let da = self.grid.cell_area();
        let pop = |c: &Array2<Complex64>| c.iter().map(|v| v.norm_sqr()).sum::<f64>() * da;
        (pop(&self.psi[0]), pop(&self.psi[1]), pop(&self.psi[2]))
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.psi {
            c.mapv_inplace(|v| v * s);
        }
    }

    /// Multiplies every component by a common phase.
    pub fn global_phase(&mut self, phase: f64) {
        let u = Complex64::from_polar(1.0, phase);
        for c in &mut self.psi {
            c.mapv_inplace(|v| v * u);
        }
    }

    /// Spin rotation about z by `phi`: `psi_m -> exp(-i m phi) psi_m`.
    pub fn rotate_z(&mut self, phi: f64) {
        let up = Complex64::from_polar(1.0, -phi);
        self.psi[0].mapv_inplace(|v| v * up);
        self.psi[2].mapv_inplace(|v| v * up.conj());
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn observables(&self) -> ObservableMaps {
        observables(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableMaps {
    pub grid: Grid2D,
    /// column density, um^-2
    pub density: Array2<f64>,
    pub fz: Array2<f64>,
    /// F_x + i F_y
    pub f_perp: Array2<Complex64>,
    pub n_xz: Array2<f64>,
    pub n_yz: Array2<f64>,
}

impl ObservableMaps {
    /// Transverse magnetization map `moment * F_perp` (moment in any unit).
    pub fn transverse_magnetization(&self, moment: f64) -> Array2<Complex64> {
        self.f_perp.mapv(|v| v * moment)
    }
}

pub fn observables(f: &SpinField) -> ObservableMaps {
    let shape = f.grid.shape();
    let mut density = Array2::zeros(shape);
    let mut fz = Array2::zeros(shape);
    let mut f_perp = Array2::zeros(shape);
    let mut n_xz = Array2::zeros(shape);
    let mut n_yz = Array2::zeros(shape);
    let pairs = f.psi[1].iter().zip(f.psi[2].iter());
    for ((idx, &p), (&z, &m)) in f.psi[0].indexed_iter().zip(pairs) {
        let (np, nm) = (p.norm_sqr(), m.norm_sqr());
        density[idx] = np + z.norm_sqr() + nm;
        fz[idx] = np - nm;
        let a = p.conj() * z;
        let b = z.conj() * m;
        f_perp[idx] = (a + b) * SQRT_2;
        n_xz[idx] = (a.re - b.re) / SQRT_2;
        n_yz[idx] = (a.im - b.im) / SQRT_2;
    }
    ObservableMaps {
        grid: f.grid,
        density,
        fz,
        f_perp,
        n_xz,
        n_yz,
    }
}
