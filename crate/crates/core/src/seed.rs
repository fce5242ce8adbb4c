//! Pre-quench state preparation: the `|m = 0>` condensate and the fluctuations
//! seeded into the `|m = +-1>` components.
//!
//! Vacuum seeding follows the truncated-Wigner convention: every plane-wave
//! mode of `psi_+` and `psi_-` receives an independent circular Gaussian
//! amplitude with mean population 1/2. Draws are keyed by the signed mode
//! index, so refining the grid at fixed box size keeps the low-k noise.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft2};
use crate::field::{Grid2D, SpinField};
use crate::noise::{mode_key, stream, CounterRng};
use crate::params::{ModelCouplings, Trap2D};
use crate::spectrum::Dispersion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeedMode {
    None,
    Vacuum,
    /// Incoherent population of the `m = +-1` sublevels. `n_pm` is the total
    /// number of atoms in both sublevels, split evenly between them.
    Thermal { n_pm: f64 },
    /// `psi_+- += amplitude * cos(k z)`, weighted by the condensate profile.
    /// `k` is rounded to the nearest grid wavevector along z.
    SingleMode { k: f64, amplitude: f64 },
}

/// Basis in which the vacuum half-quantum is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeedBasis {
    PlaneWave,
    /// Quasiparticle vacuum of the spin Hamiltonian at the given `q` (Hz).
    /// Modes that are not dynamically stable at that `q` fall back to plane
    /// waves.
    Bogoliubov { q_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub mode: SeedMode,
    pub rng_seed: u64,
    /// Multiplier on the seeded variance (1 = zero-point level).
    pub scale: f64,
    /// Only modes with |k| <= k_cut (um^-1) are seeded; `None` seeds all.
    pub k_cut: Option<f64>,
    pub basis: SeedBasis,
}

impl SeedSpec {
    pub fn vacuum(rng_seed: u64) -> Self {
        Self {
            mode: SeedMode::Vacuum,
            rng_seed,
            scale: 1.0,
            k_cut: None,
            basis: SeedBasis::PlaneWave,
        }
    }

    pub fn none() -> Self {
        Self {
            mode: SeedMode::None,
            ..Self::vacuum(0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SeedMode::Thermal { n_pm } if !(n_pm >= 0.0) => {
                return Err(Error::param("n_pm", "thermal population must be >= 0"))
            }
            SeedMode::SingleMode { amplitude, .. } if !(amplitude >= 0.0) => {
                return Err(Error::param("amp_single", "amplitude must be >= 0"))
            }
            _ => {}
        }
        if !(self.scale >= 0.0) {
            return Err(Error::param("scale", "must be >= 0"));
        }
        if let Some(k) = self.k_cut {
            if !(k > 0.0) {
                return Err(Error::param("k_cut", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BogoliubovMode {
    pub k: f64,
    pub u: f64,
    pub v: f64,
    /// quasiparticle energy, Hz (negative for negative-norm branches)
    pub energy_hz: f64,
}

/// Coefficients of `b = u a_+(k) + v a_-^dagger(-k)` diagonalizing the
/// linearized spin Hamiltonian `A (a+^dag a+ + a-^dag a-) + B (a+ a- + h.c.)`
/// with `A = eps_k + q - q0/2` and `B = -q0/2`.
pub fn bogoliubov_uv(d: &Dispersion, k: f64, q: f64) -> Result<BogoliubovMode> {
    let es2 = d.dispersion_sq(k, q);
    if es2 <= 0.0 {
        return Err(Error::UnstableMode { k_um: k, es2 });
    }
    let a = d.epsilon(k) + q - 0.5 * d.q0_hz;
    let b = -0.5 * d.q0_hz;
    let e = a.signum() * es2.sqrt();
    let u = ((a + e) / (2.0 * e)).sqrt();
    let v = u * (a - e) / b;
    Ok(BogoliubovMode {
        k,
        u,
        v,
        energy_hz: e,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroundStateMethod {
    ThomasFermi,
    /// Imaginary-time split-step relaxation of the scalar problem, started
    /// from the Thomas-Fermi profile.
    ImaginaryTime {
        dtau_ms: f64,
        max_iterations: usize,
        tolerance: f64,
    },
}

/// Condensate with all atoms in `|m = 0>`. Without a trap the density is
/// uniform; otherwise the profile comes from `method`. The result is
/// normalized to `atom_number`.
pub fn ground_state(
    couplings: &ModelCouplings,
    grid: Grid2D,
    trap: Option<&Trap2D>,
    atom_number: f64,
    method: GroundStateMethod,
) -> Result<SpinField> {
    if !(atom_number > 0.0) {
        return Err(Error::param("atom_number", "must be positive"));
    }
    let Some(trap) = trap else {
        let amp = (atom_number / grid.area()).sqrt();
        return SpinField::polar(grid, Array2::from_elem(grid.shape(), Complex64::new(amp, 0.0)));
    };
    if !(couplings.g0_hz_um2 > 0.0) {
        return Err(Error::param("g0", "a trapped ground state needs repulsive g0"));
    }
    let potential = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        trap.potential_hz(grid.x(i), grid.z(j))
    });
    let tf = thomas_fermi(couplings.g0_hz_um2, trap, &potential, grid, atom_number);
    let psi0 = match method {
        GroundStateMethod::ThomasFermi => tf,
        GroundStateMethod::ImaginaryTime {
            dtau_ms,
            max_iterations,
            tolerance,
        } => imaginary_time(
            couplings,
            &potential,
            grid,
            atom_number,
            tf,
            dtau_ms,
            max_iterations,
            tolerance,
        )?,
    };
    SpinField::polar(grid, psi0)
}

fn thomas_fermi(
    g0: f64,
    trap: &Trap2D,
    potential: &Array2<f64>,
    grid: Grid2D,
    atom_number: f64,
) -> Array2<Complex64> {
    let (cx, cz) = trap.curvatures_hz_um2();
    // N = pi mu^2 / (2 g0 sqrt(cx cz)) for the 2D inverted paraboloid
    let mu = (2.0 * g0 * atom_number * (cx * cz).sqrt() / std::f64::consts::PI).sqrt();
    let mut psi = potential.mapv(|v| Complex64::new(((mu - v).max(0.0) / g0).sqrt(), 0.0));
    normalize(&mut psi, grid, atom_number);
    psi
}

fn normalize(psi: &mut Array2<Complex64>, grid: Grid2D, atom_number: f64) {
    let n: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_area();
    if n > 0.0 {
        let s = (atom_number / n).sqrt();
        psi.mapv_inplace(|v| v * s);
    }
}

fn scalar_energy(
    psi: &Array2<Complex64>,
    kinetic: &Array2<f64>,
    potential: &Array2<f64>,
    g0: f64,
    grid: Grid2D,
    fft: &mut Fft2,
) -> f64 {
    let mut spec = psi.clone();
    fft.forward(&mut spec);
    let n_pts = grid.len() as f64;
    // Parseval: sum |psi|^2 dA = sum |psi_k|^2 dA / n
    let kin: f64 = Zip::from(&spec)
        .and(kinetic)
        .fold(0.0, |acc, s, k| acc + k * s.norm_sqr())
        * grid.cell_area()
        / n_pts;
    let local: f64 = Zip::from(psi).and(potential).fold(0.0, |acc, p, v| {
        let n = p.norm_sqr();
        acc + v * n + 0.5 * g0 * n * n
    }) * grid.cell_area();
    kin + local
}

#[allow(clippy::too_many_arguments)]
fn imaginary_time(
    couplings: &ModelCouplings,
    potential: &Array2<f64>,
    grid: Grid2D,
    atom_number: f64,
    mut psi: Array2<Complex64>,
    dtau_ms: f64,
    max_iterations: usize,
    tolerance: f64,
) -> Result<Array2<Complex64>> {
    if !(dtau_ms > 0.0) {
        return Err(Error::param("dtau_ms", "must be positive"));
    }
    let (kx, kz) = (grid.kx(), grid.kz());
    let kinetic = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        couplings.kinetic_hz_um2 * (kx[i] * kx[i] + kz[j] * kz[j])
    });
    let tau = 2.0 * std::f64::consts::PI * dtau_ms * 1e-3;
    let half_kin = kinetic.mapv(|e| (-0.5 * tau * e).exp());
    let g0 = couplings.g0_hz_um2;
    let mut fft = Fft2::new(grid.nx, grid.nz);
    let mut energy = scalar_energy(&psi, &kinetic, potential, g0, grid, &mut fft);
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iterations {
        fft.forward(&mut psi);
        Zip::from(&mut psi).and(&half_kin).for_each(|p, f| *p *= *f);
        fft.inverse_normalized(&mut psi);
        Zip::from(&mut psi)
            .and(potential)
            .for_each(|p, v| *p *= (-tau * (v + g0 * p.norm_sqr())).exp());
        fft.forward(&mut psi);
        Zip::from(&mut psi).and(&half_kin).for_each(|p, f| *p *= *f);
        fft.inverse_normalized(&mut psi);
        normalize(&mut psi, grid, atom_number);

        let e = scalar_energy(&psi, &kinetic, potential, g0, grid, &mut fft);
        last_change = ((e - energy) / e).abs();
        energy = e;
        if last_change < tolerance {
            return Ok(psi);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        last_change,
    })
}

/// Applies `spec` to `f`. Only `psi_+` and `psi_-` are modified.
pub fn apply_seed(f: &mut SpinField, spec: &SeedSpec, dispersion: Option<&Dispersion>) -> Result<()> {
    spec.validate()?;
    match spec.mode {
        SeedMode::None => Ok(()),
        SeedMode::Vacuum => apply_vacuum_seed(f, spec, dispersion),
        SeedMode::Thermal { .. } => apply_thermal_seed(f, spec),
        SeedMode::SingleMode { k, amplitude } => {
            apply_single_mode(f, k, amplitude);
            Ok(())
        }
    }
}

/// Adds zero-point noise (mean 1/2 quantum per mode, times `spec.scale`) to
/// every plane-wave mode of `psi_+` and `psi_-`.
pub fn apply_vacuum_seed(
    f: &mut SpinField,
    spec: &SeedSpec,
    dispersion: Option<&Dispersion>,
) -> Result<()> {
    if spec.mode == SeedMode::None {
        return Ok(());
    }
    let grid = f.grid;
    let (kx, kz) = (grid.kx(), grid.kz());
    let variance = 0.5 * spec.scale;
    let mut rng_plus = CounterRng::new(spec.rng_seed, stream::VACUUM_PLUS);
    let mut rng_minus = CounterRng::new(spec.rng_seed, stream::VACUUM_MINUS);
    let mut a_plus = grid.zeros();
    let mut a_minus = grid.zeros();
    let keep = |i: usize, j: usize| match spec.k_cut {
        Some(kc) => kx[i] * kx[i] + kz[j] * kz[j] <= kc * kc,
        None => true,
    };
    let bogoliubov = match (spec.basis, dispersion) {
        (SeedBasis::Bogoliubov { q_hz }, Some(d)) => Some((q_hz, d)),
        (SeedBasis::Bogoliubov { .. }, None) => {
            return Err(Error::param(
                "basis",
                "Bogoliubov seeding needs the spin dispersion",
            ))
        }
        (SeedBasis::PlaneWave, _) => None,
    };
    for i in 0..grid.nx {
        let mx = signed_index(i, grid.nx);
        for j in 0..grid.nz {
            if !keep(i, j) {
                continue;
            }
            let mz = signed_index(j, grid.nz);
            let beta_plus = rng_plus.complex_normal(mode_key(mx, mz), variance);
            match bogoliubov {
                None => {
                    a_plus[[i, j]] = beta_plus;
                    a_minus[[i, j]] = rng_minus.complex_normal(mode_key(mx, mz), variance);
                }
                Some((q, d)) => {
                    // pair psi_+(k) with psi_-(-k)
                    let beta_minus = rng_minus.complex_normal(mode_key(-mx, -mz), variance);
                    let k = (kx[i] * kx[i] + kz[j] * kz[j]).sqrt();
                    let (u, v) = match bogoliubov_uv(d, k, q) {
                        Ok(m) => (m.u, m.v),
                        Err(_) => (1.0, 0.0),
                    };
                    a_plus[[i, j]] = beta_plus * u - beta_minus.conj() * v;
                }
            }
        }
    }
    if let Some((q, d)) = bogoliubov {
        // a_-(-k) = u beta_-(-k) - v beta_+(k)^*, filled at index of -k
        for i in 0..grid.nx {
            let mx = signed_index(i, grid.nx);
            for j in 0..grid.nz {
                if !keep(i, j) {
                    continue;
                }
                let mz = signed_index(j, grid.nz);
                let beta_minus = rng_minus.complex_normal(mode_key(mx, mz), variance);
                let beta_plus = rng_plus.complex_normal(mode_key(-mx, -mz), variance);
                let k = (kx[i] * kx[i] + kz[j] * kz[j]).sqrt();
                let (u, v) = match bogoliubov_uv(d, k, q) {
                    Ok(m) => (m.u, m.v),
                    Err(_) => (1.0, 0.0),
                };
                a_minus[[i, j]] = beta_minus * u - beta_plus.conj() * v;
            }
        }
    }
    let mut fft = Fft2::new(grid.nx, grid.nz);
    let norm = grid.area().sqrt().recip();
    for (a, target) in [(a_plus, 0usize), (a_minus, 2usize)] {
        let mut a = a;
        fft.inverse(&mut a);
        Zip::from(&mut f.psi[target])
            .and(&a)
            .for_each(|p, s| *p += s * norm);
    }
    Ok(())
}

/// Random-phase population of `psi_+-` following the `psi_0` density
/// profile, independent at each grid point. The ensemble mean adds `n_pm/2`
/// atoms to each sideband.
pub fn apply_thermal_seed(f: &mut SpinField, spec: &SeedSpec) -> Result<()> {
    let SeedMode::Thermal { n_pm } = spec.mode else {
        return Ok(());
    };
    if n_pm == 0.0 {
        return Ok(());
    }
    let (_, n0, _) = f.zeeman_population();
    if !(n0 > 0.0) {
        return Err(Error::Domain("thermal seeding needs a populated m = 0 component".into()));
    }
    let fraction = 0.5 * n_pm * spec.scale / n0;
    let nz = f.grid.nz as u64;
    let mut rng_plus = CounterRng::new(spec.rng_seed, stream::THERMAL_PLUS);
    let mut rng_minus = CounterRng::new(spec.rng_seed, stream::THERMAL_MINUS);
    let weights = f.psi[1].mapv(|v| v.norm_sqr() * fraction);
    for ((i, j), w) in weights.indexed_iter() {
        let counter = i as u64 * nz + j as u64;
        f.psi[0][[i, j]] += rng_plus.complex_normal(counter, *w);
        f.psi[2][[i, j]] += rng_minus.complex_normal(counter, *w);
    }
    Ok(())
}

fn apply_single_mode(f: &mut SpinField, k: f64, amplitude: f64) {
    let grid = f.grid;
    let dk = 2.0 * std::f64::consts::PI / grid.lz();
    let k_grid = (k / dk).round() * dk;
    let peak = f.psi[1].iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 || amplitude == 0.0 {
        return;
    }
    let profile = f.psi[1].mapv(|v| v.norm() / peak);
    for ((i, j), w) in profile.indexed_iter() {
        let s = Complex64::new(amplitude * w * (k_grid * grid.z(j)).cos(), 0.0);
        f.psi[0][[i, j]] += s;
        f.psi[2][[i, j]] += s;
    }
}

/// Grid wavevector actually used by a single-mode seed requested at `k`.
pub fn single_mode_wavevector(grid: &Grid2D, k: f64) -> f64 {
    let dk = 2.0 * std::f64::consts::PI / grid.lz();
    (k / dk).round() * dk
}
