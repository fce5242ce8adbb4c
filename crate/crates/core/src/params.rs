//! Physical constants, experiment configuration and the derived energy and
//! length scales.
//!
//! The quadratic Zeeman critical energy is stored as a positive magnitude,
//! `q0 = 2 |c2| n_eff`, so the paramagnetic phase is stable for `q > q0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Quadratic Zeeman coefficient of the F=1 manifold of 87Rb, Hz/G^2.
pub const RB87_STATIC_COEFF_HZ_PER_G2: f64 = 70.0;

/// Default spin-independent scattering length, (a0 + 2 a2) / 3 for 87Rb
/// with a0 = 101.8 a_B and a2 = 100.4 a_B.
pub const RB87_ABAR_BOHR: f64 = (101.8 + 2.0 * 100.4) / 3.0;

/// Derived critical energy used by default, q0/h in Hz.
pub const DEFAULT_Q0_HZ: f64 = 15.0;

const UM_PER_M: f64 = 1e6;
const UM2_PER_M2: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// kg
    pub atomic_mass: f64,
    /// a2 - a0, metres (signed)
    pub delta_a: f64,
    /// spin-independent scattering length, metres
    pub abar: f64,
    /// m^-3
    pub peak_density_3d: f64,
    /// peak column density along the imaging axis, m^-2
    pub column_density_2d_peak: f64,
    pub atom_number: f64,
    /// |g_F| mu_B, J/T
    pub magnetic_moment: f64,
    /// (omega_x, omega_y, omega_z), rad/s
    pub trap_frequencies: [f64; 3],
}

impl PhysicalParams {
    /// 87Rb in the F=1 manifold at the densities and trap of the reference
    /// experiment.
    pub fn rubidium87() -> Self {
        let peak_density_3d = 2.6e20;
        // Thomas-Fermi column through the peak: (4/3) n r_y with r_y = 1.6 um.
        let column_density_2d_peak = 4.0 / 3.0 * peak_density_3d * 1.6e-6;
        Self {
            atomic_mass: RB87_MASS,
            delta_a: -1.4 * BOHR_RADIUS,
            abar: RB87_ABAR_BOHR * BOHR_RADIUS,
            peak_density_3d,
            column_density_2d_peak,
            atom_number: 2.0e6,
            magnetic_moment: 0.5 * BOHR_MAGNETON,
            trap_frequencies: [2.0 * PI * 39.0, 2.0 * PI * 440.0, 2.0 * PI * 4.2],
        }
    }

    /// Checks hard invariants; soft problems are returned as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [
            ("atomic_mass", self.atomic_mass),
            ("peak_density_3d", self.peak_density_3d),
            ("column_density_2d_peak", self.column_density_2d_peak),
            ("atom_number", self.atom_number),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        if !self.abar.is_finite() || self.abar < 0.0 {
            return Err(Error::param("abar", "must be a finite non-negative length"));
        }
        if self.trap_frequencies.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("trap_frequencies", "must be finite and non-negative"));
        }
        let mut warnings = Vec::new();
        if self.delta_a >= 0.0 {
            warnings.push(format!(
                "delta_a = {:.3} a_B is not negative; the spin interaction is not ferromagnetic",
                self.delta_a / BOHR_RADIUS
            ));
        }
        Ok(warnings)
    }

    /// Kinetic coefficient: eps_k / h = kappa k^2 with k in um^-1.
    pub fn kinetic_hz_um2(&self) -> f64 {
        kinetic_hz_um2(self.atomic_mass)
    }

    /// Spin interaction strength c2 = 4 pi hbar^2 Delta_a / 3m, J m^3.
    pub fn c2(&self) -> f64 {
        4.0 * PI * HBAR * HBAR * self.delta_a / (3.0 * self.atomic_mass)
    }

    /// Spin-independent interaction c0 = 4 pi hbar^2 abar / m, J m^3.
    pub fn c0(&self) -> f64 {
        4.0 * PI * HBAR * HBAR * self.abar / self.atomic_mass
    }
}

/// eps_k / h in Hz per um^-2 for the given mass: hbar / (4 pi m).
pub fn kinetic_hz_um2(mass: f64) -> f64 {
    HBAR / (4.0 * PI * mass) * UM2_PER_M2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeemanConfig {
    /// gauss
    pub static_field: f64,
    /// Rabi frequency Omega, rad/s
    pub rabi_frequency: f64,
    /// microwave detuning delta, rad/s (signed)
    pub microwave_detuning: f64,
    /// Hz/G^2
    pub static_coefficient: f64,
}

impl ZeemanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.static_field < 0.0 {
            return Err(Error::param("static_field", "must be non-negative"));
        }
        if self.rabi_frequency != 0.0 && self.microwave_detuning == 0.0 {
            return Err(Error::param(
                "microwave_detuning",
                "must be non-zero when the microwave drive is on",
            ));
        }
        Ok(())
    }

    /// Total quadratic shift q_B + q_mu, Hz.
    pub fn total_hz(&self) -> Result<f64> {
        self.validate()?;
        let q_mu = if self.rabi_frequency == 0.0 {
            0.0
        } else {
            q_microwave(self.rabi_frequency, self.microwave_detuning)?
        };
        Ok(q_static(self.static_field, self.static_coefficient) + q_mu)
    }
}

impl Default for ZeemanConfig {
    fn default() -> Self {
        Self {
            static_field: 0.0,
            rabi_frequency: 0.0,
            microwave_detuning: 0.0,
            static_coefficient: RB87_STATIC_COEFF_HZ_PER_G2,
        }
    }
}

/// Static-field quadratic Zeeman shift in Hz: coeff * B^2.
pub fn q_static(field_gauss: f64, coeff_hz_per_g2: f64) -> f64 {
    coeff_hz_per_g2 * field_gauss * field_gauss
}

/// Microwave (AC) quadratic Zeeman shift -hbar Omega^2 / (4 delta), in Hz.
pub fn q_microwave(rabi: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 {
        return Err(Error::Domain("microwave detuning must be non-zero".into()));
    }
    Ok(-rabi * rabi / (8.0 * PI * detuning))
}

/// Which density enters q0 = 2 |c2| n_eff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DensityConvention {
    /// The 3D peak density.
    PeakColumn,
    /// Density averaged along the imaging axis through the peak column of a
    /// Thomas-Fermi profile, 4/5 of the peak.
    MeanColumn,
    /// Density chosen so that q0/h equals the given value in Hz.
    UserSupplied { q0_hz: f64 },
}

impl Default for DensityConvention {
    fn default() -> Self {
        DensityConvention::UserSupplied {
            q0_hz: DEFAULT_Q0_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// J m^3, signed
    pub c2: f64,
    /// J, positive magnitude
    pub q0: f64,
    /// m, infinite when Delta_a = 0
    pub spin_healing_length: f64,
    /// hbar / q0, s
    pub tau_max: f64,
    /// density entering q0, m^-3
    pub effective_density: f64,
}

impl DerivedScales {
    pub fn q0_hz(&self) -> f64 {
        self.q0 / PLANCK
    }

    pub fn spin_healing_length_um(&self) -> f64 {
        self.spin_healing_length * UM_PER_M
    }

    pub fn tau_max_ms(&self) -> f64 {
        self.tau_max * 1e3
    }

    /// True for the non-interacting case Delta_a = 0.
    pub fn is_degenerate(&self) -> bool {
        self.q0 == 0.0
    }
}

pub fn derive_scales(p: &PhysicalParams, convention: DensityConvention) -> DerivedScales {
    let c2 = p.c2();
    let effective_density = match convention {
        DensityConvention::PeakColumn => p.peak_density_3d,
        DensityConvention::MeanColumn => 0.8 * p.peak_density_3d,
        DensityConvention::UserSupplied { q0_hz } => {
            if c2 == 0.0 {
                0.0
            } else {
                q0_hz * PLANCK / (2.0 * c2.abs())
            }
        }
    };
    let q0 = 2.0 * c2.abs() * effective_density;
    let spin_healing_length = (8.0 * PI * effective_density * p.delta_a.abs()).sqrt().recip();
    DerivedScales {
        c2,
        q0,
        spin_healing_length,
        tau_max: HBAR / q0,
        effective_density,
    }
}

/// Two-dimensional couplings used by the simulation, in Hz um^2.
///
/// The tight imaging axis is integrated out: the 2D spin coupling is fixed so
/// that `2 |g2| n2d_ref = q0`, and the density coupling keeps the 3D ratio
/// `c0 / |c2| = 3 abar / |Delta_a|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCouplings {
    pub kinetic_hz_um2: f64,
    pub g0_hz_um2: f64,
    pub g2_hz_um2: f64,
    /// Reference column density, um^-2.
    pub n2d_ref_um2: f64,
    pub q0_hz: f64,
}

impl ModelCouplings {
    pub fn new(p: &PhysicalParams, scales: &DerivedScales) -> Self {
        let n2d_ref_um2 = p.column_density_2d_peak / UM2_PER_M2;
        let q0_hz = scales.q0_hz();
        let g2_mag = q0_hz / (2.0 * n2d_ref_um2);
        let g2_hz_um2 = if p.delta_a < 0.0 { -g2_mag } else { g2_mag };
        let g0_hz_um2 = if p.delta_a == 0.0 {
            0.0
        } else {
            g2_mag * 3.0 * p.abar / p.delta_a.abs()
        };
        Self {
            kinetic_hz_um2: p.kinetic_hz_um2(),
            g0_hz_um2,
            g2_hz_um2,
            n2d_ref_um2,
            q0_hz,
        }
    }

    /// Couplings with an explicit q0 and reference density, for synthetic
    /// systems.
    pub fn uniform(kinetic_hz_um2: f64, q0_hz: f64, n2d_ref_um2: f64, g0_over_g2: f64) -> Self {
        let g2_mag = q0_hz / (2.0 * n2d_ref_um2);
        Self {
            kinetic_hz_um2,
            g0_hz_um2: g2_mag * g0_over_g2,
            g2_hz_um2: -g2_mag,
            n2d_ref_um2,
            q0_hz,
        }
    }
}

/// In-plane harmonic trap; the tight imaging axis is integrated out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trap2D {
    /// rad/s
    pub omega_x: f64,
    /// rad/s
    pub omega_z: f64,
    /// kg
    pub mass: f64,
}

impl Trap2D {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self {
            omega_x: p.trap_frequencies[0],
            omega_z: p.trap_frequencies[2],
            mass: p.atomic_mass,
        }
    }

    /// Curvatures `(c_x, c_z)` in Hz/um^2 with `V/h = c_x x^2 + c_z z^2`.
    pub fn curvatures_hz_um2(&self) -> (f64, f64) {
        let c = |w: f64| self.mass * w * w / (2.0 * PLANCK) / UM2_PER_M2;
        (c(self.omega_x), c(self.omega_z))
    }

    /// V/h in Hz at `(x, z)` in um.
    pub fn potential_hz(&self, x: f64, z: f64) -> f64 {
        let (cx, cz) = self.curvatures_hz_um2();
        cx * x * x + cz * z * z
    }
}
