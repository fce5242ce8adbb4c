//! Bogoliubov spectrum of spin excitations atop the paramagnetic state.
//!
//! For a uniform condensate the two transverse spin polarizations obey
//! `E_s^2(k) = (eps_k + q)(eps_k + q - q0)`. Where `E_s^2 < 0` the mode power
//! grows as `exp(t / tau)` with `1 / tau = 2 sqrt(|E_s^2|) / hbar`.
//!
//! All energies are in Hz (E/h) and wavevectors in um^-1. Negative `q` is
//! evaluated literally; nothing here models the suppression of growth seen
//! experimentally for strongly negative `q`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuenchClass {
    /// `q >= q0`: gapped spin excitations.
    Stable,
    /// `q0/2 <= q < q0`: fastest growth at k = 0.
    Shallow,
    /// `q < q0/2`: fastest growth at a non-zero wavevector, rate `q0/hbar`.
    Deep,
}

impl QuenchClass {
    pub fn as_str(self) -> &'static str {
        match self {
            QuenchClass::Stable => "stable",
            QuenchClass::Shallow => "shallow",
            QuenchClass::Deep => "deep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub k: f64,
    pub epsilon_k: f64,
    pub es_squared: f64,
    /// power growth rate, s^-1
    pub growth_rate: f64,
    /// s, infinite for stable modes
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub q_hz: f64,
    pub q0_hz: f64,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumTable {
    /// Point with the largest growth rate (first one on ties).
    pub fn fastest(&self) -> Option<&SpectrumPoint> {
        self.points.iter().fold(None, |best: Option<&SpectrumPoint>, p| match best {
            Some(b) if b.growth_rate >= p.growth_rate => Some(b),
            _ => Some(p),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k_um_inv,eps_hz,es2_hz2,rate_per_s,tau_ms\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.k,
                p.epsilon_k,
                p.es_squared,
                p.growth_rate,
                p.tau * 1e3
            ));
        }
        out
    }
}

/// Spin-excitation dispersion for a fixed kinetic coefficient and critical
/// energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dispersion {
    /// eps_k = kinetic_hz_um2 * k^2
    pub kinetic_hz_um2: f64,
    pub q0_hz: f64,
}

impl Dispersion {
    pub fn new(kinetic_hz_um2: f64, q0_hz: f64) -> Result<Self> {
        if !(kinetic_hz_um2 > 0.0) {
            return Err(Error::param("kinetic_hz_um2", "must be positive"));
        }
        if !(q0_hz > 0.0) {
            return Err(Error::param("q0_hz", "must be positive"));
        }
        Ok(Self {
            kinetic_hz_um2,
            q0_hz,
        })
    }

    pub fn epsilon(&self, k: f64) -> f64 {
        self.kinetic_hz_um2 * k * k
    }

    /// Inverse of `epsilon` for eps >= 0.
    pub fn wavevector(&self, eps: f64) -> f64 {
        (eps.max(0.0) / self.kinetic_hz_um2).sqrt()
    }

    pub fn dispersion_sq(&self, k: f64, q: f64) -> f64 {
        let e = self.epsilon(k) + q;
        e * (e - self.q0_hz)
    }

    pub fn growth_rate(&self, k: f64, q: f64) -> f64 {
        rate_from_es2(self.dispersion_sq(k, q))
    }

    pub fn point(&self, k: f64, q: f64) -> SpectrumPoint {
        let es_squared = self.dispersion_sq(k, q);
        let growth_rate = rate_from_es2(es_squared);
        SpectrumPoint {
            k,
            epsilon_k: self.epsilon(k),
            es_squared,
            growth_rate,
            tau: if growth_rate > 0.0 {
                growth_rate.recip()
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn classify(&self, q: f64) -> QuenchClass {
        if q >= self.q0_hz {
            QuenchClass::Stable
        } else if q >= 0.5 * self.q0_hz {
            QuenchClass::Shallow
        } else {
            QuenchClass::Deep
        }
    }

    /// Wavevector band `(k_lo, k_hi)` with `E_s^2 < 0`, i.e. `-q < eps_k < q0 - q`.
    pub fn unstable_band(&self, q: f64) -> Option<(f64, f64)> {
        if q >= self.q0_hz {
            return None;
        }
        Some((self.wavevector(-q), self.wavevector(self.q0_hz - q)))
    }

    /// Wavevector of the fastest-growing mode.
    pub fn dominant_wavevector(&self, q: f64) -> Result<f64> {
        match self.classify(q) {
            QuenchClass::Stable => Err(Error::NoUnstableMode {
                q_hz: q,
                q0_hz: self.q0_hz,
            }),
            QuenchClass::Shallow => Ok(0.0),
            QuenchClass::Deep => Ok(self.wavevector(0.5 * self.q0_hz - q)),
        }
    }

    /// Largest growth rate over all k, s^-1.
    pub fn max_growth_rate(&self, q: f64) -> f64 {
        match self.dominant_wavevector(q) {
            Ok(k) => self.growth_rate(k, q),
            Err(_) => 0.0,
        }
    }

    /// Half wavelength of the dominant mode, pi / k*, um. Only defined for
    /// deep quenches.
    pub fn predicted_domain_size(&self, q: f64) -> Result<f64> {
        match self.classify(q) {
            QuenchClass::Deep => Ok(PI / self.dominant_wavevector(q)?),
            other => Err(Error::NotDeepQuench(other.as_str())),
        }
    }

    /// Uniform samples on `[0, k_max]`.
    pub fn table(&self, q: f64, k_max: f64, n_k: usize) -> Result<SpectrumTable> {
        if n_k < 2 {
            return Err(Error::param("n_k", "need at least two samples"));
        }
        if !(k_max > 0.0) {
            return Err(Error::param("k_max", "must be positive"));
        }
        let step = k_max / (n_k - 1) as f64;
        let points = (0..n_k).map(|i| self.point(i as f64 * step, q)).collect();
        Ok(SpectrumTable {
            q_hz: q,
            q0_hz: self.q0_hz,
            points,
        })
    }
}

/// 2 sqrt(|E^2|) / hbar in s^-1 for E^2 < 0 given in Hz^2; zero otherwise.
pub fn rate_from_es2(es2: f64) -> f64 {
    if es2 < 0.0 {
        4.0 * PI * (-es2).sqrt()
    } else {
        0.0
    }
}
