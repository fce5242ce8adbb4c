//! Symmetric split-step evolution of the spin-1 mean-field equations.
//!
//! One step of length `dt` is `K(dt/2) L(dt) K(dt/2)` where `K` is the exact
//! kinetic propagator in wavevector space and `L` the local propagator. `L`
//! is itself split as `D(dt/2) S(dt) D(dt/2)`: `D` holds the diagonal terms
//! (trap, `q F_z^2`, `g0 n`) and `S = exp(-i g2 F.f dt)` is the spin-mixing
//! rotation about the local spin vector, which `S` leaves unchanged and can
//! therefore be exponentiated in closed form. Every factor is unitary.
//!
//! The linear Zeeman term is dropped (rotating frame). Energies are in Hz and
//! times in ms; phases are `2 pi E t`.

use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{Grid2D, ObservableMaps, SpinField};
use crate::params::{ModelCouplings, Trap2D};

/// Shape of `q(t)` during the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RampShape {
    LinearQ,
    /// The static field is ramped linearly while a constant microwave shift
    /// `q_offset_hz` is present, so `q - q_offset` is quadratic in time.
    /// Both endpoints need `q >= q_offset`.
    LinearB { q_offset_hz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub q_initial: f64,
    pub q_final: f64,
    pub ramp_ms: f64,
    pub hold_ms: f64,
    pub shape: RampShape,
}

impl QuenchProtocol {
    /// Instantaneous jump to `q_final`, held for `hold_ms`.
    pub fn sudden(q_final: f64, hold_ms: f64) -> Self {
        Self {
            q_initial: q_final,
            q_final,
            ramp_ms: 0.0,
            hold_ms,
            shape: RampShape::LinearQ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_ms >= 0.0) {
            return Err(Error::param("ramp_ms", "must be >= 0"));
        }
        if !(self.hold_ms >= 0.0) {
            return Err(Error::param("hold_ms", "must be >= 0"));
        }
        if !self.q_initial.is_finite() || !self.q_final.is_finite() {
            return Err(Error::param("q", "must be finite"));
        }
        if let RampShape::LinearB { q_offset_hz } = self.shape {
            if self.q_initial < q_offset_hz || self.q_final < q_offset_hz {
                return Err(Error::param(
                    "q_offset_hz",
                    "a field ramp cannot take q below the microwave offset",
                ));
            }
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> f64 {
        self.ramp_ms + self.hold_ms
    }

    /// `q(t)` in Hz with `t` in ms from the start of the ramp.
    pub fn q_at(&self, t_ms: f64) -> f64 {
        if t_ms >= self.ramp_ms {
            return self.q_final;
        }
        let s = (t_ms / self.ramp_ms).clamp(0.0, 1.0);
        match self.shape {
            RampShape::LinearQ => self.q_initial + (self.q_final - self.q_initial) * s,
            RampShape::LinearB { q_offset_hz } => {
                let bi = (self.q_initial - q_offset_hz).sqrt();
                let bf = (self.q_final - q_offset_hz).sqrt();
                let b = bi + (bf - bi) * s;
                q_offset_hz + b * b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub kinetic: bool,
    pub trap: bool,
    pub quadratic_zeeman: bool,
    pub c0_density: bool,
    pub c2_spin: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Self {
            kinetic: true,
            trap: true,
            quadratic_zeeman: true,
            c0_density: true,
            c2_spin: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt_ms: f64,
    /// ms from the start of the ramp, ascending; snapped to the step grid
    pub record_times: Vec<f64>,
    pub terms: Terms,
    /// Use the initial total density in the `g0 n` term instead of the
    /// instantaneous one.
    pub frozen_density: bool,
    /// Keep observable maps for every record time.
    pub store_maps: bool,
}

impl EvolutionConfig {
    pub fn new(dt_ms: f64, record_times: Vec<f64>) -> Self {
        Self {
            dt_ms,
            record_times,
            terms: Terms::default(),
            frozen_density: false,
            store_maps: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ms > 0.0 && self.dt_ms.is_finite()) {
            return Err(Error::param("dt_ms", "must be positive"));
        }
        if self.record_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::param("record_ms", "record times must be >= 0"));
        }
        if self.record_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("record_ms", "record times must be ascending"));
        }
        Ok(())
    }

    /// Conservative step `0.1 min(hbar/eps_kmax, hbar/q0)` in ms for the
    /// given grid.
    pub fn recommended_dt_ms(grid: &Grid2D, c: &ModelCouplings) -> f64 {
        let kx = PI / grid.dx;
        let kz = PI / grid.dz;
        let eps_max = c.kinetic_hz_um2 * (kx * kx + kz * kz);
        let e = eps_max.max(c.q0_hz);
        0.1 / (2.0 * PI * e) * 1e3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `(N_+, N_0, N_-)` per record time
    pub populations: Vec<(f64, f64, f64)>,
    /// present when `store_maps` is set
    pub maps: Vec<ObservableMaps>,
}

/// Energy contributions in Hz (E/h), summed over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub trap: f64,
    pub zeeman: f64,
    pub density: f64,
    pub spin: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.trap + self.zeeman + self.density + self.spin
    }
}

pub struct Integrator {
    grid: Grid2D,
    couplings: ModelCouplings,
    terms: Terms,
    /// eps_k in Hz, FFT order
    eps: Array2<f64>,
    potential: Option<Array2<f64>>,
    frozen: Option<Array2<f64>>,
    fft: Fft2,
    /// cached `(dt, half, full)` kinetic factors with the 1/n of the inverse
    /// transform folded in
    kin_cache: Option<(f64, Array2<Complex64>, Array2<Complex64>)>,
}

impl Integrator {
    pub fn new(grid: Grid2D, couplings: ModelCouplings, trap: Option<&Trap2D>, terms: Terms) -> Self {
        let (kx, kz) = (grid.kx(), grid.kz());
        let eps = Array2::from_shape_fn(grid.shape(), |(i, j)| {
            couplings.kinetic_hz_um2 * (kx[i] * kx[i] + kz[j] * kz[j])
        });
        let potential = trap.map(|t| {
            Array2::from_shape_fn(grid.shape(), |(i, j)| t.potential_hz(grid.x(i), grid.z(j)))
        });
        Self {
            grid,
            couplings,
            terms,
            eps,
            potential,
            frozen: None,
            fft: Fft2::new(grid.nx, grid.nz),
            kin_cache: None,
        }
    }

    /// Fixes the density used by the `g0 n` term.
    pub fn freeze_density(&mut self, density: Array2<f64>) {
        self.frozen = Some(density);
    }

    pub fn thaw_density(&mut self) {
        self.frozen = None;
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    fn kinetic_factors(&mut self, dt_ms: f64) -> (&Array2<Complex64>, &Array2<Complex64>) {
        let stale = !matches!(&self.kin_cache, Some((d, _, _)) if *d == dt_ms);
        if stale {
            let inv_n = 1.0 / self.grid.len() as f64;
            let on = self.terms.kinetic;
            let make = |frac: f64| {
                self.eps.mapv(|e| {
                    let phase = if on { -2.0 * PI * e * dt_ms * 1e-3 * frac } else { 0.0 };
                    Complex64::from_polar(inv_n, phase)
                })
            };
            self.kin_cache = Some((dt_ms, make(0.5), make(1.0)));
        }
        let (_, half, full) = self.kin_cache.as_ref().expect("cache filled above");
        (half, full)
    }

    fn kinetic(&mut self, f: &mut SpinField, dt_ms: f64, half: bool) {
        let factor = {
            let (h, full) = self.kinetic_factors(dt_ms);
            if half { h.clone() } else { full.clone() }
        };
        self.kinetic_with(f, &factor);
    }

    fn kinetic_with(&mut self, f: &mut SpinField, factor: &Array2<Complex64>) {
        for c in &mut f.psi {
            self.fft.forward(c);
            Zip::from(&mut *c).and(factor).for_each(|v, k| *v *= *k);
            self.fft.inverse(c);
        }
    }

    /// Local propagator over `dt_ms` at quadratic Zeeman shift `q`.
    fn local(&self, f: &mut SpinField, dt_ms: f64, q: f64) {
        let theta = 2.0 * PI * dt_ms * 1e-3;
        let t = self.terms;
        let g0 = if t.c0_density { self.couplings.g0_hz_um2 } else { 0.0 };
        let g2 = if t.c2_spin { self.couplings.g2_hz_um2 } else { 0.0 };
        let q = if t.quadratic_zeeman { q } else { 0.0 };
        let pot = if t.trap { self.potential.as_ref() } else { None };
        let frozen = self.frozen.as_ref();
        let (nx, nz) = self.grid.shape();
        let [p, z, m] = &mut f.psi;
        let (ps, zs, ms) = (
            p.as_slice_mut().expect("standard layout"),
            z.as_slice_mut().expect("standard layout"),
            m.as_slice_mut().expect("standard layout"),
        );
        let pot = pot.map(|a| a.as_slice().expect("standard layout"));
        let frozen = frozen.map(|a| a.as_slice().expect("standard layout"));
        let zeeman_half = Complex64::from_polar(1.0, -0.5 * theta * q);
        for idx in 0..nx * nz {
            let (mut a, mut b, mut c) = (ps[idx], zs[idx], ms[idx]);
            let n_now = a.norm_sqr() + b.norm_sqr() + c.norm_sqr();
            let n_int = frozen.map_or(n_now, |fr| fr[idx]);
            let common = pot.map_or(0.0, |v| v[idx]) + g0 * n_int;
            // the common phase commutes with everything local: apply it once
            let u0 = Complex64::from_polar(1.0, -theta * common);
            if q != 0.0 {
                a *= zeeman_half;
                c *= zeeman_half;
            }
            if g2 != 0.0 {
                (a, b, c) = spin_rotation(a, b, c, g2 * theta);
            }
            if q != 0.0 {
                a *= zeeman_half;
                c *= zeeman_half;
            }
            ps[idx] = a * u0;
            zs[idx] = b * u0;
            ms[idx] = c * u0;
        }
    }

    /// One full Strang step.
    pub fn step(&mut self, f: &mut SpinField, dt_ms: f64, q: f64) {
        self.kinetic(f, dt_ms, true);
        self.local(f, dt_ms, q);
        self.kinetic(f, dt_ms, true);
    }

    /// Integrates `f` through `protocol`. `recorder` is called at each record
    /// time with the snapped time and the current field.
    pub fn evolve(
        &mut self,
        f: &mut SpinField,
        protocol: &QuenchProtocol,
        cfg: &EvolutionConfig,
        mut recorder: impl FnMut(f64, &SpinField),
    ) -> Result<TrajectoryRecord> {
        protocol.validate()?;
        cfg.validate()?;
        if f.grid != self.grid {
            return Err(Error::GridMismatch("field and integrator grids differ".into()));
        }
        if cfg.frozen_density {
            self.freeze_density(f.density());
        } else {
            self.thaw_density();
        }
        let dt = cfg.dt_ms;
        let total_steps = (protocol.duration_ms() / dt).round() as usize;
        let mut stops: Vec<(usize, f64)> = cfg
            .record_times
            .iter()
            .map(|t| ((t / dt).round() as usize, *t))
            .collect();
        if let Some(&(last, _)) = stops.last() {
            if last > total_steps {
                return Err(Error::param(
                    "record_ms",
                    format!(
                        "record time {} ms is beyond the protocol duration {} ms",
                        stops.last().map_or(0.0, |s| s.1),
                        protocol.duration_ms()
                    ),
                ));
            }
        }
        stops.push((total_steps, protocol.duration_ms()));

        let (half, full) = {
            let (h, fl) = self.kinetic_factors(dt);
            (h.clone(), fl.clone())
        };
        let mut record = TrajectoryRecord {
            times: Vec::with_capacity(cfg.record_times.len()),
            populations: Vec::with_capacity(cfg.record_times.len()),
            maps: Vec::new(),
        };
        let mut step = 0usize;
        for (k, &(target, t_req)) in stops.iter().enumerate() {
            if target > step {
                self.kinetic_with(f, &half);
                while step < target {
                    let t_mid = (step as f64 + 0.5) * dt;
                    self.local(f, dt, protocol.q_at(t_mid));
                    step += 1;
                    if step < target {
                        self.kinetic_with(f, &full);
                    }
                    if step % 64 == 0 || step == target {
                        check_finite(f, step, step as f64 * dt)?;
                    }
                }
                self.kinetic_with(f, &half);
            }
            if k < cfg.record_times.len() {
                recorder(t_req, f);
                record.times.push(t_req);
                record.populations.push(f.zeeman_population());
                if cfg.store_maps {
                    record.maps.push(f.observables());
                }
            }
        }
        Ok(record)
    }

    /// Energy functional at quadratic Zeeman shift `q`, with the enabled
    /// terms. In frozen-density mode the density term is `g0 n_frozen n`.
    pub fn energy(&mut self, f: &SpinField, q: f64) -> EnergyBreakdown {
        let t = self.terms;
        let da = self.grid.cell_area();
        let inv_n = 1.0 / self.grid.len() as f64;
        let mut kinetic = 0.0;
        if t.kinetic {
            for c in &f.psi {
                let mut s = c.clone();
                self.fft.forward(&mut s);
                kinetic += Zip::from(&s)
                    .and(&self.eps)
                    .fold(0.0, |acc, v, e| acc + e * v.norm_sqr());
            }
            kinetic *= da * inv_n;
        }
        let g0 = self.couplings.g0_hz_um2;
        let g2 = self.couplings.g2_hz_um2;
        let (mut trap, mut zeeman, mut density, mut spin) = (0.0, 0.0, 0.0, 0.0);
        let rest = f.psi[1].iter().zip(f.psi[2].iter());
        for ((idx, &a), (&b, &c)) in f.psi[0].indexed_iter().zip(rest) {
            let (np, nm) = (a.norm_sqr(), c.norm_sqr());
            let n = np + b.norm_sqr() + nm;
            if t.trap {
                if let Some(v) = &self.potential {
                    trap += v[idx] * n;
                }
            }
            if t.quadratic_zeeman {
                zeeman += q * (np + nm);
            }
            if t.c0_density {
                density += match &self.frozen {
                    Some(fr) => g0 * fr[idx] * n,
                    None => 0.5 * g0 * n * n,
                };
            }
            if t.c2_spin {
                let fz = np - nm;
                let fp = (a.conj() * b + b.conj() * c) * SQRT_2;
                spin += 0.5 * g2 * (fz * fz + fp.norm_sqr());
            }
        }
        EnergyBreakdown {
            kinetic,
            trap: trap * da,
            zeeman: zeeman * da,
            density: density * da,
            spin: spin * da,
        }
    }

    pub fn total_energy(&mut self, f: &SpinField, q: f64) -> f64 {
        self.energy(f, q).total()
    }
}

/// `exp(-i phi F.f)` applied to `(psi_+, psi_0, psi_-)`, where `F` is the
/// spin vector of the same spinor. For spin 1, `(n.f)^3 = n.f`, so
/// `exp(-i u n.f) = 1 - i sin(u) n.f + (cos(u) - 1) (n.f)^2`.
fn spin_rotation(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    phi: f64,
) -> (Complex64, Complex64, Complex64) {
    let fz = a.norm_sqr() - c.norm_sqr();
    let fp = (a.conj() * b + b.conj() * c) * SQRT_2;
    let mag = (fz * fz + fp.norm_sqr()).sqrt();
    if mag == 0.0 {
        return (a, b, c);
    }
    let (nz, np) = (fz / mag, fp / mag);
    let nm = np.conj();
    let apply = |a: Complex64, b: Complex64, c: Complex64| {
        (
            a * nz + nm * b / SQRT_2,
            (nm * c + np * a) / SQRT_2,
            -c * nz + np * b / SQRT_2,
        )
    };
    let (a1, b1, c1) = apply(a, b, c);
    let (a2, b2, c2) = apply(a1, b1, c1);
    let u = phi * mag;
    let s = Complex64::new(0.0, -u.sin());
    let cm = u.cos() - 1.0;
    (a + s * a1 + a2 * cm, b + s * b1 + b2 * cm, c + s * c1 + c2 * cm)
}

fn check_finite(f: &SpinField, step: usize, t_ms: f64) -> Result<()> {
    for (component, c) in f.psi.iter().enumerate() {
        if let Some((index, _)) = c
            .indexed_iter()
            .find(|(_, v)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NumericalAbort {
                t_ms,
                step,
                component,
                index,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spinor() -> (Complex64, Complex64, Complex64) {
        (
            Complex64::new(0.3, -0.2),
            Complex64::new(0.8, 0.1),
            Complex64::new(-0.25, 0.4),
        )
    }

    fn matrices() -> [[[Complex64; 3]; 3]; 3] {
        let z = Complex64::new(0.0, 0.0);
        let r = Complex64::new(1.0 / SQRT_2, 0.0);
        let i = Complex64::new(0.0, 1.0 / SQRT_2);
        let o = Complex64::new(1.0, 0.0);
        [
            [[z, r, z], [r, z, r], [z, r, z]],
            [[z, -i, z], [i, z, -i], [z, i, z]],
            [[o, z, z], [z, z, z], [z, z, -o]],
        ]
    }

    fn mat_vec(m: &[[Complex64; 3]; 3], v: [Complex64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r] += m[r][c] * v[c];
            }
        }
        out
    }

    #[test]
    fn spin_rotation_matches_taylor_series_of_dense_generator() {
        let (a, b, c) = spinor();
        let v = [a, b, c];
        let f = matrices();
        let spin: Vec<f64> = f
            .iter()
            .map(|m| {
                let mv = mat_vec(m, v);
                (0..3).map(|k| (v[k].conj() * mv[k]).re).sum()
            })
            .collect();
        // H = F.f as a dense matrix, exp(-i phi H) by Taylor series
        let mut h = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (s, m) in spin.iter().zip(f.iter()) {
            for r in 0..3 {
                for col in 0..3 {
                    h[r][col] += m[r][col] * *s;
                }
            }
        }
        let phi = 0.37;
        let mut term = v;
        let mut sum = v;
        for n in 1..60 {
            let hv = mat_vec(&h, term);
            for k in 0..3 {
                term[k] = hv[k] * Complex64::new(0.0, -phi) / n as f64;
                sum[k] += term[k];
            }
        }
        let (x, y, z) = spin_rotation(a, b, c, phi);
        assert!((x - sum[0]).norm() < 1e-12);
        assert!((y - sum[1]).norm() < 1e-12);
        assert!((z - sum[2]).norm() < 1e-12);
    }

    #[test]
    fn ramp_shapes() {
        let p = QuenchProtocol {
            q_initial: 20.0,
            q_final: 2.0,
            ramp_ms: 5.0,
            hold_ms: 10.0,
            shape: RampShape::LinearQ,
        };
        assert_eq!(p.q_at(0.0), 20.0);
        assert!((p.q_at(2.5) - 11.0).abs() < 1e-12);
        assert_eq!(p.q_at(7.0), 2.0);
        let b = QuenchProtocol {
            shape: RampShape::LinearB { q_offset_hz: -7.0 },
            ..p
        };
        assert!(b.validate().is_ok());
        // midpoint of sqrt(27)..sqrt(9) squared, minus offset
        let mid = 0.5 * (27.0_f64.sqrt() + 3.0);
        assert!((b.q_at(2.5) - (mid * mid - 7.0)).abs() < 1e-12);
        let bad = QuenchProtocol {
            shape: RampShape::LinearB { q_offset_hz: 5.0 },
            ..p
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::new(0.0, vec![]).validate().is_err());
        assert!(EvolutionConfig::new(0.01, vec![2.0, 1.0]).validate().is_err());
        assert!(EvolutionConfig::new(0.01, vec![1.0, 2.0]).validate().is_ok());
    }

    #[test]
    fn nan_aborts_with_location() {
        let g = Grid2D::new(2, 4, 1.0, 1.0).unwrap();
        let mut f = SpinField::zeros(g);
        f.psi[2][[1, 3]] = Complex64::new(f64::NAN, 0.0);
        match check_finite(&f, 7, 0.07) {
            Err(Error::NumericalAbort { component, index, step, .. }) => {
                assert_eq!((component, index, step), (2, (1, 3), 7));
            }
            other => panic!("{other:?}"),
        }
    }
}
