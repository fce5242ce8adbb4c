use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use spinquench_core::analysis::{self, pair_growth_rate, Region};
use spinquench_core::dynamics::{EvolutionConfig, Integrator, QuenchProtocol, Terms};
use spinquench_core::fft::Fft2;
use spinquench_core::field::{Grid2D, SpinField};
use spinquench_core::params::{kinetic_hz_um2, ModelCouplings, RB87_MASS};
use spinquench_core::seed::{apply_seed, ground_state, GroundStateMethod, SeedMode, SeedSpec};
use spinquench_core::spectrum::Dispersion;

const Q0: f64 = 15.0;
const DENSITY: f64 = 444.0;

fn couplings() -> ModelCouplings {
    ModelCouplings::uniform(kinetic_hz_um2(RB87_MASS), Q0, DENSITY, 216.0)
}

fn uniform(grid: Grid2D) -> SpinField {
    ground_state(&couplings(), grid, None, DENSITY * grid.area(), GroundStateMethod::ThomasFermi).unwrap()
}

fn seeded(grid: Grid2D, seed: u64) -> SpinField {
    let mut f = uniform(grid);
    let spec = SeedSpec {
        k_cut: Some(1.0),
        ..SeedSpec::vacuum(seed)
    };
    apply_seed(&mut f, &spec, None).unwrap();
    f
}

fn no_maps(dt: f64, times: Vec<f64>) -> EvolutionConfig {
    EvolutionConfig {
        store_maps: false,
        ..EvolutionConfig::new(dt, times)
    }
}

#[test]
fn free_particle_plane_wave_phase() {
    let g = Grid2D::new(4, 32, 0.5, 0.5).unwrap();
    let (mx, mz) = (1usize, 3usize);
    let kx = 2.0 * PI * mx as f64 / g.lx();
    let kz = 2.0 * PI * mz as f64 / g.lz();
    let wave = Array2::from_shape_fn(g.shape(), |(i, j)| Complex64::from_polar(1.0, kx * g.x(i) + kz * g.z(j)));
    let mut f = SpinField::polar(g, wave.clone()).unwrap();
    let terms = Terms {
        kinetic: true,
        trap: false,
        quadratic_zeeman: false,
        c0_density: false,
        c2_spin: false,
    };
    let c = couplings();
    let mut it = Integrator::new(g, c, None, terms);
    let dt = 0.37;
    it.step(&mut f, dt, 3.0);
    let eps = c.kinetic_hz_um2 * (kx * kx + kz * kz);
    let phase = Complex64::from_polar(1.0, -2.0 * PI * eps * dt * 1e-3);
    for (a, b) in f.zero().iter().zip(wave.iter()) {
        assert!((a - b * phase).norm() < 1e-12);
    }
    // kinetic energy of the plane wave is eps_k N
    let e = it.energy(&f, 0.0);
    assert!((e.kinetic - eps * f.atom_number()).abs() < 1e-10 * e.kinetic);
}

#[test]
fn uniform_polar_energy_is_density_term_only() {
    let g = Grid2D::new(4, 16, 0.5, 0.5).unwrap();
    let f = uniform(g);
    let c = couplings();
    let mut it = Integrator::new(g, c, None, Terms::default());
    let e = it.energy(&f, 7.0);
    let n = f.atom_number();
    assert!((e.total() - 0.5 * c.g0_hz_um2 * DENSITY * n).abs() < 1e-9 * e.total());
    assert!(e.kinetic.abs() < 1e-9 * e.total());
    assert_eq!((e.trap, e.zeeman, e.spin), (0.0, 0.0, 0.0));
}

#[test]
fn no_spin_mixing_conserves_each_component() {
    let g = Grid2D::new(8, 64, 0.5, 0.5).unwrap();
    let mut f = seeded(g, 3);
    let terms = Terms {
        c2_spin: false,
        ..Terms::default()
    };
    let mut it = Integrator::new(g, couplings(), None, terms);
    let mut prev = f.zeeman_population();
    for _ in 0..200 {
        it.step(&mut f, 0.01, 0.0);
        let now = f.zeeman_population();
        for (a, b) in [(prev.0, now.0), (prev.1, now.1), (prev.2, now.2)] {
            assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
        }
        prev = now;
    }
}

#[test]
fn norm_conserved_per_step() {
    let g = Grid2D::new(8, 64, 0.5, 0.5).unwrap();
    let mut f = seeded(g, 4);
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let mut n = f.atom_number();
    for _ in 0..500 {
        it.step(&mut f, 0.01, 2.0);
        let m = f.atom_number();
        assert!(((m - n) / n).abs() < 1e-8);
        n = m;
    }
}

#[test]
fn zero_duration_returns_initial_state() {
    let g = Grid2D::new(4, 16, 0.5, 0.5).unwrap();
    let f0 = seeded(g, 1);
    let mut f = f0.clone();
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let rec = it
        .evolve(&mut f, &QuenchProtocol::sudden(2.0, 0.0), &EvolutionConfig::new(0.01, vec![0.0]), |_, _| {})
        .unwrap();
    assert_eq!(f, f0);
    assert_eq!(rec.times, vec![0.0]);
    assert_eq!(rec.maps.len(), 1);
}

#[test]
fn record_beyond_protocol_is_rejected() {
    let g = Grid2D::new(4, 16, 0.5, 0.5).unwrap();
    let mut f = seeded(g, 1);
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let r = it.evolve(&mut f, &QuenchProtocol::sudden(2.0, 1.0), &EvolutionConfig::new(0.01, vec![2.0]), |_, _| {});
    assert!(r.is_err());
}

#[test]
fn energy_conserved_at_fixed_q() {
    // stable q with a seeded, trapped-free system over 100 ms
    let g = Grid2D::new(8, 64, 0.5, 0.5).unwrap();
    let mut f = seeded(g, 5);
    let q = 20.0;
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let e0 = it.total_energy(&f, q);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        it.evolve(&mut f, &QuenchProtocol::sudden(q, 10.0), &no_maps(0.01, vec![]), |_, _| {})
            .unwrap();
        let e = it.total_energy(&f, q);
        worst = worst.max(((e - e0) / e0).abs());
    }
    assert!(worst < 1e-6, "relative energy drift {worst}");
}

#[test]
fn fused_evolution_matches_individual_steps() {
    let g = Grid2D::new(4, 32, 0.5, 0.5).unwrap();
    let mut a = seeded(g, 8);
    let mut b = a.clone();
    let protocol = QuenchProtocol {
        q_initial: 30.0,
        q_final: 2.0,
        ramp_ms: 0.5,
        hold_ms: 0.5,
        shape: spinquench_core::dynamics::RampShape::LinearQ,
    };
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    it.evolve(&mut a, &protocol, &no_maps(0.01, vec![0.3]), |_, _| {}).unwrap();
    for s in 0..100 {
        let q = protocol.q_at((s as f64 + 0.5) * 0.01);
        it.step(&mut b, 0.01, q);
    }
    for (x, y) in a.psi.iter().zip(b.psi.iter()) {
        for (u, v) in x.iter().zip(y.iter()) {
            assert!((u - v).norm() < 1e-9 * (1.0 + v.norm()));
        }
    }
}

/// Sideband power growth of a single seeded mode pair in the linear regime.
fn measured_pair_rate(dt: f64) -> (f64, f64) {
    let d = Dispersion::new(kinetic_hz_um2(RB87_MASS), Q0).unwrap();
    let k = d.wavevector(Q0 / 4.0);
    let nz = 256;
    let lz = 8.0 * 2.0 * PI / k;
    let g = Grid2D::new(1, nz, 1.0, lz / nz as f64).unwrap();
    let mut f = uniform(g);
    let amp = 1e-4 * DENSITY.sqrt();
    apply_seed(
        &mut f,
        &SeedSpec {
            mode: SeedMode::SingleMode { k, amplitude: amp },
            ..SeedSpec::vacuum(0)
        },
        None,
    )
    .unwrap();
    let predicted = d.growth_rate(k, 0.0);
    let tau_ms = 1e3 / predicted;
    let times: Vec<f64> = (0..=60).map(|i| i as f64 * 3.0 * tau_ms / 60.0).collect();
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let mut power = Vec::new();
    let mut fft = Fft2::new(1, nz);
    it.evolve(&mut f, &QuenchProtocol::sudden(0.0, times[60]), &no_maps(dt, times.clone()), |_, field| {
        let mut s = field.plus().clone();
        fft.forward(&mut s);
        power.push(s[[0, 8]].norm_sqr() + s[[0, nz - 8]].norm_sqr());
    })
    .unwrap();
    let t_s: Vec<f64> = times.iter().map(|t| t * 1e-3).collect();
    let rate = pair_growth_rate(&t_s, &power, 0.2 * predicted, 5.0 * predicted).unwrap();
    (rate, predicted)
}

#[test]
fn linear_regime_growth_rate_matches_dispersion() {
    let (rate, predicted) = measured_pair_rate(0.01);
    assert!(((rate - predicted) / predicted).abs() < 0.05, "measured {rate} vs {predicted}");
}

#[test]
fn gauge_and_larmor_covariance() {
    let g = Grid2D::new(4, 64, 0.5, 0.5).unwrap();
    let base = seeded(g, 21);
    let protocol = QuenchProtocol::sudden(2.0, 20.0);
    let cfg = EvolutionConfig::new(0.02, vec![20.0]);
    let run = |f: &SpinField| {
        let mut f = f.clone();
        let mut it = Integrator::new(g, couplings(), None, Terms::default());
        it.evolve(&mut f, &protocol, &cfg, |_, _| {}).unwrap().maps.remove(0)
    };
    let reference = run(&base);
    let scale = reference.f_perp.iter().fold(0.0_f64, |m, v| m.max(v.norm()));

    let mut phased = base.clone();
    phased.global_phase(1.1);
    let m = run(&phased);
    for (a, b) in m.f_perp.iter().zip(reference.f_perp.iter()) {
        assert!((a - b).norm() < 1e-8 * scale);
    }
    for (a, b) in m.density.iter().zip(reference.density.iter()) {
        assert!((a - b).abs() < 1e-8 * b);
    }

    let phi = 0.7;
    let mut rotated = base.clone();
    rotated.rotate_z(phi);
    let m = run(&rotated);
    let u = Complex64::from_polar(1.0, phi);
    for (a, b) in m.f_perp.iter().zip(reference.f_perp.iter()) {
        assert!((a - b * u).norm() < 1e-8 * scale);
    }
    for (a, b) in m.fz.iter().zip(reference.fz.iter()) {
        assert!((a - b).abs() < 1e-8 * scale);
    }
}

#[test]
fn stable_quench_stays_near_seed_level() {
    let g = Grid2D::new(8, 128, 0.5, 0.5).unwrap();
    let mut f = seeded(g, 2);
    let region = Region::full(&g);
    let g_seed = analysis::g0(&f.observables(), &region).unwrap();
    let mut it = Integrator::new(g, couplings(), None, Terms::default());
    let times: Vec<f64> = (1..=15).map(|i| i as f64 * 10.0).collect();
    let mut worst: f64 = 0.0;
    it.evolve(&mut f, &QuenchProtocol::sudden(16.0, 150.0), &no_maps(0.02, times), |_, field| {
        let g0 = analysis::g0(&field.observables(), &region).unwrap();
        worst = worst.max(g0 / g_seed);
    })
    .unwrap();
    assert!(worst < 10.0, "G(0) grew by {worst}");
}
