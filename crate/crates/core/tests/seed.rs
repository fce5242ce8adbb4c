use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use spinquench_core::analysis::{self, Region};
use spinquench_core::fft::Fft2;
use spinquench_core::field::{Grid2D, SpinField};
use spinquench_core::params::{kinetic_hz_um2, ModelCouplings, Trap2D, RB87_MASS};
use spinquench_core::seed::{apply_seed, ground_state, GroundStateMethod, SeedMode, SeedSpec};

fn couplings(density: f64) -> ModelCouplings {
    ModelCouplings::uniform(kinetic_hz_um2(RB87_MASS), 15.0, density, 216.0)
}

/// Mode amplitudes `a_k` with `psi(r) = A^-1/2 sum_k a_k exp(i k r)`.
fn mode_amplitudes(psi: &Array2<Complex64>, grid: Grid2D) -> Array2<Complex64> {
    let mut a = psi.clone();
    Fft2::new(grid.nx, grid.nz).forward(&mut a);
    let s = grid.area().sqrt() / grid.len() as f64;
    a.mapv(|v| v * s)
}

#[test]
fn vacuum_adds_half_a_quantum_per_mode() {
    let g = Grid2D::new(16, 32, 0.5, 0.5).unwrap();
    let mut pops = Vec::new();
    for seed in 0..12 {
        let mut f = SpinField::zeros(g);
        apply_seed(&mut f, &SeedSpec::vacuum(seed), None).unwrap();
        for c in [0, 2] {
            pops.extend(mode_amplitudes(&f.psi[c], g).iter().map(|a| a.norm_sqr()));
        }
    }
    assert!(pops.len() >= 10_000);
    let n = pops.len() as f64;
    let mean = pops.iter().sum::<f64>() / n;
    // |a|^2 is exponential with mean 1/2, so its standard deviation is also 1/2
    let sigma = 0.5 / n.sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");
    let var = pops.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var.sqrt() / 0.5 - 1.0).abs() < 0.05);
}

#[test]
fn vacuum_noise_is_circular() {
    let g = Grid2D::new(16, 32, 0.5, 0.5).unwrap();
    let mut amps = Vec::new();
    for seed in 0..12 {
        let mut f = SpinField::zeros(g);
        apply_seed(&mut f, &SeedSpec::vacuum(seed), None).unwrap();
        amps.extend(mode_amplitudes(f.plus(), g).iter().copied());
    }
    let n = amps.len() as f64;
    let mean: Complex64 = amps.iter().sum::<Complex64>() / n;
    let pseudo: Complex64 = amps.iter().map(|a| a * a).sum::<Complex64>() / n;
    // E[a] = 0 and E[a^2] = 0 for a circular Gaussian
    assert!(mean.norm() < 3.0 * (0.5 / n).sqrt(), "{mean}");
    assert!(pseudo.norm() < 4.0 * (0.5 / n).sqrt(), "{pseudo}");
    // real and imaginary quadratures carry equal variance; each squared
    // quadrature has standard deviation sqrt(2) / 4
    let re = amps.iter().map(|a| a.re * a.re).sum::<f64>() / n;
    let im = amps.iter().map(|a| a.im * a.im).sum::<f64>() / n;
    assert!((re - im).abs() < 4.0 * 0.5 / n.sqrt(), "{re} {im}");
}

#[test]
fn vacuum_seed_leaves_condensate_untouched() {
    let g = Grid2D::new(8, 32, 0.5, 0.5).unwrap();
    let n = 444.0;
    let mut f = ground_state(&couplings(n), g, None, n * g.area(), GroundStateMethod::ThomasFermi).unwrap();
    let zero = f.zero().clone();
    apply_seed(&mut f, &SeedSpec::vacuum(5), None).unwrap();
    assert_eq!(f.zero(), &zero);
    // total added population is half a quantum per mode per sideband
    let (np, _, nm) = f.zeeman_population();
    let modes = g.len() as f64;
    assert!((np + nm) / modes > 0.35 && (np + nm) / modes < 1.65, "{}", (np + nm) / modes);
}

#[test]
fn thermal_seed_populations_and_g0() {
    let g = Grid2D::new(32, 64, 0.5, 0.5).unwrap();
    let n0 = 2e6;
    let density = n0 / g.area();
    let base = ground_state(&couplings(density), g, None, n0, GroundStateMethod::ThomasFermi).unwrap();
    let region = Region::full(&g);
    let reps = 40;
    let (mut sum_p, mut sum_m, mut sum_g) = (0.0, 0.0, 0.0);
    for seed in 0..reps {
        let mut f = base.clone();
        let spec = SeedSpec {
            mode: SeedMode::Thermal { n_pm: 300.0 },
            ..SeedSpec::vacuum(seed)
        };
        apply_seed(&mut f, &spec, None).unwrap();
        let (p, _, m) = f.zeeman_population();
        sum_p += p;
        sum_m += m;
        sum_g += analysis::g0(&f.observables(), &region).unwrap();
    }
    let r = reps as f64;
    assert!((sum_p / r / 150.0 - 1.0).abs() < 0.05, "{}", sum_p / r);
    assert!((sum_m / r / 150.0 - 1.0).abs() < 0.05, "{}", sum_m / r);
    let g_mean = sum_g / r;
    assert!((g_mean / 3e-4 - 1.0).abs() < 0.1, "{g_mean}");
}

#[test]
fn ground_state_atom_number() {
    let g = Grid2D::new(64, 64, 0.75, 0.75).unwrap();
    let c = couplings(555.0);
    let trap = Trap2D {
        omega_x: 2.0 * PI * 39.0,
        omega_z: 2.0 * PI * 39.0,
        mass: RB87_MASS,
    };
    let n = 2e5;
    let relax = GroundStateMethod::ImaginaryTime {
        dtau_ms: 0.01,
        max_iterations: 20_000,
        tolerance: 1e-11,
    };
    for (trap, method) in [
        (None, GroundStateMethod::ThomasFermi),
        (Some(&trap), GroundStateMethod::ThomasFermi),
        (Some(&trap), relax),
    ] {
        let f = ground_state(&c, g, trap, n, method).unwrap();
        assert!((f.atom_number() / n - 1.0).abs() < 1e-10);
        let (p, _, m) = f.zeeman_population();
        assert_eq!((p, m), (0.0, 0.0));
    }
}

#[test]
fn thomas_fermi_matches_relaxed_ground_state_in_the_bulk() {
    let g = Grid2D::new(64, 64, 0.75, 0.75).unwrap();
    let c = couplings(555.0);
    let trap = Trap2D {
        omega_x: 2.0 * PI * 39.0,
        omega_z: 2.0 * PI * 39.0,
        mass: RB87_MASS,
    };
    let n = 2e5;
    let tf = ground_state(&c, g, Some(&trap), n, GroundStateMethod::ThomasFermi).unwrap();
    let relaxed = ground_state(
        &c,
        g,
        Some(&trap),
        n,
        GroundStateMethod::ImaginaryTime {
            dtau_ms: 0.01,
            max_iterations: 20_000,
            tolerance: 1e-11,
        },
    )
    .unwrap();
    let (cx, _) = trap.curvatures_hz_um2();
    let mu = (2.0 * c.g0_hz_um2 * n * cx / PI).sqrt();
    let radius = (mu / cx).sqrt();
    let (a, b) = (tf.density(), relaxed.density());
    let mut checked = 0;
    for i in 0..g.nx {
        for j in 0..g.nz {
            if g.x(i).hypot(g.z(j)) < 0.8 * radius {
                assert!((b[[i, j]] / a[[i, j]] - 1.0).abs() < 0.02, "at ({i}, {j})");
                checked += 1;
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn identical_seeds_give_identical_fields() {
    let g = Grid2D::new(8, 16, 0.5, 0.5).unwrap();
    for mode in [SeedMode::Vacuum, SeedMode::Thermal { n_pm: 300.0 }] {
        let n = 444.0;
        let base = ground_state(&couplings(n), g, None, n * g.area(), GroundStateMethod::ThomasFermi).unwrap();
        let spec = SeedSpec {
            mode,
            ..SeedSpec::vacuum(77)
        };
        let (mut a, mut b, mut c) = (base.clone(), base.clone(), base);
        apply_seed(&mut a, &spec, None).unwrap();
        apply_seed(&mut b, &spec, None).unwrap();
        apply_seed(&mut c, &SeedSpec { rng_seed: 78, ..spec }, None).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
