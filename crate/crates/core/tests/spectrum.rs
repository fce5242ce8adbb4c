use std::f64::consts::PI;

use proptest::prelude::*;
use spinquench_core::params::{
    derive_scales, kinetic_hz_um2, DensityConvention, ModelCouplings, PhysicalParams, HBAR, PLANCK, RB87_MASS,
};
use spinquench_core::spectrum::{Dispersion, QuenchClass};

fn rb() -> Dispersion {
    Dispersion::new(kinetic_hz_um2(RB87_MASS), 15.0).unwrap()
}

#[test]
fn kinetic_coefficient_from_constants() {
    // hbar^2 k^2 / 2m divided by h, converted to Hz um^2
    let expected = HBAR * HBAR / (2.0 * RB87_MASS) / PLANCK * 1e12;
    // hbar and h are each rounded to ten digits
    assert!((kinetic_hz_um2(RB87_MASS) / expected - 1.0).abs() < 1e-9);
    assert!((expected - 58.15).abs() < 0.01);
}

#[test]
fn deep_quench_rate_and_time_scale() {
    let d = rb();
    let rate = d.max_growth_rate(2.0);
    let q0_over_hbar = 2.0 * PI * 15.0;
    assert!((rate / q0_over_hbar - 1.0).abs() < 1e-9);
    assert!((rate - 94.25).abs() < 0.01);
    assert!((1e3 / rate - 10.61).abs() < 0.01);
}

#[test]
fn dominant_wavevector_and_domain_size() {
    let d = rb();
    let k = d.dominant_wavevector(2.0).unwrap();
    // eps_k* = q0/2 - q
    let oracle = ((7.5 - 2.0) / kinetic_hz_um2(RB87_MASS)).sqrt();
    assert!((k / oracle - 1.0).abs() < 1e-9);
    assert!((k - 0.308).abs() < 1e-3);
    assert!((d.predicted_domain_size(2.0).unwrap() - 10.2).abs() < 0.05);
    // larger q_f moves the instability to longer wavelengths
    let sizes: Vec<f64> = [0.0, 2.0, 4.0, 6.0]
        .iter()
        .map(|&q| d.predicted_domain_size(q).unwrap())
        .collect();
    assert!(sizes.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn stability_boundary_by_bisection() {
    let d = rb();
    assert_eq!(d.dispersion_sq(0.0, 15.0), 0.0);
    let unstable = |q: f64| d.max_growth_rate(q) > 0.0;
    let (mut lo, mut hi) = (0.0, 40.0);
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if unstable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((0.5 * (lo + hi) - 15.0).abs() < 1e-10);
    assert_eq!(d.classify(20.0), QuenchClass::Stable);
    assert_eq!(d.classify(10.0), QuenchClass::Shallow);
    assert_eq!(d.classify(2.0), QuenchClass::Deep);
}

#[test]
fn rubidium_couplings() {
    let p = PhysicalParams::rubidium87();
    let c = ModelCouplings::new(&p, &derive_scales(&p, DensityConvention::default()));
    assert!((2.0 * c.g2_hz_um2.abs() * c.n2d_ref_um2 - 15.0).abs() < 1e-9);
    assert!(c.g2_hz_um2 < 0.0);
    // c0 / |c2| = 3 abar / |Delta a|
    let abar = (101.8 + 2.0 * 100.4) / 3.0;
    assert!((c.g0_hz_um2 / c.g2_hz_um2.abs() - 3.0 * abar / 1.4).abs() < 1e-9);
    assert!((c.n2d_ref_um2 - 4.0 / 3.0 * 2.6e20 * 1.6e-6 * 1e-12).abs() < 1e-9);
}

proptest! {
    #[test]
    fn growth_rate_is_twice_imaginary_frequency(k in 0.0f64..1.5, q in -5.0f64..20.0) {
        let d = rb();
        let eps = kinetic_hz_um2(RB87_MASS) * k * k;
        let es2 = (eps + q) * (eps + q - 15.0);
        prop_assert!((d.dispersion_sq(k, q) - es2).abs() <= 1e-9 * es2.abs().max(1.0));
        let want = if es2 < 0.0 { 2.0 * 2.0 * PI * (-es2).sqrt() } else { 0.0 };
        prop_assert!((d.growth_rate(k, q) - want).abs() <= 1e-9 * want.max(1.0));
    }
}
