//! Counter-based Gaussian noise keyed by `(seed, stream, counter)`.
//!
//! Each draw repositions a ChaCha8 keystream, so a value depends only on its
//! key and never on how many other values were drawn before it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Streams used by the seeding routines.
pub mod stream {
    pub const VACUUM_PLUS: u64 = 1;
    pub const VACUUM_MINUS: u64 = 2;
    pub const THERMAL_PLUS: u64 = 3;
    pub const THERMAL_MINUS: u64 = 4;
    pub const BOGOLIUBOV: u64 = 5;
}

#[derive(Clone)]
pub struct CounterRng {
    rng: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Two uniforms in (0, 1] for the given counter.
    fn uniforms(&mut self, counter: u64) -> (f64, f64) {
        // four 32-bit words per counter
        self.rng.set_word_pos(u128::from(counter) * 4);
        let to_unit = |x: u64| ((x >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        (to_unit(self.rng.next_u64()), to_unit(self.rng.next_u64()))
    }

    /// Two independent standard normals (Box-Muller).
    pub fn normal_pair(&mut self, counter: u64) -> (f64, f64) {
        let (u1, u2) = self.uniforms(counter);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }

    /// Circular complex Gaussian with `E|z|^2 = variance`.
    pub fn complex_normal(&mut self, counter: u64, variance: f64) -> Complex64 {
        let (a, b) = self.normal_pair(counter);
        Complex64::new(a, b) * (0.5 * variance).sqrt()
    }
}

/// Bijective key for a signed 2D mode index.
pub fn mode_key(mx: i64, mz: i64) -> u64 {
    let zig = |v: i64| ((v << 1) ^ (v >> 63)) as u64 & 0xffff_ffff;
    (zig(mx) << 32) | zig(mz)
}
