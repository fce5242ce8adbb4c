//! Mean-field simulation of a spin-1 condensate quenched through the
//! paramagnetic to ferromagnetic transition.
//!
//! Internal units: energies are expressed as frequencies in Hz (E/h),
//! lengths in micrometres and times in milliseconds. Growth rates are
//! reported per second.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod noise;
pub mod params;
pub mod seed;
pub mod spectrum;

pub use error::{Error, Result};
