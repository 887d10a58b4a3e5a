//! Energy-minimising computation offloading for space-air-ground edge networks.
//!
//! Ground devices split each task between local execution and offloading over a
//! THz access link to a serving UAV. A UAV computes the offloaded part, relays it
//! to another UAV over mmWave, or forwards it to a LEO satellite. The optimiser
//! alternates over the offloaded data, sub-band matching and power control, UAV
//! placement and routing until the total energy stops decreasing.

pub mod bcd;
pub mod channel;
pub mod constants;
pub mod convex;
pub mod cost;
pub mod deploy;
pub mod error;
pub mod harness;
pub mod matching;
pub mod offload;
pub mod par;
pub mod power;
pub mod rng;
pub mod scenario;
pub mod split;

pub use error::{Error, Result};
