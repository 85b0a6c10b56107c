//! Simulation core for multimode electromagnetically induced transparency.
//!
//! A weak probe and a prescribed control field drive a Λ-type medium. Fields
//! are complex Rabi-frequency envelopes sampled on a uniform grid of local
//! time `τ = t − z/c`; the cell coordinate `ζ = z` is the propagation axis.
//!
//! Two propagation backends are provided:
//!
//! * [`adiabatic`] maps the probe onto the ground-state coherence
//!   `c_c = −Ω_p/Ω_c` and transports it along characteristics of the
//!   instantaneous group velocity `|Ω_c|²/g`. It is exact in the lossless
//!   adiabatic limit and is used as an oracle for the full solver.
//! * [`full`] integrates the amplitude equations of every velocity class and
//!   marches the probe through the cell. It is the only backend that shows
//!   absorption, mode filtering and adiabaticity breakdown.
//!
//! The crate is `no_std` and only needs `alloc`. Spectral analysis, file
//! formats and the command line live in the companion `eit-sim` crate.

#![no_std]
// `!(x > 0.0)` guards are written that way so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adiabatic;
pub mod diagnostics;
mod error;
pub mod full;
pub mod model;
mod special;
pub mod waveforms;

pub use error::{Error, Result};
pub use model::{
    make_velocity_classes, optical_depth, DetuningProfile, FieldEnvelope, LambdaMedium,
    Quadrature, SimulationGrid, TimeGrid,
};
pub use num_complex::Complex64 as C64;

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fallback excited-state decay rate, rad/s. Of the order of the Rb D1
/// natural linewidth; used when a scenario leaves `gamma` unset.
pub const DEFAULT_GAMMA: f64 = 2.0 * core::f64::consts::PI * 6.0e6;
