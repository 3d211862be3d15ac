//! Capacity and ADC bit allocation for mmWave massive-MIMO receivers with
//! variable-resolution ADCs behind a hybrid combiner.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: clustered geometric channel synthesis and truncated SVD.
//! - [`quantizer`]: the MMSE quantizer distortion table, the additive
//!   quantization noise model (AQNM) matrices and a Lloyd-Max designer.
//! - [`receiver`]: hybrid combiners, the effective model `y = Kx + n1` and a
//!   sample-level simulator.
//! - [`metrics`]: CRLB, capacity, the `K_f` figure of merit and the
//!   infinite-resolution reference capacities.
//! - [`allocator`]: the power-feasible allocation set, exhaustive searches
//!   and the greedy marginal-gain allocator.
//! - [`sweep`]: seeded Monte-Carlo SNR sweeps with CSV output.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod channel;
mod error;
pub mod linalg;
pub mod metrics;
pub mod quantizer;
pub mod receiver;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};

pub use nalgebra::Complex;

/// Complex double-precision scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
