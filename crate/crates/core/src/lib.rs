//! Mean-field particle systems with singular interaction kernels.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. All transcendental functions go through `libm`, so results
//! are bit-identical across platforms and thread counts. The optional
//! `parallel` feature distributes per-particle and per-run work over rayon
//! while keeping every reduction in a fixed order.
//!
//! Modules:
//! - [`kernels`]: interaction kernels, dominating functions, admissibility.
//! - [`gauss_oracle`]: heat-kernel norms and the short-window convolution bound.
//! - [`sde`]: Euler–Maruyama for the N-particle, partial-drift and linear SDEs.
//! - [`girsanov`]: drift energies, log-weights and exponential moments.
//! - [`meanfield`]: reference solutions of the limit equation.
//! - [`chaos`]: propagation-of-chaos diagnostics.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub(crate) mod math;
mod par;

pub mod chaos;
pub mod distance;
pub mod gauss_oracle;
pub mod girsanov;
pub mod kernels;
pub mod meanfield;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::{ExponentPair, InteractionKernel, KernelParams, KernelSpec};
pub use sde::{InitialLaw, ParticleEnsemble, SimConfig, TrajectoryBlock};
