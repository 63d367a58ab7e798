//! Degrees-of-freedom toolkit for the K-user MIMO multi-way relay channel
//! with common and private messages.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: complex matrix kernels (pseudoinverse, null spaces, subspace distance).
//! * [`channel`]: network configuration, Rayleigh channel draws and symbol extension.
//! * [`bounds`]: cut-set bound, per-receiver cut checks and the private-only comparison table.
//! * [`ssa_nc`]: the signal-space-alignment network-coding scheme, MAC and BC phases.
//! * [`analysis`]: noiseless audits, closed-form SINRs and DoF slope estimation.

pub mod analysis;
pub mod bounds;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod rng;
pub mod ssa_nc;

pub use error::{Error, Result};
