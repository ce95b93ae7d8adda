//! Delay-Doppler (OTFS) link-level simulation with reservoir-computing detectors.

pub mod channel;
pub mod complexity;
pub mod detection;
pub mod equalizers;
pub mod error;
pub mod harness;
pub mod modem;
pub mod numerics;
pub mod pilots;
pub mod rc1d;
pub mod rc2d;
pub mod reservoir;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ComplexTensor3, C64};
