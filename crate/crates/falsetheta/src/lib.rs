//! Exact and asymptotic coefficients of false-indefinite theta functions
//! attached to partitions with parts separated by parity.

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod maass;
pub mod modular;
pub mod mp;
pub mod qseries;
pub mod quadrature;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
