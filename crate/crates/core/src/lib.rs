//! Chern and Segre forms and currents of smooth and singular hermitian metrics
//! on trivial holomorphic vector bundles over polydisc charts.

pub mod charclass;
pub mod forms;
pub mod linalg;
pub mod metrics;
pub mod projbundle;
pub mod regularize;
pub mod currents;
pub mod error;
pub mod harness;

pub use error::{Error, Result};
