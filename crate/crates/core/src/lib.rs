//! Simulation of a target-mounted reflecting surface shared by a legitimate
//! radar (LRS) and an unauthorized radar (URS), with phase optimization that
//! boosts the LRS echo while capping the URS echo.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod optimizer;
pub mod power;
pub mod protocol;
pub mod waveform;

pub use error::{Error, Result};
