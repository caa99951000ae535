//! Second-quantized Dirac field dynamics in one dimension: wavepacket
//! scattering off a smooth potential barrier, with the charge density split
//! into vacuum, wavepacket and interference contributions.

pub mod barrier;
pub mod basis;
pub mod causality;
pub mod density;
pub mod error;
pub mod field;
pub mod grid;
pub mod oracle;
pub mod propagator;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
