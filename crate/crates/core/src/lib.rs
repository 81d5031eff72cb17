//! Ergodic rates of linear beamforming over spatially correlated MISO
//! broadcast channels, statistical beamformer design, and the Monte Carlo
//! machinery used to check every closed form.

pub mod beamform;
pub mod density;
mod error;
pub mod fixtures;
pub mod linalg;
pub mod montecarlo;
pub mod rates;
pub mod specfun;
pub mod validate;

pub use error::{Error, Result};
pub use specfun::PositiveReal;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
