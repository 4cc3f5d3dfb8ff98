pub mod config;
pub mod cost;
pub mod error;
pub mod exit;
pub mod levy;
pub mod mc;
pub mod optimize;
pub mod quad;
pub mod scale;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
pub use levy::{JumpDist, JumpMeasure, LevyModel, ModelKind, TabulatedDensity};
