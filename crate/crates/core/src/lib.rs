//! Non-Bloch band theory for the non-Hermitian extended SSH chain.

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hologram;
pub mod linalg;
pub mod model;
pub mod output;
pub mod recipe;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, C};

/// Double-precision aliases for the generic numerical types.
pub type ModelParams = model::Params<f64>;
pub type BandLoop64 = model::BandLoop<f64>;
pub type ObcSpectrum64 = analysis::ObcSpectrum<f64>;
pub type RonkinGrid64 = analysis::RonkinGrid<f64>;
pub type IntersectionPoint64 = geometry::IntersectionPoint<f64>;
pub type ExceptionalPoint64 = geometry::ExceptionalPointReport<f64>;
pub type GbzCurve64 = analysis::GbzCurve<f64>;
pub type FieldRaster64 = hologram::FieldRaster<f64>;
pub type HologramRaster64 = hologram::HologramRaster<f64>;
