//! Spectral geometry of band loops: area, Wasserstein metric, winding,
//! exceptional points and self-intersections.

pub mod area;
pub mod exceptional;
pub mod intersect;
pub mod wasserstein;
pub mod winding;

pub use area::{algebraic_area, polygon_area, spectral_area, SpectralAreaReport};
pub use exceptional::{find_exceptional_mu, nearest_ep, ExceptionalPointReport, Factor};
pub use intersect::{qualifying_count, self_intersections, IntersectionPoint};
pub use wasserstein::{flag_divergences, metric_curve, wasserstein_from_loops, wasserstein_metric, WassersteinMethod};
pub use winding::{winding_number, winding_number_model};
