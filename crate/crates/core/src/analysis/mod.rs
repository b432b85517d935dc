//! Ronkin function, GBZ extraction, open-chain spectra and intersection tracing.

pub mod gbz;
pub mod obc;
pub mod ronkin;
pub mod trace;

pub use gbz::{extract_mu_gbz, gbz_circle, mu_gbz_closed_form, GbzCurve, GbzExtraction, GbzSource};
pub use obc::{directed_hausdorff, hausdorff, obc_root_gap, obc_spectrum, ObcMethod, ObcSpectrum};
pub use ronkin::{classify_minimum, ronkin, ronkin_landscape, ronkin_slope, MinimumShape, RonkinGrid, RonkinMinimum};
pub use trace::{trace_adaptive, trace_obc_via_intersections, TraceOptions, TraceResult};
