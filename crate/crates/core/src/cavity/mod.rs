//! Digital twin of the cavity spectroscopy: Green's-function transmission,
//! detector noise, and inversion of traces back to band energies.

pub mod fit;
pub mod green;
pub mod scan;
pub mod synth;

pub use fit::{extract_eigenenergies, match_errors, FitInit, FitOutcome, PeakEstimate};
pub use green::{greens_from_energies, greens_function, round_trip_gain, round_trip_sum, CavityParams};
pub use scan::{assemble_loops, fitted_loops, mu_gbz_from_fits, scan_experiment, ScanDataset, ScanLayer, ScanPoint};
pub use synth::{fsr_grid, point_rng, synth_transmission, NoiseSpec, TransmissionTrace};
