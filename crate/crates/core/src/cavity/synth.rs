use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cavity::green::{greens_function, CavityParams};
use crate::error::{Error, Result};
use crate::model::Params;

/// Detector noise: `I = s|G|²(1 + ε_mult) + ε_add`, both Gaussian, the
/// additive part scaled to the noiseless peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_rel: f64,
    pub floor_rel: f64,
    pub seed: Option<u64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma_rel: 0.02,
            floor_rel: 1e-4,
            seed: Some(0),
        }
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            sigma_rel: 0.0,
            floor_rel: 0.0,
            seed: None,
        }
    }

    pub fn with_seed(sigma_rel: f64, seed: u64) -> Self {
        Self {
            sigma_rel,
            seed: Some(seed),
            ..Self::default()
        }
    }

    pub fn is_off(&self) -> bool {
        self.sigma_rel == 0.0 && self.floor_rel == 0.0
    }
}

/// Independent random stream for scan point `(mu_index, k_index)`.
pub fn point_rng(seed: u64, mu_index: usize, k_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((mu_index as u64) << 32) | (k_index as u64 & 0xffff_ffff));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionTrace {
    pub beta: Complex64,
    pub detunings: Vec<f64>,
    pub intensities: Vec<f64>,
    pub noise_seed: Option<u64>,
}

/// `n` detunings covering one free spectral range, `[-Ω/2, Ω/2)`.
pub fn fsr_grid(cav: &CavityParams, n: usize) -> Vec<f64> {
    let step = cav.omega_fsr / n as f64;
    (0..n).map(|i| -0.5 * cav.omega_fsr + step * i as f64).collect()
}

/// Synthesizes a trace for scan point `(mu_index, k_index)`; the indices
/// select the random stream so results do not depend on evaluation order.
pub fn synth_transmission(
    p: &Params<f64>,
    cav: &CavityParams,
    beta: Complex64,
    dw_grid: &[f64],
    noise: &NoiseSpec,
    point: (usize, usize),
) -> Result<TransmissionTrace> {
    if dw_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("detuning grid must be strictly increasing".into()));
    }
    let scale = cav.projection_scale();
    let clean = dw_grid
        .iter()
        .map(|&dw| greens_function(p, cav, beta, dw).map(|g| scale * g.norm_sqr()))
        .collect::<Result<Vec<f64>>>()?;
    if noise.is_off() {
        return Ok(TransmissionTrace {
            beta,
            detunings: dw_grid.to_vec(),
            intensities: clean,
            noise_seed: None,
        });
    }
    let seed = noise.seed.unwrap_or(0);
    let mut rng = point_rng(seed, point.0, point.1);
    let peak = clean.iter().cloned().fold(0.0, f64::max);
    let mult = Normal::new(0.0, noise.sigma_rel).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let add = Normal::new(0.0, noise.floor_rel * peak).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let intensities = clean
        .iter()
        .map(|&i| (i * (1.0 + mult.sample(&mut rng)) + add.sample(&mut rng)).max(0.0))
        .collect();
    Ok(TransmissionTrace {
        beta,
        detunings: dw_grid.to_vec(),
        intensities,
        noise_seed: Some(seed),
    })
}
