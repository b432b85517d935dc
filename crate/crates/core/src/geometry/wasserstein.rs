use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::area::spectral_area;
use crate::geometry::exceptional::{find_exceptional_mu, nearest_ep};
use crate::model::{band_energies, band_velocity, momentum_to_beta, sample_band_loop, BandLoop, Closure, Params};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WassersteinMethod {
    /// `Σ_bands ∫ dk/2π |∂E/∂k|²` with the analytic band velocity.
    Integral,
    /// `[A(μ+h) − A(μ−h)] / (2h · 2π)` from sampled loop areas.
    AreaDerivative,
}

/// Step used by [`WassersteinMethod::AreaDerivative`].
pub const AREA_STEP: f64 = 1e-4;

/// Evaluation closer than this to an EP radius is rejected.
pub const SINGULARITY_TOLERANCE: f64 = 1e-9;

pub fn wasserstein_metric<T: Real>(p: &Params<T>, mu: T, n_k: usize, method: WassersteinMethod) -> Result<T> {
    if n_k < 16 {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below the minimum of 16")));
    }
    let eps = find_exceptional_mu(p)?;
    if let Some((dist, ep_mu)) = nearest_ep(&eps, mu) {
        if dist < T::lit(SINGULARITY_TOLERANCE) {
            return Err(singular(mu, ep_mu));
        }
    }
    let value = match method {
        WassersteinMethod::Integral => integral(p, mu, n_k)?,
        WassersteinMethod::AreaDerivative => {
            let h = T::lit(AREA_STEP);
            let up = spectral_area(&sample_band_loop(p, mu + h, n_k)?)?.algebraic_area;
            let down = spectral_area(&sample_band_loop(p, mu - h, n_k)?)?.algebraic_area;
            (up - down) / (h * T::lit(2.0) * T::two_pi())
        }
    };
    if !value.is_finite() {
        let ep_mu = nearest_ep(&eps, mu).map(|x| x.1).unwrap_or(mu);
        return Err(singular(mu, ep_mu));
    }
    Ok(value)
}

fn singular<T: Real>(mu: T, ep: T) -> Error {
    Error::Singularity {
        mu: mu.to_f64().unwrap_or(f64::NAN),
        nearest_ep: ep.to_f64().unwrap_or(f64::NAN),
    }
}

fn integral<T: Real>(p: &Params<T>, mu: T, n_k: usize) -> Result<T> {
    // |∂E/∂k| is the same on both bands, so the band sum is twice the mean
    let dk = T::two_pi() / T::from_usize_lossy(n_k);
    let mut acc = T::zero();
    for j in 0..n_k {
        let beta = momentum_to_beta(dk * T::from_usize_lossy(j), mu);
        let (e, _) = band_energies(p, beta)?;
        acc = acc + band_velocity(p, beta, e).norm_sqr();
    }
    Ok(acc * T::lit(2.0) / T::from_usize_lossy(n_k))
}

/// Central-difference estimate from a sampled loop pair (e.g. fitted data).
pub fn wasserstein_from_loops<T: Real>(loops: &[BandLoop<T>; 2]) -> Result<T> {
    if loops.iter().any(|l| !l.is_closed() || l.len() < 3) {
        return Err(Error::OpenLoop);
    }
    let curves: &[BandLoop<T>] = match loops[0].closure {
        Closure::FourPi => &loops[..1],
        _ => &loops[..],
    };
    let mut total = T::zero();
    for l in curves {
        let n = l.len();
        let period = l.period();
        let mut acc = T::zero();
        for j in 0..n {
            let prev = &l.samples[(j + n - 1) % n];
            let next = &l.samples[(j + 1) % n];
            let mut span = next.k - prev.k;
            if span <= T::zero() {
                span = span + period;
            }
            let d = (next.energy - prev.energy) / span;
            acc = acc + d.norm_sqr() * span * T::lit(0.5);
        }
        total = total + acc / T::two_pi();
    }
    Ok(total)
}

/// Metric evaluated over a μ grid in parallel; each cell keeps its own error.
pub fn metric_curve<T: Real>(p: &Params<T>, mus: &[T], n_k: usize, method: WassersteinMethod) -> Vec<Result<T>> {
    mus.par_iter()
        .map(|&mu| wasserstein_metric(p, mu, n_k, method))
        .collect()
}

/// Indices whose value exceeds `factor` times the median of the window.
pub fn flag_divergences<T: Real>(values: &[T], factor: T) -> Vec<usize> {
    if values.is_empty() {
        return vec![];
    }
    let mut sorted: Vec<T> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = sorted[sorted.len() / 2];
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > median * factor)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Params<f64> {
        Params::from_pi_units(0.31, 0.0, 0.25, 0.057)
    }

    #[test]
    fn methods_agree_away_from_eps() {
        for mu in [0.2, -0.1, -0.232, -0.35, -0.7] {
            let a = wasserstein_metric(&p3(), mu, 1024, WassersteinMethod::Integral).unwrap();
            let b = wasserstein_metric(&p3(), mu, 1024, WassersteinMethod::AreaDerivative).unwrap();
            assert!((a - b).abs() / a < 1e-2, "mu {mu}: {a} vs {b}");
        }
    }

    #[test]
    fn hermitian_methods_agree() {
        let p = Params::<f64>::from_pi_units(0.31, 0.0, 0.25, 0.0);
        let a = wasserstein_metric(&p, 0.0, 1024, WassersteinMethod::Integral).unwrap();
        let b = wasserstein_metric(&p, 0.0, 1024, WassersteinMethod::AreaDerivative).unwrap();
        assert!((a - b).abs() / a < 1e-2, "{a} vs {b}");
    }

    #[test]
    fn loops_estimate_matches_integral() {
        let loops = sample_band_loop(&p3(), -0.1, 2048).unwrap();
        let a = wasserstein_from_loops(&loops).unwrap();
        let b = wasserstein_metric(&p3(), -0.1, 2048, WassersteinMethod::Integral).unwrap();
        assert!((a - b).abs() / b < 1e-3, "{a} vs {b}");
        let loops = sample_band_loop(&p3(), -0.7, 2048).unwrap();
        let a = wasserstein_from_loops(&loops).unwrap();
        let b = wasserstein_metric(&p3(), -0.7, 2048, WassersteinMethod::Integral).unwrap();
        assert!((a - b).abs() / b < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn exact_ep_rejected() {
        let eps = find_exceptional_mu(&p3()).unwrap();
        let r = wasserstein_metric(&p3(), eps[0].mu, 256, WassersteinMethod::Integral);
        assert!(matches!(r, Err(Error::Singularity { .. })));
    }

    #[test]
    fn divergence_flags() {
        assert_eq!(flag_divergences(&[1.0, 1.1, 0.9, 50.0, 1.0], 10.0), vec![3]);
    }
}
