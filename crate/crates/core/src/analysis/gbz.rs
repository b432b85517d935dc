use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::exceptional::{find_exceptional_mu, nearest_ep};
use crate::geometry::wasserstein::{wasserstein_metric, WassersteinMethod};
use crate::model::{momentum_to_beta, Params};
use crate::scalar::Real;

/// Tolerance of the golden-section search in μ.
pub const GOLDEN_TOLERANCE: f64 = 1e-4;

/// An EP closer than this to the minimizer attaches a warning.
pub const EP_WARNING_DISTANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GbzSource {
    WassersteinMin,
    RonkinMin,
    IntersectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbzCurve<T> {
    pub betas: Vec<Complex<T>>,
    pub source: GbzSource,
    pub params: Params<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbzExtraction<T> {
    pub mu_gbz: T,
    pub metric_at_min: T,
    pub warning: Option<String>,
}

/// Minimizes `f` on `[lo, hi]` by golden-section search. Returns `(x, f(x))`.
pub fn golden_section<T: Real, F>(mut f: F, lo: T, hi: T, tol: T) -> Result<(T, T)>
where
    F: FnMut(T) -> Result<T>,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d)?;
        }
    }
    let x = (a + b) * T::lit(0.5);
    let fx = f(x)?;
    Ok((x, fx))
}

/// Locates the local minimum of a function sampled on `n` points of
/// `[lo, hi]` and polishes it by golden section. Samples that fail count as
/// `+∞`; a minimum on the boundary is rejected.
pub fn bracketed_minimum<T: Real, F>(mut f: F, lo: T, hi: T, n: usize, tol: T) -> Result<(T, T)>
where
    F: FnMut(T) -> Result<T>,
{
    if !(lo < hi) || n < 3 {
        return Err(Error::InvalidArgument("need lo < hi and at least 3 samples".into()));
    }
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    let grid: Vec<T> = (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect();
    let vals: Vec<T> = grid.iter().map(|&x| f(x).unwrap_or(T::infinity())).collect();
    let imin = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if imin == 0 || imin == n - 1 || !vals[imin].is_finite() {
        return Err(Error::NoInteriorMinimum {
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    golden_section(|x| f(x).or(Ok(T::infinity())), grid[imin - 1], grid[imin + 1], tol)
}

/// μ at the local minimum of the Wasserstein metric, for models with a
/// circular generalized Brillouin zone (`δ₂ = 0`).
pub fn extract_mu_gbz<T: Real>(p: &Params<T>, mu_range: (T, T), n_mu: usize, n_k: usize) -> Result<GbzExtraction<T>> {
    if p.delta2 != T::zero() {
        return Err(Error::InvalidArgument(
            "minimum-metric extraction assumes a circular zone (delta2 = 0)".into(),
        ));
    }
    let metric = |mu: T| wasserstein_metric(p, mu, n_k, WassersteinMethod::Integral);
    let (mu_gbz, metric_at_min) = bracketed_minimum(metric, mu_range.0, mu_range.1, n_mu, T::lit(GOLDEN_TOLERANCE))?;
    let eps = find_exceptional_mu(p)?;
    let warning = nearest_ep(&eps, mu_gbz).and_then(|(dist, ep)| {
        (dist < T::lit(EP_WARNING_DISTANCE)).then(|| format!("exceptional point at mu = {ep} lies {dist:.3e} from the minimum"))
    });
    Ok(GbzExtraction {
        mu_gbz,
        metric_at_min,
        warning,
    })
}

/// `−½ ln((η+γ)/(η−γ))`, the circle radius for `δ₂ = 0`, when defined.
pub fn mu_gbz_closed_form<T: Real>(p: &Params<T>) -> Option<T> {
    let ratio = (p.eta + p.gamma) / (p.eta - p.gamma);
    (p.delta2 == T::zero() && ratio > T::zero() && ratio.is_finite()).then(|| -ratio.ln() * T::lit(0.5))
}

/// `n` equally spaced points on the circle `|β| = e^{−μ}`.
pub fn gbz_circle<T: Real>(p: &Params<T>, mu: T, n: usize, source: GbzSource) -> GbzCurve<T> {
    let dk = T::two_pi() / T::from_usize_lossy(n.max(1));
    GbzCurve {
        betas: (0..n).map(|j| momentum_to_beta(dk * T::from_usize_lossy(j), mu)).collect(),
        source,
        params: *p,
    }
}
