use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::gbz::{GbzCurve, GbzSource};
use crate::analysis::obc::{ObcMethod, ObcSpectrum};
use crate::error::{Error, Result};
use crate::geometry::intersect::{self_intersections, IntersectionPoint};
use crate::model::{sample_band_loop, Params};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceOptions {
    pub n_k: usize,
    /// Largest accepted move of a matched crossing between neighbouring μ.
    pub max_jump: f64,
    /// Intervals are not split below this width.
    pub min_step: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            n_k: 512,
            max_jump: 0.02,
            min_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResult<T> {
    pub spectrum: ObcSpectrum<T>,
    pub gbz: GbzCurve<T>,
    /// Qualifying crossings of both bands, ordered by μ.
    pub points: Vec<IntersectionPoint<T>>,
    /// Every μ that was evaluated, including refinement points.
    pub mus: Vec<T>,
}

fn qualifying_at<T: Real>(p: &Params<T>, mu: T, n_k: usize) -> Result<Vec<IntersectionPoint<T>>> {
    let [plus, minus] = sample_band_loop(p, mu, n_k)?;
    let mut out: Vec<_> = self_intersections(&plus, &minus)?
        .into_iter()
        .filter(|x| x.qualifies_as_obc)
        .collect();
    out.extend(self_intersections(&minus, &plus)?.into_iter().filter(|x| x.qualifies_as_obc));
    Ok(out)
}

fn assemble<T: Real>(p: &Params<T>, mut layers: Vec<(T, Vec<IntersectionPoint<T>>)>) -> TraceResult<T> {
    layers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mus = layers.iter().map(|l| l.0).collect();
    let points: Vec<_> = layers.into_iter().flat_map(|l| l.1).collect();
    let eigenvalues = points.iter().map(|x| x.energy).collect();
    let betas = points
        .iter()
        .flat_map(|x| [x.beta_pair.0, x.beta_pair.1])
        .collect();
    TraceResult {
        spectrum: ObcSpectrum {
            eigenvalues,
            n_cells: 0,
            method: ObcMethod::IntersectionTrace,
            max_residual: None,
            warning: None,
        },
        gbz: GbzCurve {
            betas,
            source: GbzSource::IntersectionTrace,
            params: *p,
        },
        points,
        mus,
    }
}

/// Collects qualifying self-intersections at each listed μ. The energies
/// form an OBC point cloud; the crossing momenta sample the GBZ.
pub fn trace_obc_via_intersections<T: Real>(p: &Params<T>, mu_values: &[T], n_k: usize) -> Result<TraceResult<T>> {
    let layers = mu_values
        .par_iter()
        .map(|&mu| qualifying_at(p, mu, n_k).map(|v| (mu, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(p, layers))
}

fn max_unmatched<T: Real>(a: &[IntersectionPoint<T>], b: &[IntersectionPoint<T>]) -> T {
    let dist = |x: &Complex<T>, ys: &[IntersectionPoint<T>]| {
        ys.iter().map(|y| (y.energy - *x).norm()).fold(T::infinity(), T::min)
    };
    let ab = a.iter().map(|x| dist(&x.energy, b)).fold(T::zero(), T::max);
    let ba = b.iter().map(|x| dist(&x.energy, a)).fold(T::zero(), T::max);
    ab.max(ba)
}

/// Uniform scan over `[mu_lo, mu_hi]` with `step`, then interval bisection
/// wherever a crossing cannot be matched to one in the neighbouring layer
/// within `max_jump`.
pub fn trace_adaptive<T: Real>(p: &Params<T>, mu_lo: T, mu_hi: T, step: T, opts: TraceOptions) -> Result<TraceResult<T>> {
    if !(mu_lo < mu_hi) || !(step > T::zero()) {
        return Err(Error::InvalidArgument("need mu_lo < mu_hi and a positive step".into()));
    }
    let n = ((mu_hi - mu_lo) / step).round().to_usize().unwrap_or(0).max(1);
    let grid: Vec<T> = (0..=n)
        .map(|i| mu_lo + (mu_hi - mu_lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n))
        .collect();
    let mut layers = grid
        .par_iter()
        .map(|&mu| qualifying_at(p, mu, opts.n_k).map(|v| (mu, v)))
        .collect::<Result<Vec<_>>>()?;

    let jump = T::lit(opts.max_jump);
    let min_step = T::lit(opts.min_step);
    loop {
        let splits: Vec<T> = layers
            .windows(2)
            .filter(|w| {
                w[1].0 - w[0].0 > min_step * T::lit(2.0)
                    && !(w[0].1.is_empty() && w[1].1.is_empty())
                    && max_unmatched(&w[0].1, &w[1].1) > jump
            })
            .map(|w| (w[0].0 + w[1].0) * T::lit(0.5))
            .collect();
        if splits.is_empty() {
            break;
        }
        let fresh = splits
            .par_iter()
            .map(|&mu| qualifying_at(p, mu, opts.n_k).map(|v| (mu, v)))
            .collect::<Result<Vec<_>>>()?;
        layers.extend(fresh);
        layers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    }
    Ok(assemble(p, layers))
}
