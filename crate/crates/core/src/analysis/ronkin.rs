use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{band_energies, momentum_to_beta, Params};
use crate::scalar::Real;

/// Reference energies closer than this to a sampled energy are rejected.
pub const SINGULARITY_DISTANCE: f64 = 1e-9;

/// Sublevel offset above the minimum used to measure the width of a minimum.
pub const SUBLEVEL_OFFSET: f64 = 1e-3;
pub const FLAT_WIDTH: f64 = 0.05;
pub const SHARP_WIDTH: f64 = 0.02;

/// `V(E, μ) = (1/n_k) Σ_k ln|det[E − H(β(k, μ))]|`.
pub fn ronkin<T: Real>(p: &Params<T>, e_ref: Complex<T>, mu: T, n_k: usize) -> Result<T> {
    if n_k < 64 {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below the minimum of 64")));
    }
    let dk = T::two_pi() / T::from_usize_lossy(n_k);
    let tol = T::lit(SINGULARITY_DISTANCE);
    let mut acc = T::zero();
    let mut nearest = T::infinity();
    for j in 0..n_k {
        let (ep, em) = band_energies(p, momentum_to_beta(dk * T::from_usize_lossy(j), mu))?;
        let a = (e_ref - ep).norm();
        let b = (e_ref - em).norm();
        nearest = nearest.min(a).min(b);
        acc = acc + a.ln() + b.ln();
    }
    if nearest < tol {
        return Err(Error::ReferenceOnSpectrum {
            distance: nearest.to_f64().unwrap_or(f64::NAN),
            tolerance: SINGULARITY_DISTANCE,
        });
    }
    Ok(acc / T::from_usize_lossy(n_k))
}

/// Central difference `∂V/∂μ`.
pub fn ronkin_slope<T: Real>(p: &Params<T>, e_ref: Complex<T>, mu: T, h: T, n_k: usize) -> Result<T> {
    let up = ronkin(p, e_ref, mu + h, n_k)?;
    let down = ronkin(p, e_ref, mu - h, n_k)?;
    Ok((up - down) / (h * T::lit(2.0)))
}

/// Ronkin values on a `(μ, E)` grid; `values[i][j]` belongs to `mus[i]`,
/// `e_refs[j]`. Cells on the sampled spectrum are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RonkinGrid<T> {
    pub e_refs: Vec<Complex<T>>,
    pub mus: Vec<T>,
    pub values: Vec<Vec<Option<T>>>,
    pub n_k: usize,
}

impl<T: Real> RonkinGrid<T> {
    /// Column of values for one reference energy.
    pub fn column(&self, j: usize) -> Vec<Option<T>> {
        self.values.iter().map(|row| row[j]).collect()
    }
}

fn strictly_increasing<T: PartialOrd + Copy>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

pub fn ronkin_landscape<T: Real>(
    p: &Params<T>,
    e_grid: &[Complex<T>],
    mu_grid: &[T],
    n_k: usize,
) -> Result<RonkinGrid<T>> {
    if e_grid.is_empty() || mu_grid.is_empty() {
        return Err(Error::InvalidArgument("Ronkin grid axes must be nonempty".into()));
    }
    let keys: Vec<(T, T)> = e_grid.iter().map(|e| (e.re, e.im)).collect();
    if !strictly_increasing(mu_grid) || !strictly_increasing(&keys) {
        return Err(Error::InvalidArgument("Ronkin grid axes must be strictly increasing".into()));
    }
    if n_k < 64 {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below the minimum of 64")));
    }
    let values = mu_grid
        .par_iter()
        .map(|&mu| {
            e_grid
                .iter()
                .map(|&e| match ronkin(p, e, mu, n_k) {
                    Ok(v) => Ok(Some(v)),
                    Err(Error::ReferenceOnSpectrum { .. }) => Ok(None),
                    Err(other) => Err(other),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RonkinGrid {
        e_refs: e_grid.to_vec(),
        mus: mu_grid.to_vec(),
        values,
        n_k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MinimumShape {
    Flat,
    Sharp,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RonkinMinimum<T> {
    pub mu_min: T,
    pub v_min: T,
    /// Extent of the connected sublevel set `{μ : V < V_min + 1e-3}` around the minimizer.
    pub width: T,
    pub shape: MinimumShape,
}

/// Measures the minimum of a sampled `V(μ)` curve. Missing values break the
/// sublevel set.
pub fn classify_minimum<T: Real>(mus: &[T], values: &[Option<T>]) -> Result<RonkinMinimum<T>> {
    if mus.len() != values.len() || mus.len() < 3 {
        return Err(Error::InvalidArgument("need at least three matching samples".into()));
    }
    let (imin, v_min) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::InvalidArgument("no finite Ronkin values".into()))?;
    let level = v_min + T::lit(SUBLEVEL_OFFSET);
    let inside = |i: usize| values[i].is_some_and(|v| v < level);
    let mut lo = imin;
    while lo > 0 && inside(lo - 1) {
        lo -= 1;
    }
    let mut hi = imin;
    while hi + 1 < mus.len() && inside(hi + 1) {
        hi += 1;
    }
    let width = mus[hi] - mus[lo];
    let shape = if width > T::lit(FLAT_WIDTH) {
        MinimumShape::Flat
    } else if width < T::lit(SHARP_WIDTH) {
        MinimumShape::Sharp
    } else {
        MinimumShape::Intermediate
    };
    Ok(RonkinMinimum {
        mu_min: mus[imin],
        v_min,
        width,
        shape,
    })
}
