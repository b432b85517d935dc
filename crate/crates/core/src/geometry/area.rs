use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BandLoop, Closure};
use crate::scalar::{Real, C};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralAreaReport<T> {
    pub mu: T,
    pub algebraic_area: T,
    /// Contributions of the `+` and `-` bands over one `k` period each.
    pub per_band_areas: [T; 2],
}

/// `½ Σ Im(conj(zⱼ) zⱼ₊₁)` over a closed polygon, positive for counterclockwise traversal.
pub fn polygon_area<T: Real>(points: &[C<T>]) -> T {
    chain_area(points, 0, points.len())
}

/// Area contribution of the chain `start..start+len` (indices wrap).
fn chain_area<T: Real>(points: &[C<T>], start: usize, len: usize) -> T {
    let n = points.len();
    if n < 2 {
        return T::zero();
    }
    let mut acc = T::zero();
    for j in start..start + len {
        let a = points[j % n];
        let b = points[(j + 1) % n];
        acc = acc + (a.conj() * b).im;
    }
    acc * T::lit(0.5)
}

/// Winding-weighted area `½ Im ∮ conj(E) dE` of a closed band loop.
pub fn algebraic_area<T: Real>(band_loop: &BandLoop<T>) -> Result<T> {
    if !band_loop.is_closed() {
        return Err(Error::OpenLoop);
    }
    Ok(polygon_area(&band_loop.energies()))
}

/// Total algebraic area of a loop pair at one μ.
///
/// A `FourPi` pair is a single curve, so each band is credited with its own
/// half of the line integral and the total counts the curve once.
pub fn spectral_area<T: Real>(loops: &[BandLoop<T>; 2]) -> Result<SpectralAreaReport<T>> {
    let [a, b] = loops;
    if !a.is_closed() || !b.is_closed() {
        return Err(Error::OpenLoop);
    }
    let per_band_areas = match a.closure {
        Closure::FourPi => {
            let e = a.energies();
            let half = e.len() / 2;
            [chain_area(&e, 0, half), chain_area(&e, half, e.len() - half)]
        }
        _ => [algebraic_area(a)?, algebraic_area(b)?],
    };
    Ok(SpectralAreaReport {
        mu: a.mu,
        algebraic_area: per_band_areas[0] + per_band_areas[1],
        per_band_areas,
    })
}
