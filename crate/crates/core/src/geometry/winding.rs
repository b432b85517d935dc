use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{momentum_to_beta, BandLoop, Closure, Params};
use crate::scalar::Real;

/// Default minimum distance between the reference energy and the spectrum.
pub const REFERENCE_TOLERANCE: f64 = 1e-6;

/// Largest accepted distance of the phase sum from an integer multiple of 2π.
pub const RESIDUE_TOLERANCE: f64 = 0.05;

/// Spectral winding number of `det[H(β) − E] = (E₊ − E)(E₋ − E)` over one
/// period of `k`, counted positive for counterclockwise motion as `k` grows.
pub fn winding_number<T: Real>(loops: &[BandLoop<T>; 2], e_ref: Complex<T>) -> Result<i32> {
    winding_number_with_tolerance(loops, e_ref, T::lit(REFERENCE_TOLERANCE))
}

pub fn winding_number_with_tolerance<T: Real>(
    loops: &[BandLoop<T>; 2],
    e_ref: Complex<T>,
    tolerance: T,
) -> Result<i32> {
    let dets = determinant_samples(loops, e_ref, tolerance)?;
    let n = dets.len();
    let mut phase = T::zero();
    for j in 0..n {
        phase = phase + (dets[(j + 1) % n] / dets[j]).arg();
    }
    round_winding(phase / T::two_pi())
}

fn determinant_samples<T: Real>(
    loops: &[BandLoop<T>; 2],
    e_ref: Complex<T>,
    tolerance: T,
) -> Result<Vec<Complex<T>>> {
    let [plus, minus] = loops;
    if !plus.is_closed() || !minus.is_closed() || plus.len() != minus.len() || plus.len() < 3 {
        return Err(Error::OpenLoop);
    }
    let dist = plus
        .samples
        .iter()
        .chain(&minus.samples)
        .map(|s| (s.energy - e_ref).norm())
        .fold(T::infinity(), T::min);
    if dist <= tolerance {
        return Err(Error::ReferenceOnSpectrum {
            distance: dist.to_f64().unwrap_or(f64::NAN),
            tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
        });
    }
    // a 4π pair holds the two branches of one curve; one 2π period of the
    // determinant pairs sample j with sample j + n/2
    let n = match plus.closure {
        Closure::FourPi => plus.len() / 2,
        _ => plus.len(),
    };
    let other: &[_] = match plus.closure {
        Closure::FourPi => &plus.samples[n..],
        _ => &minus.samples,
    };
    Ok((0..n)
        .map(|j| (plus.samples[j].energy - e_ref) * (other[j].energy - e_ref))
        .collect())
}

fn round_winding<T: Real>(value: T) -> Result<i32> {
    let rounded = value.round();
    let residue = (value - rounded).abs();
    if residue > T::lit(RESIDUE_TOLERANCE) || !value.is_finite() {
        return Err(Error::NonIntegerWinding {
            value: value.to_f64().unwrap_or(f64::NAN),
            residue: residue.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(rounded.to_i32().unwrap_or(0))
}

/// Winding number evaluated directly from the model, subdividing any `k`
/// step whose determinant phase moves by more than π/4.
pub fn winding_number_model<T: Real>(p: &Params<T>, mu: T, e_ref: Complex<T>, n_k: usize) -> Result<i32> {
    let det = |k: T| p.char_poly(momentum_to_beta(k, mu), e_ref);
    let dk = T::two_pi() / T::from_usize_lossy(n_k.max(16));
    let limit = T::FRAC_PI_4();
    let mut phase = T::zero();
    let mut k = T::zero();
    let mut d0 = det(k);
    let end = T::two_pi();
    while k < end {
        let mut step = dk.min(end - k);
        let mut depth = 0;
        loop {
            let d1 = det(k + step);
            let dphi = (d1 / d0).arg();
            if dphi.abs() <= limit || depth > 40 {
                phase = phase + dphi;
                k = k + step;
                d0 = d1;
                break;
            }
            step = step * T::lit(0.5);
            depth += 1;
        }
        if d0.norm() == T::zero() {
            return Err(Error::ReferenceOnSpectrum {
                distance: 0.0,
                tolerance: REFERENCE_TOLERANCE,
            });
        }
    }
    round_winding(phase / T::two_pi())
}
