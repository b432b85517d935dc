//! Phase-only hologram encoding of a left non-Bloch projector, with a
//! scalar-diffraction oracle that reconstructs the first diffraction order.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{c, wrap_two_pi, Real};

/// Smallest grating period that keeps the first order separable.
pub const MIN_GRATING_PERIOD: f64 = 4.0;

/// Fraction of the clip-free minimum amplitude used as the default `C`.
pub const DEFAULT_CLIP_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRaster<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major, `values[y * width + x]`.
    pub values: Vec<Complex<T>>,
    pub center: (T, T),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HologramRaster<T> {
    pub width: usize,
    pub height: usize,
    /// Row-major phase in `[0, 2π)`.
    pub phase: Vec<T>,
    pub grating_period: T,
    pub clip_constant: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMaps<T> {
    pub width: usize,
    pub height: usize,
    /// Modulation depth in `[0, 1]`.
    pub depth: Vec<T>,
    /// Phase offset in `[0, 2π)`.
    pub offset: Vec<T>,
    pub clip_constant: T,
}

impl<T: Real> FieldRaster<T> {
    /// Pixel grid with its center at the middle of the raster.
    pub fn centered(width: usize, height: usize) -> Self {
        let half = T::lit(0.5);
        Self {
            width,
            height,
            values: vec![Complex::new(T::zero(), T::zero()); width * height],
            center: (
                (T::from_usize_lossy(width) - T::one()) * half,
                (T::from_usize_lossy(height) - T::one()) * half,
            ),
        }
    }

    pub fn max_modulus(&self) -> T {
        self.values.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Smallest modulus over pixels where the field is not exactly zero.
    pub fn min_nonzero_modulus(&self) -> Option<T> {
        self.values
            .iter()
            .map(|z| z.norm())
            .filter(|&a| a > T::zero())
            .fold(None, |m: Option<T>, a| Some(m.map_or(a, |m| m.min(a))))
    }

    /// Default clip constant `0.9 · min |E_o|`.
    pub fn default_clip(&self) -> Option<T> {
        self.min_nonzero_modulus().map(|m| m * T::lit(DEFAULT_CLIP_FRACTION))
    }
}

/// `E_o(x, y) = N^{-1/2} Σ_{m=1}^{N} β^{-m} e^{-imφ(x,y)}` on a raster.
/// Pixels closer than one pixel to the center are set to zero.
pub fn target_field<T: Real>(
    beta: Complex<T>,
    n_modes: usize,
    width: usize,
    height: usize,
    center: Option<(T, T)>,
) -> Result<FieldRaster<T>> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
    }
    if beta.norm() == T::zero() || !beta.norm().is_finite() {
        return Err(Error::ZeroBeta);
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("raster must be non-empty".into()));
    }
    let mut raster = FieldRaster::centered(width, height);
    if let Some(c0) = center {
        raster.center = c0;
    }
    let (x0, y0) = raster.center;
    let inv = beta.inv();
    let norm = T::from_usize_lossy(n_modes).sqrt().recip();
    raster.values.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let dy = T::from_usize_lossy(y) - y0;
        for (x, v) in row.iter_mut().enumerate() {
            let dx = T::from_usize_lossy(x) - x0;
            if (dx * dx + dy * dy).sqrt() < T::one() {
                *v = Complex::new(T::zero(), T::zero());
                continue;
            }
            let step = inv * c(T::zero(), -dy.atan2(dx)).exp();
            let mut term = step;
            let mut sum = Complex::new(T::zero(), T::zero());
            for _ in 0..n_modes {
                sum = sum + term;
                term = term * step;
            }
            *v = sum * norm;
        }
    });
    Ok(raster)
}

pub fn sinc<T: Real>(z: T) -> T {
    if z == T::zero() {
        T::one()
    } else {
        z.sin() / z
    }
}

/// Solves `sin(z)/z = a` on the branch `z ∈ [−π, 0]` by bisection.
pub fn inverse_sinc<T: Real>(a: T) -> Result<T> {
    if !(a >= T::zero() && a <= T::one()) {
        return Err(Error::InvalidArgument(format!("inverse sinc argument {a} outside [0, 1]")));
    }
    if a == T::one() {
        return Ok(T::zero());
    }
    if a == T::zero() {
        return Ok(-T::PI());
    }
    // sinc increases from 0 at −π to 1 at 0
    let (mut lo, mut hi) = (-T::PI(), T::zero());
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if sinc(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

/// Modulation depth `M = 1 + sinc⁻¹(C/|E_o|)/π` and offset
/// `F = −Arg E_o − πM`. Zero pixels get `M = 0`.
pub fn modulation_maps<T: Real>(field: &FieldRaster<T>, clip: T) -> Result<ModulationMaps<T>> {
    if !(clip > T::zero()) {
        return Err(Error::InvalidArgument("clip constant must be positive".into()));
    }
    let violating = field
        .values
        .iter()
        .filter(|z| {
            let a = z.norm();
            a > T::zero() && a < clip
        })
        .count();
    if violating > 0 {
        return Err(Error::Clipping {
            clip: clip.to_f64().unwrap_or(f64::NAN),
            pixels: violating,
        });
    }
    let pairs = field
        .values
        .par_iter()
        .map(|z| {
            let a = z.norm();
            if a == T::zero() {
                return Ok((T::zero(), T::zero()));
            }
            let m = T::one() + inverse_sinc((clip / a).min(T::one()))? / T::PI();
            Ok((m, wrap_two_pi(-z.arg() - T::PI() * m)))
        })
        .collect::<Result<Vec<(T, T)>>>()?;
    let (depth, offset) = pairs.into_iter().unzip();
    Ok(ModulationMaps {
        width: field.width,
        height: field.height,
        depth,
        offset,
        clip_constant: clip,
    })
}

/// `M · mod(F + 2πx/Λ, 2π)`, the grating running along `x`.
pub fn hologram_from_maps<T: Real>(maps: &ModulationMaps<T>, grating_period: T) -> Result<HologramRaster<T>> {
    if !(grating_period >= T::lit(MIN_GRATING_PERIOD)) {
        return Err(Error::InvalidArgument(format!(
            "grating period {grating_period} below {MIN_GRATING_PERIOD} pixels"
        )));
    }
    let w = maps.width;
    let mut phase = vec![T::zero(); w * maps.height];
    phase.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let carrier = T::two_pi() * T::from_usize_lossy(x) / grating_period;
            *out = wrap_two_pi(maps.depth[i] * wrap_two_pi(maps.offset[i] + carrier));
        }
    });
    Ok(HologramRaster {
        width: w,
        height: maps.height,
        phase,
        grating_period,
        clip_constant: maps.clip_constant,
    })
}

pub fn hologram_phase<T: Real>(field: &FieldRaster<T>, clip: T, grating_period: T) -> Result<HologramRaster<T>> {
    hologram_from_maps(&modulation_maps(field, clip)?, grating_period)
}

/// First Fourier coefficient of `e^{iM·mod(θ, 2π)}`, by direct summation
/// over `samples` equispaced phases.
pub fn first_order_coefficient(depth: f64, samples: usize) -> Complex64 {
    let n = samples as f64;
    (0..samples)
        .map(|j| {
            let theta = std::f64::consts::TAU * (j as f64 + 0.5) / n;
            Complex64::from_polar(1.0, depth * theta - theta)
        })
        .sum::<Complex64>()
        / n
}

/// Incident beam envelope used by the diffraction oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pupil {
    /// Uniform illumination of the whole raster.
    Full,
    /// Circular aperture of radius `min(w, h)/2` with a raised-cosine edge
    /// over the outer fraction `taper`.
    Tukey { taper: f64 },
}

impl Default for Pupil {
    fn default() -> Self {
        Pupil::Tukey { taper: 0.5 }
    }
}

impl Pupil {
    fn weights(&self, width: usize, height: usize, center: (f64, f64)) -> Vec<f64> {
        match *self {
            Pupil::Full => vec![1.0; width * height],
            Pupil::Tukey { taper } => {
                let radius = 0.5 * width.min(height) as f64;
                let inner = radius * (1.0 - taper.clamp(0.0, 1.0));
                let mut w = vec![0.0; width * height];
                for y in 0..height {
                    for x in 0..width {
                        let r = (x as f64 - center.0).hypot(y as f64 - center.1);
                        w[y * width + x] = if r <= inner {
                            1.0
                        } else if r >= radius {
                            0.0
                        } else {
                            0.5 * (1.0 + (std::f64::consts::PI * (r - inner) / (radius - inner)).cos())
                        };
                    }
                }
                w
            }
        }
    }
}

fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    data.par_chunks_mut(width).for_each(|row| row_fft.process(row));
    let mut columns: Vec<Vec<Complex64>> = (0..width)
        .into_par_iter()
        .map(|x| {
            let mut col: Vec<Complex64> = (0..height).map(|y| data[y * width + x]).collect();
            col_fft.process(&mut col);
            col
        })
        .collect();
    for (x, col) in columns.iter_mut().enumerate() {
        for (y, v) in col.iter().enumerate() {
            data[y * width + x] = *v;
        }
    }
}

fn frequency(i: usize, n: usize) -> f64 {
    let f = i as f64 / n as f64;
    if f >= 0.5 {
        f - 1.0
    } else {
        f
    }
}

/// Largest fraction of the illuminated field's power allowed outside the
/// first-order passband before reconstruction is declared aliased.
pub const ALIASING_LIMIT: f64 = 0.5;

/// Illuminates the hologram with `field`, keeps the first diffraction order
/// (a disk of radius `1/(2Λ)` around spatial frequency `(1/Λ, 0)`) and
/// returns its normalized overlap with a plane wave over the same pupil.
pub fn diffraction_oracle(holo: &HologramRaster<f64>, field: &FieldRaster<f64>) -> Result<f64> {
    diffraction_oracle_with(holo, field, Pupil::default())
}

pub fn diffraction_oracle_with(holo: &HologramRaster<f64>, field: &FieldRaster<f64>, pupil: Pupil) -> Result<f64> {
    let (w, h) = (holo.width, holo.height);
    if field.width != w || field.height != h {
        return Err(Error::InvalidArgument(format!(
            "raster sizes differ: hologram {w}x{h}, field {}x{}",
            field.width, field.height
        )));
    }
    let lambda = holo.grating_period;
    let radius = 0.5 / lambda;
    let envelope = pupil.weights(w, h, field.center);

    let mut incident: Vec<Complex64> = field.values.iter().zip(&envelope).map(|(z, a)| z * a).collect();
    let total: f64 = incident.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument("field is zero inside the pupil".into()));
    }
    fft2(&mut incident, w, h, false);
    let outside: f64 = incident
        .iter()
        .enumerate()
        .filter(|(i, _)| frequency(i % w, w).hypot(frequency(i / w, h)) >= radius)
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        / (total * (w * h) as f64);
    if outside > ALIASING_LIMIT {
        return Err(Error::Aliasing(format!(
            "{:.1}% of the field power lies beyond the passband of a period-{lambda} grating",
            100.0 * outside
        )));
    }

    let mut out: Vec<Complex64> = field
        .values
        .iter()
        .zip(&envelope)
        .zip(&holo.phase)
        .map(|((z, a), ph)| z * a * Complex64::from_polar(1.0, *ph))
        .collect();
    fft2(&mut out, w, h, false);
    for (i, v) in out.iter_mut().enumerate() {
        let fx = frequency(i % w, w) - 1.0 / lambda;
        let fy = frequency(i / w, h);
        if fx.hypot(fy) >= radius {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft2(&mut out, w, h, true);

    let mut overlap = Complex64::new(0.0, 0.0);
    let mut norm_out = 0.0;
    let mut norm_target = 0.0;
    for (i, v) in out.iter().enumerate() {
        let x = (i % w) as f64;
        let psi = v * Complex64::from_polar(1.0, -std::f64::consts::TAU * x / lambda);
        let target = envelope[i];
        overlap += psi * target;
        norm_out += psi.norm_sqr();
        norm_target += target * target;
    }
    if norm_out == 0.0 {
        return Ok(0.0);
    }
    Ok((overlap.norm_sqr() / (norm_out * norm_target)).clamp(0.0, 1.0))
}

fn gray_levels(phase: f64, bits: u8) -> u16 {
    let levels = if bits == 8 { 256.0 } else { 65536.0 };
    ((phase / std::f64::consts::TAU * levels).floor()).clamp(0.0, levels - 1.0) as u16
}

/// Binary portable graymap (`P5`) with 8 or 16 bits per pixel.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u16], bits: u8) -> Result<Vec<u8>> {
    if bits != 8 && bits != 16 {
        return Err(Error::InvalidArgument(format!("unsupported bit depth {bits}")));
    }
    let maxval = if bits == 8 { 255 } else { 65535 };
    let mut bytes = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &p in pixels {
        if bits == 8 {
            bytes.push(p.min(255) as u8);
        } else {
            bytes.extend_from_slice(&p.to_be_bytes());
        }
    }
    Ok(bytes)
}

impl<T: Real> HologramRaster<T> {
    /// Phase mapped linearly from `[0, 2π)` onto the full gray range.
    pub fn gray(&self, bits: u8) -> Vec<u16> {
        self.phase
            .iter()
            .map(|p| gray_levels(p.to_f64().unwrap_or(0.0), bits))
            .collect()
    }

    pub fn to_pgm(&self, bits: u8) -> Result<Vec<u8>> {
        encode_pgm(self.width, self.height, &self.gray(bits), bits)
    }
}

impl<T: Real> FieldRaster<T> {
    /// Modulus (scaled to the maximum) and wrapped phase graymaps.
    pub fn to_pgm_pair(&self, bits: u8) -> Result<(Vec<u8>, Vec<u8>)> {
        let peak = self.max_modulus().to_f64().unwrap_or(0.0);
        let full = if bits == 8 { 255.0 } else { 65535.0 };
        let modulus: Vec<u16> = self
            .values
            .iter()
            .map(|z| {
                let a = z.norm().to_f64().unwrap_or(0.0);
                if peak > 0.0 {
                    (a / peak * full).round() as u16
                } else {
                    0
                }
            })
            .collect();
        let phase: Vec<u16> = self
            .values
            .iter()
            .map(|z| gray_levels(wrap_two_pi(z.arg()).to_f64().unwrap_or(0.0), bits))
            .collect();
        Ok((
            encode_pgm(self.width, self.height, &modulus, bits)?,
            encode_pgm(self.width, self.height, &phase, bits)?,
        ))
    }
}
