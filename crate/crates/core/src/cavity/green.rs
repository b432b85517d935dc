use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{band_energies, Params};
use crate::scalar::{c, Real};

/// Cavity constants. Detunings are measured in units of `omega_fsr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Field retention per round trip, `0 < t < 1`.
    pub t: f64,
    pub omega_fsr: f64,
    /// Mirror coupling magnitude; only sets the overall intensity scale.
    pub kappa: f64,
    /// Number of lattice sites addressed by the projection.
    pub n_modes: usize,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            t: 0.9,
            omega_fsr: 1.0,
            kappa: 1.0,
            n_modes: 20,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::InvalidArgument(format!("t = {} must lie in (0, 1)", self.t)));
        }
        if !(self.omega_fsr > 0.0 && self.omega_fsr.is_finite()) {
            return Err(Error::InvalidArgument("omega_fsr must be positive".into()));
        }
        if !self.kappa.is_finite() || self.kappa == 0.0 {
            return Err(Error::InvalidArgument("kappa must be finite and nonzero".into()));
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidArgument("n_modes must be positive".into()));
        }
        Ok(())
    }

    /// Intensity prefactor `|κ|⁴ / (4N)`: two coupler passes, the
    /// `1/2` band-projection overlap and the `1/√N` mode normalisation.
    pub fn projection_scale(&self) -> f64 {
        self.kappa.powi(4) / (4.0 * self.n_modes as f64)
    }

    /// Round-trip phase `2πΔω/Ω`.
    pub fn phase(&self, dw: f64) -> f64 {
        std::f64::consts::TAU * dw / self.omega_fsr
    }
}

/// Round-trip gain `t·e^{Im E}` of the larger band; must stay below 1.
pub fn round_trip_gain<T: Real>(t: T, energies: &[Complex<T>]) -> T {
    energies.iter().map(|e| t * e.im.exp()).fold(T::zero(), T::max)
}

/// `Σ_s 1/(1 − t e^{i(φ − E_s)})` for explicit band energies.
pub fn greens_from_energies<T: Real>(t: T, phase: T, energies: &[Complex<T>]) -> Complex<T> {
    energies.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &e| {
        let u = c(T::zero(), phase - e.re).exp() * (t * e.im.exp());
        acc + (Complex::new(T::one(), T::zero()) - u).inv()
    })
}

pub fn greens_function<T: Real>(p: &Params<T>, cav: &CavityParams, beta: Complex<T>, dw: T) -> Result<Complex<T>> {
    cav.validate()?;
    let (ep, em) = band_energies(p, beta)?;
    let t = T::lit(cav.t);
    let gain = round_trip_gain(t, &[ep, em]);
    if !(gain < T::one()) {
        return Err(Error::UnstableCavity {
            gain: gain.to_f64().unwrap_or(f64::NAN),
        });
    }
    let phase = T::two_pi() * dw / T::lit(cav.omega_fsr);
    Ok(greens_from_energies(t, phase, &[ep, em]))
}

/// Partial sum `Σ_s Σ_{l=0}^{L} (t e^{i(φ − E_s)})^l` of the round-trip series.
pub fn round_trip_sum<T: Real>(p: &Params<T>, cav: &CavityParams, beta: Complex<T>, dw: T, rounds: usize) -> Result<Complex<T>> {
    let (ep, em) = band_energies(p, beta)?;
    let t = T::lit(cav.t);
    let phase = T::two_pi() * dw / T::lit(cav.omega_fsr);
    let mut total = Complex::new(T::zero(), T::zero());
    for e in [ep, em] {
        let u = c(T::zero(), phase - e.re).exp() * (t * e.im.exp());
        let mut term = Complex::new(T::one(), T::zero());
        for _ in 0..=rounds {
            total = total + term;
            term = term * u;
        }
    }
    Ok(total)
}
