//! The extended SSH model with gain, loss and two hopping channels.
//!
//! In the non-Bloch picture the quasi-momentum is replaced by the complex
//! variable `β = exp(-i k - μ)`. The Bloch Hamiltonian is off-diagonal,
//! `H(β) = E₁(β) σ₊ + E₂(β) σ₋`, so its two bands are `±√(E₁E₂)`.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{c, cr, Real};

/// Model parameters in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub delta1: T,
    pub delta2: T,
    pub eta: T,
    pub gamma: T,
}

impl<T: Real> Params<T> {
    pub fn new(delta1: T, delta2: T, eta: T, gamma: T) -> Self {
        Self {
            delta1,
            delta2,
            eta,
            gamma,
        }
    }

    /// Builds parameters from values given in units of π.
    pub fn from_pi_units(delta1: T, delta2: T, eta: T, gamma: T) -> Self {
        let pi = T::PI();
        Self::new(delta1 * pi, delta2 * pi, eta * pi, gamma * pi)
    }

    pub fn to_pi_units(&self) -> [T; 4] {
        let pi = T::PI();
        [
            self.delta1 / pi,
            self.delta2 / pi,
            self.eta / pi,
            self.gamma / pi,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.delta1, self.delta2, self.eta, self.gamma];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        Ok(())
    }

    /// Upper off-diagonal entry `E₁(β) = -δ₁/β - δ₂β + i(η-γ)`.
    #[inline]
    pub fn e1(&self, beta: Complex<T>) -> Complex<T> {
        -beta.inv() * self.delta1 - beta * self.delta2 + c(T::zero(), self.eta - self.gamma)
    }

    /// Lower off-diagonal entry `E₂(β) = -δ₁β - δ₂/β - i(η+γ)`.
    #[inline]
    pub fn e2(&self, beta: Complex<T>) -> Complex<T> {
        -beta * self.delta1 - beta.inv() * self.delta2 - c(T::zero(), self.eta + self.gamma)
    }

    /// `dE₁/dβ`.
    #[inline]
    pub fn de1(&self, beta: Complex<T>) -> Complex<T> {
        (beta * beta).inv() * self.delta1 - cr(self.delta2)
    }

    /// `dE₂/dβ`.
    #[inline]
    pub fn de2(&self, beta: Complex<T>) -> Complex<T> {
        (beta * beta).inv() * self.delta2 - cr(self.delta1)
    }

    /// The characteristic polynomial value `E² - E₁(β)E₂(β)`.
    #[inline]
    pub fn char_poly(&self, beta: Complex<T>, energy: Complex<T>) -> Complex<T> {
        energy * energy - self.e1(beta) * self.e2(beta)
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        let f = |x: T| U::lit(x.to_f64().unwrap_or(f64::NAN));
        Params::new(f(self.delta1), f(self.delta2), f(self.eta), f(self.gamma))
    }
}

/// A complex momentum `k + iμ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMomentum<T> {
    pub k: T,
    pub mu: T,
}

impl<T: Real> ComplexMomentum<T> {
    pub fn new(k: T, mu: T) -> Self {
        Self { k, mu }
    }

    pub fn beta(&self) -> Complex<T> {
        momentum_to_beta(self.k, self.mu)
    }
}

/// `β = exp(-i k - μ)`, so that `|β| = e^{-μ}` and `arg β = -k`.
#[inline]
pub fn momentum_to_beta<T: Real>(k: T, mu: T) -> Complex<T> {
    Complex::from_polar((-mu).exp(), -k)
}

/// The two off-diagonal entries of the Bloch Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMatrix<T> {
    pub e1: Complex<T>,
    pub e2: Complex<T>,
}

impl<T: Real> BlochMatrix<T> {
    /// Full 2×2 matrix `[[0, E₁], [E₂, 0]]`, row major.
    pub fn to_array(&self) -> [[Complex<T>; 2]; 2] {
        [[Complex::zero(), self.e1], [self.e2, Complex::zero()]]
    }

    pub fn determinant(&self) -> Complex<T> {
        -(self.e1 * self.e2)
    }
}

fn check_beta<T: Real>(beta: Complex<T>) -> Result<()> {
    if beta.norm() == T::zero() {
        return Err(Error::ZeroBeta);
    }
    if !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(Error::InvalidArgument("beta must be finite".into()));
    }
    Ok(())
}

pub fn bloch_matrix<T: Real>(p: &Params<T>, beta: Complex<T>) -> Result<BlochMatrix<T>> {
    check_beta(beta)?;
    Ok(BlochMatrix {
        e1: p.e1(beta),
        e2: p.e2(beta),
    })
}

/// Both band energies `(E₊, E₋) = (+√(E₁E₂), -√(E₁E₂))`, principal square root.
pub fn band_energies<T: Real>(p: &Params<T>, beta: Complex<T>) -> Result<(Complex<T>, Complex<T>)> {
    let m = bloch_matrix(p, beta)?;
    let s = (m.e1 * m.e2).sqrt();
    Ok((s, -s))
}

/// `dE/dk` along a band at fixed μ, given the band energy at that point.
///
/// Uses `dβ/dk = -iβ` and `d(E²)/dβ = E₁'E₂ + E₁E₂'`. Diverges where `E = 0`.
pub fn band_velocity<T: Real>(p: &Params<T>, beta: Complex<T>, energy: Complex<T>) -> Complex<T> {
    let dprod = p.de1(beta) * p.e2(beta) + p.e1(beta) * p.de2(beta);
    let dbeta = c(T::zero(), -T::one()) * beta;
    dprod * dbeta / (energy * T::lit(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Plus,
    Minus,
}

impl Band {
    pub fn other(self) -> Self {
        match self {
            Band::Plus => Band::Minus,
            Band::Minus => Band::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Plus => "+",
            Band::Minus => "-",
        }
    }
}

/// How a band loop closes as `k` runs over one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// Each band closes on itself after `k → k + 2π`.
    TwoPi,
    /// The bands exchange after `2π`; one loop of period `4π` covers both.
    FourPi,
    /// Samples do not form a closed curve (e.g. gaps in fitted data).
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSample<T> {
    pub k: T,
    pub beta: Complex<T>,
    pub energy: Complex<T>,
}

/// An ordered sequence of band energies at fixed μ.
///
/// For a `FourPi` loop the samples of the `Plus` loop run over `k ∈ [0, 4π)`
/// and the `Minus` loop holds the same curve shifted by `2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLoop<T> {
    pub mu: T,
    pub band: Band,
    pub samples: Vec<BandSample<T>>,
    pub closure: Closure,
    /// Parameters the loop was generated from; absent for fitted data.
    pub params: Option<Params<T>>,
}

impl<T: Real> BandLoop<T> {
    pub fn energies(&self) -> Vec<Complex<T>> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closure != Closure::Open
    }

    /// Length of the parameter interval covered by the closed loop.
    pub fn period(&self) -> T {
        match self.closure {
            Closure::FourPi => T::two_pi() * T::lit(2.0),
            _ => T::two_pi(),
        }
    }

    /// Energy at an arbitrary `k`, continued along this loop from the nearest
    /// sample. Requires model parameters.
    pub fn energy_at(&self, k: T) -> Result<Complex<T>> {
        let p = self
            .params
            .ok_or_else(|| Error::InvalidArgument("loop has no model parameters".into()))?;
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument("empty loop".into()));
        }
        let period = self.period();
        let k0 = self.samples[0].k;
        let mut rel = (k - k0) % period;
        if rel < T::zero() {
            rel = rel + period;
        }
        let step = period / T::from_usize_lossy(self.samples.len());
        let idx = (rel / step).round().to_usize().unwrap_or(0) % self.samples.len();
        let guide = self.samples[idx].energy;
        let (ep, _) = band_energies(&p, momentum_to_beta(k, self.mu))?;
        Ok(if (ep - guide).norm() <= (ep + guide).norm() {
            ep
        } else {
            -ep
        })
    }
}

/// Samples both band loops at fixed μ on a uniform `k` grid.
///
/// Bands are continued by nearest continuation from `E₊(k=0)` (principal
/// root). If the branch exchanges after one period the loop is reported as
/// `FourPi` and sampled over `[0, 4π)` with `2 n_k` points.
pub fn sample_band_loop<T: Real>(p: &Params<T>, mu: T, n_k: usize) -> Result<[BandLoop<T>; 2]> {
    p.validate()?;
    if n_k < 16 {
        return Err(Error::InvalidArgument(format!("n_k = {n_k} is below the minimum of 16")));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidArgument("mu must be finite".into()));
    }
    let dk = T::two_pi() / T::from_usize_lossy(n_k);
    let first = continue_band(p, mu, T::zero(), dk, n_k + 1, None)?;
    let start = first[0].energy;
    let end = first[n_k].energy;
    let four_pi = (end + start).norm() < (end - start).norm();

    if !four_pi {
        let plus: Vec<_> = first[..n_k].to_vec();
        let minus: Vec<_> = plus
            .iter()
            .map(|s| BandSample {
                energy: -s.energy,
                ..*s
            })
            .collect();
        check_continuity(&plus, true)?;
        return Ok([
            BandLoop {
                mu,
                band: Band::Plus,
                samples: plus,
                closure: Closure::TwoPi,
                params: Some(*p),
            },
            BandLoop {
                mu,
                band: Band::Minus,
                samples: minus,
                closure: Closure::TwoPi,
                params: Some(*p),
            },
        ]);
    }

    let full = continue_band(p, mu, T::zero(), dk, 2 * n_k + 1, None)?;
    let plus: Vec<_> = full[..2 * n_k].to_vec();
    check_continuity(&plus, true)?;
    let mut minus = plus[n_k..].to_vec();
    minus.extend_from_slice(&plus[..n_k]);
    Ok([
        BandLoop {
            mu,
            band: Band::Plus,
            samples: plus,
            closure: Closure::FourPi,
            params: Some(*p),
        },
        BandLoop {
            mu,
            band: Band::Minus,
            samples: minus,
            closure: Closure::FourPi,
            params: Some(*p),
        },
    ])
}

fn continue_band<T: Real>(
    p: &Params<T>,
    mu: T,
    k0: T,
    dk: T,
    count: usize,
    seed: Option<Complex<T>>,
) -> Result<Vec<BandSample<T>>> {
    let mut out: Vec<BandSample<T>> = Vec::with_capacity(count);
    for j in 0..count {
        let k = k0 + dk * T::from_usize_lossy(j);
        let beta = momentum_to_beta(k, mu);
        let (ep, _) = band_energies(p, beta)?;
        let reference = match out.last() {
            Some(prev) => {
                // linear extrapolation from the last two samples reduces
                // wrong-branch picks close to the branch point
                if out.len() >= 2 {
                    prev.energy * T::lit(2.0) - out[out.len() - 2].energy
                } else {
                    prev.energy
                }
            }
            None => seed.unwrap_or(ep),
        };
        let energy = if (ep - reference).norm() <= (ep + reference).norm() {
            ep
        } else {
            -ep
        };
        out.push(BandSample { k, beta, energy });
    }
    Ok(out)
}

/// Rejects steps much larger than the typical step, unless the curve passes
/// next to the branch point `E = 0` where large relative jumps are expected.
fn check_continuity<T: Real>(samples: &[BandSample<T>], closed: bool) -> Result<()> {
    let n = samples.len();
    if n < 3 {
        return Ok(());
    }
    let steps: Vec<T> = (0..n)
        .filter(|&i| closed || i + 1 < n)
        .map(|i| (samples[(i + 1) % n].energy - samples[i].energy).norm())
        .collect();
    let mut sorted = steps.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = sorted[sorted.len() / 2];
    let bound = median * T::lit(10.0) + T::epsilon() * T::lit(100.0);
    for (i, &jump) in steps.iter().enumerate() {
        if jump > bound {
            let a = samples[i].energy.norm();
            let b = samples[(i + 1) % n].energy.norm();
            if a.min(b) <= jump {
                continue;
            }
            return Err(Error::Continuity {
                k: samples[i].k.to_f64().unwrap_or(f64::NAN),
                jump: jump.to_f64().unwrap_or(f64::NAN),
                bound: bound.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

/// Site indices of the open chain: cell `m` (0-based) holds `R` at `2m` and `L` at `2m+1`.
#[inline]
pub fn site_index(cell: usize, side: Side) -> usize {
    match side {
        Side::Right => 2 * cell,
        Side::Left => 2 * cell + 1,
    }
}

/// Real-space Hamiltonian of an open chain with `n_cells` unit cells.
///
/// Each cell couples its `R` and `L` sites with `+i(η-γ)` (R←L) and
/// `-i(η+γ)` (L←R). Neighbouring cells couple symmetrically with `-δ₁`
/// (`R_{m-1}` with `L_m`) and `-δ₂` (`L_{m-1}` with `R_m`).
pub fn build_obc_hamiltonian<T: Real>(p: &Params<T>, n_cells: usize) -> Result<CMatrix<T>> {
    build_chain(p, n_cells, false)
}

/// Periodic ring with the same couplings as [`build_obc_hamiltonian`].
pub fn build_ring_hamiltonian<T: Real>(p: &Params<T>, n_cells: usize) -> Result<CMatrix<T>> {
    build_chain(p, n_cells, true)
}

fn build_chain<T: Real>(p: &Params<T>, n_cells: usize, ring: bool) -> Result<CMatrix<T>> {
    p.validate()?;
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!("n_cells = {n_cells}; at least 2 required")));
    }
    let n = 2 * n_cells;
    let mut h = CMatrix::zeros(n, n);
    let gain_loss_up = c(T::zero(), p.eta - p.gamma);
    let gain_loss_down = c(T::zero(), -(p.eta + p.gamma));
    for m in 0..n_cells {
        let r = site_index(m, Side::Right);
        let l = site_index(m, Side::Left);
        h[(r, l)] = gain_loss_up;
        h[(l, r)] = gain_loss_down;
    }
    let links = if ring { n_cells } else { n_cells - 1 };
    for m in 0..links {
        let next = (m + 1) % n_cells;
        let r0 = site_index(m, Side::Right);
        let l0 = site_index(m, Side::Left);
        let r1 = site_index(next, Side::Right);
        let l1 = site_index(next, Side::Left);
        h[(r0, l1)] = h[(r0, l1)] - cr(p.delta1);
        h[(l1, r0)] = h[(l1, r0)] - cr(p.delta1);
        h[(l0, r1)] = h[(l0, r1)] - cr(p.delta2);
        h[(r1, l0)] = h[(r1, l0)] - cr(p.delta2);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Amplitudes `βᵐ/√N` (right) or `β⁻ᵐ/√N` (left) for `m = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonBlochVector<T> {
    pub beta: Complex<T>,
    pub side: Side,
    pub amplitudes: Vec<Complex<T>>,
}

pub fn nonbloch_basis<T: Real>(beta: Complex<T>, n_sites: usize, side: Side) -> Result<NonBlochVector<T>> {
    check_beta(beta)?;
    if n_sites == 0 {
        return Err(Error::InvalidArgument("n_sites must be positive".into()));
    }
    let step = match side {
        Side::Right => beta,
        Side::Left => beta.inv(),
    };
    let norm = T::from_usize_lossy(n_sites).sqrt().recip();
    let amplitudes = (1..=n_sites)
        .map(|m| step.powi(m as i32) * norm)
        .collect();
    Ok(NonBlochVector {
        beta,
        side,
        amplitudes,
    })
}

/// Biorthogonal pairing `⟨β_L|β'_R⟩ = (1/N) Σ_m (β'/β)^m`, a bilinear sum
/// without complex conjugation (the left vector is already the dual).
pub fn pairing<T: Real>(left: &NonBlochVector<T>, right: &NonBlochVector<T>) -> Result<Complex<T>> {
    if left.side != Side::Left || right.side != Side::Right {
        return Err(Error::InvalidArgument("pairing expects a left and a right vector".into()));
    }
    if left.amplitudes.len() != right.amplitudes.len() {
        return Err(Error::InvalidArgument("vector lengths differ".into()));
    }
    Ok(left
        .amplitudes
        .iter()
        .zip(&right.amplitudes)
        .fold(Complex::zero(), |acc, (a, b)| acc + *a * *b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn p3() -> Params<f64> {
        Params::from_pi_units(0.31, 0.0, 0.25, 0.057)
    }

    #[test]
    fn bloch_entries_at_unit_beta() {
        let m = bloch_matrix(&p3(), Complex64::new(1.0, 0.0)).unwrap();
        assert!((m.e1 - Complex64::new(-0.31 * PI, 0.193 * PI)).norm() < 1e-12);
        assert!((m.e2 - Complex64::new(-0.31 * PI, -0.307 * PI)).norm() < 1e-12);
        assert!((m.e1.re + 0.9739).abs() < 1e-4 && (m.e1.im - 0.6063).abs() < 1e-4);
    }

    #[test]
    fn bands_are_opposite() {
        let (ep, em) = band_energies(&p3(), Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(ep, -em);
        let m = bloch_matrix(&p3(), Complex64::new(1.0, 0.0)).unwrap();
        assert!((ep * ep - m.e1 * m.e2).norm() < 1e-12);
    }

    #[test]
    fn beta_convention() {
        let b = momentum_to_beta(0.0, -0.23);
        assert!((b.re - 0.23f64.exp()).abs() < 1e-15 && b.im.abs() < 1e-15);
        let b = momentum_to_beta(PI / 2.0, 0.0);
        assert!((b - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_beta_rejected() {
        assert_eq!(bloch_matrix(&p3(), Complex64::new(0.0, 0.0)), Err(Error::ZeroBeta));
    }

    #[test]
    fn closure_types() {
        let p = p3();
        let [plus, minus] = sample_band_loop(&p, 0.0, 256).unwrap();
        assert_eq!(plus.closure, Closure::TwoPi);
        assert_eq!(plus.len(), 256);
        assert_eq!(minus.samples[3].energy, -plus.samples[3].energy);
        let [plus, _] = sample_band_loop(&p, -0.48, 256).unwrap();
        assert_eq!(plus.closure, Closure::FourPi);
        assert_eq!(plus.len(), 512);
    }

    #[test]
    fn energy_at_follows_branch() {
        let [plus, _] = sample_band_loop(&p3(), -0.1, 128).unwrap();
        let e = plus.energy_at(plus.samples[10].k).unwrap();
        assert!((e - plus.samples[10].energy).norm() < 1e-12);
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let p = Params::<f64>::from_pi_units(0.13, 0.5, -0.125, 0.036);
        let mu = -0.05;
        let k = 0.7;
        let h = 1e-6;
        let e = |k: f64| band_energies(&p, momentum_to_beta(k, mu)).unwrap().0;
        let fd = (e(k + h) - e(k - h)) / (2.0 * h);
        let v = band_velocity(&p, momentum_to_beta(k, mu), e(k));
        assert!((fd - v).norm() < 1e-6, "{fd} {v}");
    }

    #[test]
    fn obc_matrix_structure() {
        let p = Params::<f64>::from_pi_units(0.13, 0.5, -0.125, 0.036);
        let h = build_obc_hamiltonian(&p, 4).unwrap();
        assert_eq!(h.rows(), 8);
        assert_eq!(h[(1, 0)], Complex64::new(0.0, -(p.eta + p.gamma)));
        assert_eq!(h[(0, 1)], Complex64::new(0.0, p.eta - p.gamma));
        assert_eq!(h[(0, 3)], Complex64::new(-p.delta1, 0.0));
        assert_eq!(h[(3, 0)], Complex64::new(-p.delta1, 0.0));
        assert_eq!(h[(1, 2)], Complex64::new(-p.delta2, 0.0));
        assert_eq!(h[(2, 1)], Complex64::new(-p.delta2, 0.0));
        assert_eq!(h[(0, 7)], Complex64::new(0.0, 0.0));
        let ring = build_ring_hamiltonian(&p, 4).unwrap();
        assert_eq!(ring[(6, 1)], Complex64::new(-p.delta1, 0.0));
        assert_eq!(ring[(7, 0)], Complex64::new(-p.delta2, 0.0));
        assert!(build_obc_hamiltonian(&p, 1).is_err());
    }

    #[test]
    fn basis_amplitudes() {
        let v = nonbloch_basis(Complex64::new(1.0, 0.0), 4, Side::Left).unwrap();
        assert!(v.amplitudes.iter().all(|a| (a - Complex64::new(0.5, 0.0)).norm() < 1e-15));
        let b = Complex64::new(0.3, 1.1);
        let r = nonbloch_basis(b, 5, Side::Right).unwrap();
        assert!((r.amplitudes[0] - b / 5f64.sqrt()).norm() < 1e-15);
        let l = nonbloch_basis(b, 5, Side::Left).unwrap();
        assert!((pairing(&l, &r).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pairing_is_orthonormal_on_roots_of_unity() {
        let n = 12;
        let r = 1.3;
        let b = |j: usize| Complex64::from_polar(r, 2.0 * PI * j as f64 / n as f64);
        for i in 0..n {
            let left = nonbloch_basis(b(i), n, Side::Left).unwrap();
            for j in 0..n {
                let right = nonbloch_basis(b(j), n, Side::Right).unwrap();
                let v = pairing(&left, &right).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_model_agrees() {
        let p32: Params<f32> = p3().cast();
        let (e32, _) = band_energies(&p32, Complex::new(1.0f32, 0.0)).unwrap();
        let (e64, _) = band_energies(&p3(), Complex64::new(1.0, 0.0)).unwrap();
        assert!((e32.re as f64 - e64.re).abs() < 1e-5);
    }
}
