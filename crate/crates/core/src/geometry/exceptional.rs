use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::quadratic_roots;
use crate::model::Params;
use crate::scalar::{c, cr, wrap_two_pi, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Factor {
    E1,
    E2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceptionalPointReport<T> {
    pub which_factor: Factor,
    pub beta: Complex<T>,
    pub mu: T,
    pub k: T,
}

/// Quadratic coefficients `(a, b, c)` of `β·E_f(β) = aβ² + bβ + c`.
fn factor_coefficients<T: Real>(p: &Params<T>, f: Factor) -> [Complex<T>; 3] {
    match f {
        Factor::E1 => [cr(-p.delta2), c(T::zero(), p.eta - p.gamma), cr(-p.delta1)],
        Factor::E2 => [cr(-p.delta1), c(T::zero(), -(p.eta + p.gamma)), cr(-p.delta2)],
    }
}

fn roots_of<T: Real>(coeffs: [Complex<T>; 3]) -> Vec<Complex<T>> {
    let [a, b, c0] = coeffs;
    let mut roots = if !a.is_zero() {
        quadratic_roots(a, b, c0).to_vec()
    } else if !b.is_zero() {
        vec![-c0 / b]
    } else {
        vec![]
    };
    // β = 0 is not a point of the complex-momentum plane
    roots.retain(|r| !r.is_zero() && r.re.is_finite() && r.im.is_finite());
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let f = a * *r * *r + b * *r + c0;
            let df = a * *r * T::lit(2.0) + b;
            if df.is_zero() {
                break;
            }
            *r = *r - f / df;
        }
    }
    roots
}

/// All complex momenta at which `E₁(β) = 0` or `E₂(β) = 0`, sorted by μ.
pub fn find_exceptional_mu<T: Real>(p: &Params<T>) -> Result<Vec<ExceptionalPointReport<T>>> {
    p.validate()?;
    let mut out = Vec::new();
    for f in [Factor::E1, Factor::E2] {
        let coeffs = factor_coefficients(p, f);
        if coeffs.iter().all(|z| z.is_zero()) {
            return Err(Error::DegenerateModel(format!(
                "{f:?} vanishes identically for these parameters"
            )));
        }
        for beta in roots_of(coeffs) {
            out.push(ExceptionalPointReport {
                which_factor: f,
                beta,
                mu: -beta.norm().ln(),
                k: wrap_two_pi(-beta.arg()),
            });
        }
    }
    out.sort_by(|a, b| a.mu.partial_cmp(&b.mu).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

impl<T: Real> ExceptionalPointReport<T> {
    /// `|E_f(β)|` at the reported root.
    pub fn residual(&self, p: &Params<T>) -> T {
        match self.which_factor {
            Factor::E1 => p.e1(self.beta).norm(),
            Factor::E2 => p.e2(self.beta).norm(),
        }
    }
}

/// Distance from μ to the nearest EP radius, with that radius.
pub fn nearest_ep<T: Real>(reports: &[ExceptionalPointReport<T>], mu: T) -> Option<(T, T)> {
    reports
        .iter()
        .map(|r| ((r.mu - mu).abs(), r.mu))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::band_energies;

    #[test]
    fn fig3_closed_forms() {
        let p = Params::<f64>::from_pi_units(0.31, 0.0, 0.25, 0.057);
        let eps = find_exceptional_mu(&p).unwrap();
        assert_eq!(eps.len(), 2);
        let a = p.eta - p.gamma;
        let b = p.eta + p.gamma;
        assert!((eps[0].mu + (p.delta1 / a).ln()).abs() < 1e-14);
        assert_eq!(eps[0].which_factor, Factor::E1);
        assert!((eps[1].mu + (b / p.delta1).ln()).abs() < 1e-14);
        for e in &eps {
            assert!(e.residual(&p) < 1e-12);
            let (ep, em) = band_energies(&p, e.beta).unwrap();
            assert!((ep - em).norm() < 1e-8);
        }
    }

    #[test]
    fn long_range_has_four() {
        let p = Params::<f64>::from_pi_units(0.13, 0.5, -0.125, 0.036);
        let eps = find_exceptional_mu(&p).unwrap();
        assert_eq!(eps.len(), 4);
        assert!(eps.iter().all(|e| e.residual(&p) < 1e-10));
    }

    #[test]
    fn identically_zero_factor() {
        let p = Params::<f64>::new(0.0, 0.0, 0.3, 0.3);
        assert!(matches!(find_exceptional_mu(&p), Err(Error::DegenerateModel(_))));
        let p = Params::<f64>::new(1.0, 0.0, 0.3, 0.3);
        assert_eq!(find_exceptional_mu(&p).unwrap().len(), 1);
    }
}
