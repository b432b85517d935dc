use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigen, polynomial_roots, EigenOptions};
use crate::model::{build_obc_hamiltonian, Params};
use crate::scalar::{c, cr, Real};

pub const DEFAULT_CELLS: usize = 40;
pub const MAX_CELLS: usize = 200;

/// Largest accepted `‖Hv − λv‖ / ‖H‖_F` per eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Balancing scale range beyond which a conditioning warning is attached.
pub const CONDITIONING_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObcMethod {
    Diagonalization,
    IntersectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObcSpectrum<T> {
    pub eigenvalues: Vec<Complex<T>>,
    pub n_cells: usize,
    pub method: ObcMethod,
    pub max_residual: Option<T>,
    pub warning: Option<String>,
}

/// Eigenvalues of the open chain, sorted by real part then imaginary part.
pub fn obc_spectrum<T: Real>(p: &Params<T>, n_cells: usize) -> Result<ObcSpectrum<T>> {
    if n_cells > MAX_CELLS {
        return Err(Error::InvalidArgument(format!(
            "n_cells = {n_cells} exceeds the cap of {MAX_CELLS}"
        )));
    }
    let h = build_obc_hamiltonian(p, n_cells)?;
    let dec = eigen(
        &h,
        EigenOptions {
            vectors: true,
            ..Default::default()
        },
    )?;
    let residual = dec.max_residual.unwrap_or_else(T::zero);
    if !(residual < T::lit(RESIDUAL_TOLERANCE)) {
        return Err(Error::EigenResidual {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    let warning = (dec.balance_range > T::lit(CONDITIONING_LIMIT)).then(|| {
        format!(
            "matrix is badly scaled (balancing range {:.2e}); eigenvalues may be perturbed",
            dec.balance_range
        )
    });
    let mut eigenvalues = dec.values;
    sort_spectrum(&mut eigenvalues);
    Ok(ObcSpectrum {
        eigenvalues,
        n_cells,
        method: ObcMethod::Diagonalization,
        max_residual: Some(residual),
        warning,
    })
}

pub fn sort_spectrum<T: Real>(values: &mut [Complex<T>]) {
    values.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// `max_{a∈from} min_{b∈to} |a − b|`.
pub fn directed_hausdorff<T: Real>(from: &[Complex<T>], to: &[Complex<T>]) -> T {
    from.iter()
        .map(|a| to.iter().map(|b| (*a - *b).norm()).fold(T::infinity(), T::min))
        .fold(T::zero(), T::max)
}

pub fn hausdorff<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Gap `ln(|β_{p+1}| / |β_p|)` between the middle roots of `β^p · det[E − H(β)]`,
/// `p` being the pole order. Zero (to rounding) exactly on the bulk OBC
/// spectrum in the large-chain limit; positive for isolated modes.
pub fn obc_root_gap<T: Real>(p: &Params<T>, energy: Complex<T>) -> Result<T> {
    // Laurent coefficients of E₁ and E₂ for powers β^-1, β^0, β^1
    let a = [cr(-p.delta1), c(T::zero(), p.eta - p.gamma), cr(-p.delta2)];
    let b = [cr(-p.delta2), c(T::zero(), -(p.eta + p.gamma)), cr(-p.delta1)];
    // β²·(E² − E₁E₂), ascending powers 0..=4
    let mut coeffs: [Complex<T>; 5] = [Complex::zero(); 5];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            coeffs[i + j] = coeffs[i + j] - *ai * *bj;
        }
    }
    coeffs[2] = coeffs[2] + energy * energy;
    let zeros_at_origin = coeffs.iter().take_while(|z| z.is_zero()).count();
    if zeros_at_origin == coeffs.len() {
        return Err(Error::DegenerateModel("characteristic polynomial vanishes".into()));
    }
    let pole_order = 2 - zeros_at_origin.min(2);
    let mut roots = polynomial_roots(&coeffs[zeros_at_origin..])?;
    roots.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal));
    if pole_order == 0 || pole_order >= roots.len() + 1 || roots.len() < 2 {
        return Err(Error::DegenerateModel("no interior root pair".into()));
    }
    let inner = roots[pole_order - 1].norm();
    let outer = roots[pole_order].norm();
    Ok((outer / inner).ln())
}
