//! Dense complex matrices and a non-symmetric eigenvalue solver.
//!
//! The solver follows the classical route: diagonal balancing, Householder
//! reduction to upper Hessenberg form, then implicitly shifted single-shift QR
//! sweeps with Wilkinson shifts on the active block. Eigenvectors, when
//! requested, come from inverse iteration on the Hessenberg matrix and are
//! mapped back through the Householder reflectors and the balancing scale.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{abs1, cr, Real};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Complex::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// Number of entries whose modulus exceeds `tol`.
    pub fn count_nonzeros(&self, tol: T) -> usize {
        self.data.iter().filter(|z| z.norm() > tol).count()
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition output.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T> {
    pub values: Vec<Complex<T>>,
    /// Right eigenvectors (unit 2-norm), one per eigenvalue, when requested.
    pub vectors: Option<Vec<Vec<Complex<T>>>>,
    /// Largest relative residual `‖Av − λv‖ / (‖A‖_F ‖v‖)` over the returned pairs.
    pub max_residual: Option<T>,
    /// Ratio between the largest and smallest balancing scale factors.
    pub balance_range: T,
}

/// Options for [`eigen`].
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub balance: bool,
    pub vectors: bool,
    pub max_sweeps_per_eigenvalue: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            balance: true,
            vectors: false,
            max_sweeps_per_eigenvalue: 60,
        }
    }
}

/// Eigenvalues of a square complex matrix.
pub fn eigenvalues<T: Real>(a: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    Ok(eigen(a, EigenOptions::default())?.values)
}

/// Eigenvalues and (optionally) right eigenvectors of a square complex matrix.
pub fn eigen<T: Real>(a: &CMatrix<T>, opts: EigenOptions) -> Result<EigenDecomposition<T>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigen: matrix must be square".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: opts.vectors.then(Vec::new),
            max_residual: None,
            balance_range: T::one(),
        });
    }
    if a.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument("eigen: non-finite matrix entry".into()));
    }

    let mut h = a.clone();
    let scale = if opts.balance {
        balance(&mut h)
    } else {
        vec![T::one(); n]
    };
    let balance_range = {
        let (lo, hi) = scale
            .iter()
            .fold((T::infinity(), T::zero()), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        hi / lo
    };

    let reflectors = hessenberg(&mut h);
    let hess = h.clone();
    let values = hessenberg_qr(&mut h, opts.max_sweeps_per_eigenvalue)?;

    if !opts.vectors {
        return Ok(EigenDecomposition {
            values,
            vectors: None,
            max_residual: None,
            balance_range,
        });
    }

    let a_norm = a.frobenius_norm().max(T::min_positive_value());
    let mut vectors = Vec::with_capacity(n);
    let mut max_residual = T::zero();
    for &lambda in &values {
        let y = inverse_iteration(&hess, lambda);
        let mut v = apply_reflectors(&reflectors, y);
        for (vi, &si) in v.iter_mut().zip(&scale) {
            *vi = *vi * si;
        }
        let norm = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if norm > T::zero() && norm.is_finite() {
            for vi in v.iter_mut() {
                *vi = *vi / norm;
            }
        }
        let av = a.mul_vec(&v);
        let r = av
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (x, y)| acc + (*x - *y * lambda).norm_sqr())
            .sqrt()
            / a_norm;
        let r = if r.is_finite() { r } else { T::infinity() };
        max_residual = max_residual.max(r);
        vectors.push(v);
    }
    Ok(EigenDecomposition {
        values,
        vectors: Some(vectors),
        max_residual: Some(max_residual),
        balance_range,
    })
}

/// Diagonal similarity scaling by powers of two that equalizes row and column
/// norms. Returns the scale vector `d` such that the balanced matrix is
/// `D⁻¹ A D`.
fn balance<T: Real>(a: &mut CMatrix<T>) -> Vec<T> {
    let n = a.rows();
    let radix = T::lit(2.0);
    let radix2 = radix * radix;
    let mut d = vec![T::one(); n];
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 200 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = T::zero();
            let mut row = T::zero();
            for j in 0..n {
                if j != i {
                    col = col + abs1(a[(j, i)]);
                    row = row + abs1(a[(i, j)]);
                }
            }
            if col == T::zero() || row == T::zero() {
                continue;
            }
            let total = col + row;
            let mut f = T::one();
            let mut g = row / radix;
            let mut c = col;
            while c < g {
                f = f * radix;
                c = c * radix2;
            }
            g = row * radix;
            while c > g {
                f = f / radix;
                c = c / radix2;
            }
            if (col * f + row / f) < T::lit(0.95) * total {
                converged = false;
                d[i] = d[i] * f;
                for j in 0..n {
                    a[(j, i)] = a[(j, i)] * f;
                    a[(i, j)] = a[(i, j)] / f;
                }
            }
        }
    }
    d
}

/// Householder reflector `I − τ v vᴴ` acting on rows/cols `start..`.
struct Reflector<T> {
    start: usize,
    v: Vec<Complex<T>>,
    tau: T,
}

/// In-place reduction to upper Hessenberg form. Returns the reflectors whose
/// product `Q = P₁ P₂ …` satisfies `A = Q H Qᴴ`.
fn hessenberg<T: Real>(a: &mut CMatrix<T>) -> Vec<Reflector<T>> {
    let n = a.rows();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    for col in 0..n - 2 {
        let start = col + 1;
        let norm = (start..n)
            .fold(T::zero(), |acc, i| acc + a[(i, col)].norm_sqr())
            .sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = a[(start, col)];
        let phase = if x0.norm() > T::zero() {
            x0 / x0.norm()
        } else {
            Complex::one()
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex<T>> = (start..n).map(|i| a[(i, col)]).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        if vnorm2 == T::zero() {
            continue;
        }
        let tau = T::lit(2.0) / vnorm2;
        // left: A[start.., :] -= tau v (vᴴ A[start.., :])
        for j in 0..n {
            let mut s = Complex::zero();
            for (idx, i) in (start..n).enumerate() {
                s = s + v[idx].conj() * a[(i, j)];
            }
            s = s * tau;
            for (idx, i) in (start..n).enumerate() {
                a[(i, j)] = a[(i, j)] - v[idx] * s;
            }
        }
        // right: A[:, start..] -= tau (A[:, start..] v) vᴴ
        for i in 0..n {
            let mut s = Complex::zero();
            for (idx, j) in (start..n).enumerate() {
                s = s + a[(i, j)] * v[idx];
            }
            s = s * tau;
            for (idx, j) in (start..n).enumerate() {
                a[(i, j)] = a[(i, j)] - s * v[idx].conj();
            }
        }
        for i in start + 1..n {
            a[(i, col)] = Complex::zero();
        }
        out.push(Reflector { start, v, tau });
    }
    out
}

fn apply_reflectors<T: Real>(reflectors: &[Reflector<T>], mut y: Vec<Complex<T>>) -> Vec<Complex<T>> {
    // x = P₁ P₂ … P_m y, applied right to left
    for r in reflectors.iter().rev() {
        let mut s = Complex::zero();
        for (idx, vi) in r.v.iter().enumerate() {
            s = s + vi.conj() * y[r.start + idx];
        }
        s = s * r.tau;
        for (idx, vi) in r.v.iter().enumerate() {
            y[r.start + idx] = y[r.start + idx] - *vi * s;
        }
    }
    y
}

/// Complex Givens rotation `[[c, s], [-s̄, c]]` with `c` real, mapping `(a, b)` to `(r, 0)`.
#[inline]
fn givens<T: Real>(a: Complex<T>, b: Complex<T>) -> (T, Complex<T>) {
    let na = a.norm();
    let nb = b.norm();
    if nb == T::zero() {
        return (T::one(), Complex::zero());
    }
    if na == T::zero() {
        return (T::zero(), Complex::one());
    }
    let norm = na.hypot(nb);
    let c = na / norm;
    let s = (a / na) * b.conj() / norm;
    (c, s)
}

/// Eigenvalues of an upper Hessenberg matrix by implicit single-shift QR.
/// The matrix is overwritten.
fn hessenberg_qr<T: Real>(h: &mut CMatrix<T>, max_sweeps: usize) -> Result<Vec<Complex<T>>> {
    let n = h.rows();
    let eps = T::epsilon();
    let small = T::min_positive_value() / eps;
    let mut values = vec![Complex::zero(); n];
    let mut hi = n; // active block is lo..hi (exclusive)
    let mut total_iters = 0usize;
    let mut iters_since_deflation = 0usize;

    while hi > 0 {
        if hi == 1 {
            values[0] = h[(0, 0)];
            break;
        }
        // locate the start of the unreduced block ending at hi-1
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = abs1(h[(lo, lo - 1)]);
            let mut diag = abs1(h[(lo - 1, lo - 1)]) + abs1(h[(lo, lo)]);
            if diag == T::zero() {
                diag = (lo..hi).fold(T::zero(), |acc, j| acc + abs1(h[(lo, j)]));
            }
            if sub <= (eps * diag).max(small) {
                h[(lo, lo - 1)] = Complex::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            values[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            iters_since_deflation = 0;
            continue;
        }
        if iters_since_deflation > max_sweeps {
            return Err(Error::EigenNonConvergence {
                iterations: total_iters,
            });
        }
        iters_since_deflation += 1;
        total_iters += 1;

        let m = hi - 1;
        let shift = if iters_since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(m, m)] + cr(T::lit(0.75) * abs1(h[(m, m - 1)]))
        } else {
            wilkinson_shift(h[(m - 1, m - 1)], h[(m - 1, m)], h[(m, m - 1)], h[(m, m)])
        };

        // first rotation from the shifted leading column
        let (mut c, mut s) = givens(h[(lo, lo)] - shift, h[(lo + 1, lo)]);
        for k in lo..m {
            if k > lo {
                let (cc, ss) = givens(h[(k, k - 1)], h[(k + 1, k - 1)]);
                c = cc;
                s = ss;
            }
            let jstart = if k > lo { k - 1 } else { lo };
            // rows k, k+1
            for j in jstart..hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + y * s;
                h[(k + 1, j)] = -x * s.conj() + y * c;
            }
            if k > lo {
                h[(k + 1, k - 1)] = Complex::zero();
            }
            // cols k, k+1
            let iend = (k + 3).min(hi);
            for i in lo..iend {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
    }
    Ok(values)
}

fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let half = T::lit(0.5);
    let tr_half = (a + d) * half;
    let diff_half = (a - d) * half;
    let disc = (diff_half * diff_half + b * c).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Two steps of inverse iteration on a Hessenberg matrix for a (converged)
/// eigenvalue. Returns an unnormalised vector.
fn inverse_iteration<T: Real>(hess: &CMatrix<T>, lambda: Complex<T>) -> Vec<Complex<T>> {
    let n = hess.rows();
    let norm = hess.frobenius_norm().max(T::min_positive_value());
    let perturb = norm * T::epsilon() * T::lit(8.0);
    let mut shifted = hess.clone();
    for i in 0..n {
        shifted[(i, i)] = shifted[(i, i)] - lambda - cr(perturb);
    }
    let lu = HessenbergLu::factor(shifted, norm * T::epsilon());
    let mut x: Vec<Complex<T>> = (0..n)
        .map(|i| cr(T::one() / T::from_usize_lossy(i + 1).sqrt()))
        .collect();
    for _ in 0..3 {
        x = lu.solve(x);
        let m = x.iter().fold(T::zero(), |acc, z| acc.max(abs1(*z)));
        if m > T::zero() && m.is_finite() {
            for xi in x.iter_mut() {
                *xi = *xi / m;
            }
        } else {
            break;
        }
    }
    x
}

/// LU factorization with partial pivoting specialised to Hessenberg structure
/// (each elimination step only touches one subdiagonal entry).
struct HessenbergLu<T> {
    lu: CMatrix<T>,
    swapped: Vec<bool>,
}

impl<T: Real> HessenbergLu<T> {
    fn factor(mut a: CMatrix<T>, tiny: T) -> Self {
        let n = a.rows();
        let mut swapped = vec![false; n];
        for k in 0..n.saturating_sub(1) {
            if a[(k + 1, k)].norm() > a[(k, k)].norm() {
                swapped[k] = true;
                for j in k..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(k + 1, j)];
                    a[(k + 1, j)] = t;
                }
            }
            if a[(k, k)].norm() <= tiny {
                a[(k, k)] = cr(tiny.max(T::min_positive_value()));
            }
            let l = a[(k + 1, k)] / a[(k, k)];
            a[(k + 1, k)] = l;
            for j in k + 1..n {
                let u = a[(k, j)];
                a[(k + 1, j)] = a[(k + 1, j)] - l * u;
            }
        }
        if n > 0 && a[(n - 1, n - 1)].norm() <= tiny {
            a[(n - 1, n - 1)] = cr(tiny.max(T::min_positive_value()));
        }
        Self { lu: a, swapped }
    }

    fn solve(&self, mut b: Vec<Complex<T>>) -> Vec<Complex<T>> {
        let n = b.len();
        for k in 0..n.saturating_sub(1) {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let l = self.lu[(k + 1, k)];
            b[k + 1] = b[k + 1] - l * b[k];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * b[j];
            }
            b[i] = s / self.lu[(i, i)];
        }
        b
    }
}

/// Roots of the polynomial `Σ coeffs[i] xⁱ` (ascending order). Leading zero
/// coefficients are stripped; roots at the origin are included.
pub fn polynomial_roots<T: Real>(coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let mut deg = coeffs.len();
    while deg > 0 && coeffs[deg - 1] == Complex::zero() {
        deg -= 1;
    }
    if deg == 0 {
        return Err(Error::DegenerateModel("identically zero polynomial".into()));
    }
    let deg = deg - 1;
    match deg {
        0 => Ok(vec![]),
        1 => Ok(vec![-coeffs[0] / coeffs[1]]),
        2 => Ok(quadratic_roots(coeffs[2], coeffs[1], coeffs[0]).to_vec()),
        _ => {
            let lead = coeffs[deg];
            let mut comp = CMatrix::zeros(deg, deg);
            for i in 1..deg {
                comp[(i, i - 1)] = Complex::one();
            }
            for i in 0..deg {
                comp[(i, deg - 1)] = -coeffs[i] / lead;
            }
            let mut roots = eigenvalues(&comp)?;
            for r in roots.iter_mut() {
                *r = newton_polish(coeffs, deg, *r);
            }
            Ok(roots)
        }
    }
}

/// Roots of `a x² + b x + c` using the cancellation-free formulation.
pub fn quadratic_roots<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>) -> [Complex<T>; 2] {
    let disc = (b * b - a * c * T::lit(4.0)).sqrt();
    // choose the sign that avoids cancellation in -b ∓ disc
    let q = if (b.conj() * disc).re >= T::zero() {
        (b + disc) * T::lit(-0.5)
    } else {
        (b - disc) * T::lit(-0.5)
    };
    if q == Complex::zero() {
        return [Complex::zero(), Complex::zero()];
    }
    [q / a, c / q]
}

fn newton_polish<T: Real>(coeffs: &[Complex<T>], deg: usize, mut x: Complex<T>) -> Complex<T> {
    for _ in 0..3 {
        let mut p = coeffs[deg];
        let mut dp = Complex::zero();
        for i in (0..deg).rev() {
            dp = dp * x + p;
            p = p * x + coeffs[i];
        }
        if dp.norm() == T::zero() {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        x = x - step;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn diagonal_and_triangular() {
        let mut a = CMatrix::<f64>::zeros(3, 3);
        a[(0, 0)] = c64(1.0, 1.0);
        a[(1, 1)] = c64(-2.0, 0.0);
        a[(2, 2)] = c64(0.5, -3.0);
        a[(0, 2)] = c64(7.0, 0.0);
        let ev = sorted(eigenvalues(&a).unwrap());
        assert!((ev[0] - c64(-2.0, 0.0)).norm() < 1e-14);
        assert!((ev[1] - c64(0.5, -3.0)).norm() < 1e-14);
        assert!((ev[2] - c64(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn jordan_like_rotation() {
        // real rotation generator has eigenvalues ±i
        let a = CMatrix::from_row_major(2, 2, vec![c64(0.0, 0.0), c64(-1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]).unwrap();
        let ev = sorted(eigenvalues(&a).unwrap());
        assert!((ev[0] - c64(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - c64(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn residuals_small_for_random_matrix() {
        let n = 30;
        let mut a = CMatrix::<f64>::zeros(n, n);
        let mut s = 12345u64;
        for i in 0..n {
            for j in 0..n {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let y = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
                a[(i, j)] = c64(x, y);
            }
        }
        let dec = eigen(&a, EigenOptions { vectors: true, ..Default::default() }).unwrap();
        assert_eq!(dec.values.len(), n);
        assert!(dec.max_residual.unwrap() < 1e-12, "{:?}", dec.max_residual);
        let trace: Complex64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum: Complex64 = dec.values.iter().sum();
        assert!((trace - sum).norm() < 1e-10);
    }

    #[test]
    fn polynomial_roots_cubic() {
        // (x-1)(x+2)(x-3i) = x³ + (1-3i)x² + (-2-3i)x + 6i
        let coeffs = [c64(0.0, 6.0), c64(-2.0, -3.0), c64(1.0, -3.0), c64(1.0, 0.0)];
        let roots = polynomial_roots(&coeffs).unwrap();
        for expected in [c64(1.0, 0.0), c64(-2.0, 0.0), c64(0.0, 3.0)] {
            assert!(roots.iter().any(|r| (r - expected).norm() < 1e-12), "{roots:?}");
        }
    }

    #[test]
    fn quadratic_roots_accurate_for_tiny_c() {
        let r = quadratic_roots(c64(1.0, 0.0), c64(1e8, 0.0), c64(1.0, 0.0));
        let small = if r[0].norm() < r[1].norm() { r[0] } else { r[1] };
        assert!((small.re + 1e-8).abs() < 1e-20);
    }

    #[test]
    fn zero_polynomial_is_degenerate() {
        assert!(polynomial_roots::<f64>(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }
}
