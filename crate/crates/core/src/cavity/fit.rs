//! Inversion of transmission traces to complex band energies.
//!
//! The full two-band intensity `s·|G|²` is fitted by Levenberg–Marquardt on
//! logarithmic residuals, which makes multiplicative detector noise
//! homoscedastic across the trace.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::cavity::green::CavityParams;
use crate::cavity::synth::TransmissionTrace;
use crate::error::{Error, Result};
use crate::model::Band;
use crate::scalar::wrap_pi;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitInit {
    Auto,
    Explicit([Complex64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub band: Band,
    /// Real part mapped to `(-π, π]`.
    pub re_e: f64,
    pub im_e: f64,
    /// Relative residual `‖I_model − I_data‖ / ‖I_data‖` of the whole fit.
    pub fit_residual: f64,
    /// Variances of `(Re E₊, Im E₊, Re E₋, Im E₋)`.
    pub covariance_diag: [f64; 4],
}

impl PeakEstimate {
    pub fn energy(&self) -> Complex64 {
        Complex64::new(self.re_e, self.im_e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutcome {
    pub peaks: [PeakEstimate; 2],
    /// The two resonances could not be resolved and share one energy.
    pub merged: bool,
    pub warning: Option<String>,
    pub scale: f64,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 400;

struct Problem<'a> {
    phases: Vec<f64>,
    data: &'a [f64],
    log_data: Vec<f64>,
    eps: f64,
    t: f64,
}

/// Expands reduced parameters to `[re₁, im₁, re₂, im₂, ln s]`.
fn expand(theta: &[f64]) -> [f64; 5] {
    match theta.len() {
        3 => [theta[0], theta[1], theta[0], theta[1], theta[2]],
        _ => [theta[0], theta[1], theta[2], theta[3], theta[4]],
    }
}

impl Problem<'_> {
    fn stable(&self, theta: &[f64]) -> bool {
        let f = expand(theta);
        let limit = -self.t.ln();
        f.iter().all(|x| x.is_finite()) && f[1] < limit && f[3] < limit
    }

    /// `(|G|², ∂|G|²/∂(re₁, im₁, re₂, im₂))` at one phase.
    fn green(&self, f: &[f64; 5], phase: f64) -> (f64, [f64; 4]) {
        let mut g = Complex64::new(0.0, 0.0);
        let mut dg = [Complex64::new(0.0, 0.0); 2];
        for s in 0..2 {
            let (re, im) = (f[2 * s], f[2 * s + 1]);
            let u = Complex64::from_polar(self.t * im.exp(), phase - re);
            let inv = (Complex64::new(1.0, 0.0) - u).inv();
            g += inv;
            dg[s] = Complex64::new(0.0, -1.0) * u * inv * inv;
        }
        let gc = g.conj();
        let d = |z: Complex64| 2.0 * (gc * z).re;
        let i = Complex64::new(0.0, 1.0);
        (g.norm_sqr(), [d(dg[0]), d(i * dg[0]), d(dg[1]), d(i * dg[1])])
    }

    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let f = expand(theta);
        let s = f[4].exp();
        self.phases
            .iter()
            .zip(&self.log_data)
            .map(|(&ph, &ld)| (s * self.green(&f, ph).0 + self.eps).ln() - ld)
            .collect()
    }

    fn jacobian(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let f = expand(theta);
        let s = f[4].exp();
        self.phases
            .iter()
            .map(|&ph| {
                let (g2, dg2) = self.green(&f, ph);
                let denom = s * g2 + self.eps;
                let full = [
                    s * dg2[0] / denom,
                    s * dg2[1] / denom,
                    s * dg2[2] / denom,
                    s * dg2[3] / denom,
                    s * g2 / denom,
                ];
                if theta.len() == 3 {
                    vec![full[0] + full[2], full[1] + full[3], full[4]]
                } else {
                    full.to_vec()
                }
            })
            .collect()
    }

    fn relative_residual(&self, theta: &[f64]) -> f64 {
        let f = expand(theta);
        let s = f[4].exp();
        let mut num = 0.0;
        let mut den = 0.0;
        for (&ph, &d) in self.phases.iter().zip(self.data) {
            let m = s * self.green(&f, ph).0;
            num += (m - d) * (m - d);
            den += d * d;
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normal_equations(jac: &[Vec<f64>], r: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = jac.first().map_or(0, |row| row.len());
    let mut a = vec![vec![0.0; n]; n];
    let mut g = vec![0.0; n];
    for (row, &ri) in jac.iter().zip(r) {
        for i in 0..n {
            g[i] += row[i] * ri;
            for j in i..n {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    (a, g)
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

/// Levenberg–Marquardt with Marquardt diagonal scaling. Returns the final
/// parameters and the iteration count.
fn levenberg_marquardt(problem: &Problem, mut theta: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let mut r = problem.residuals(&theta);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::FitNonConvergence("initial guess gives a non-finite cost".into()));
    }
    let mut lambda = 1e-3;
    for it in 0..MAX_ITERATIONS {
        let jac = problem.jacobian(&theta);
        let (a, g) = normal_equations(&jac, &r);
        let gnorm = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if gnorm < 1e-15 {
            return Ok((theta, it));
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-12);
            }
            let Some(step) = solve(damped, g.iter().map(|x| -x).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, d)| x + d).collect();
            if !problem.stable(&trial) {
                lambda *= 10.0;
                continue;
            }
            let rt = problem.residuals(&trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                let small_step = step
                    .iter()
                    .zip(&theta)
                    .all(|(d, x)| d.abs() <= 1e-14 * (1.0 + x.abs()));
                let small_gain = c - ct <= 1e-16 * c.max(f64::MIN_POSITIVE);
                theta = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 5.0).max(1e-15);
                accepted = true;
                if small_step || (small_gain && c < 1e-24) {
                    return Ok((theta, it + 1));
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return Ok((theta, it + 1));
        }
    }
    Err(Error::FitNonConvergence(format!(
        "no convergence after {MAX_ITERATIONS} iterations (cost {c:.3e})"
    )))
}

/// Half width at half maximum (in phase) of a single resonance with `ρ = t e^{Im E}`.
fn hwhm(rho: f64) -> f64 {
    let c = 2.0 - (rho * rho + 1.0) / (2.0 * rho);
    c.clamp(-1.0, 1.0).acos()
}

/// `ρ` of a single resonance whose half width at half maximum is `delta`.
fn rho_from_hwhm(delta: f64) -> f64 {
    let c = delta.cos();
    let b = 2.0 - c;
    b - (b * b - 1.0).max(0.0).sqrt()
}

struct PeakGuess {
    phase: f64,
    height: f64,
    hwhm: f64,
}

fn smooth(data: &[f64], half: usize) -> Vec<f64> {
    let n = data.len();
    if half == 0 {
        return data.to_vec();
    }
    let w = (2 * half + 1) as f64;
    (0..n)
        .map(|i| (0..=2 * half).map(|o| data[(i + n + o - half) % n]).sum::<f64>() / w)
        .collect()
}

/// Circular half-maximum extent `(left, right)` in samples around index `i`.
fn half_extent(s: &[f64], i: usize, stop: Option<&dyn Fn(usize) -> bool>) -> (usize, usize) {
    let n = s.len();
    let half = 0.5 * s[i];
    let mut l = 0;
    while l < n / 2 && s[(i + n - l - 1) % n] > half && !stop.is_some_and(|f| f((i + n - l - 1) % n)) {
        l += 1;
    }
    let mut r = 0;
    while r < n / 2 && s[(i + r + 1) % n] > half && !stop.is_some_and(|f| f((i + r + 1) % n)) {
        r += 1;
    }
    (l, r)
}

fn pick_peaks(phases: &[f64], data: &[f64]) -> Vec<PeakGuess> {
    let n = data.len();
    let dphi = TAU / n as f64;
    let s = smooth(data, n / 1024);
    let i1 = (0..n).max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(std::cmp::Ordering::Equal)).unwrap_or(0);
    let (l1, r1) = half_extent(&s, i1, None);
    let in_first = |j: usize| {
        let d = (j + n - i1) % n;
        d <= r1 * 2 + 1 || n - d <= l1 * 2 + 1
    };
    let guess = |i: usize, l: usize, r: usize| PeakGuess {
        phase: phases[i],
        height: s[i],
        hwhm: ((l + r) as f64 * 0.5 + 0.5) * dphi,
    };
    let mut out = vec![guess(i1, l1, r1)];

    let mut sorted = s.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = sorted[n / 2];
    let window = (l1 + r1).max(2);
    let second = (0..n)
        .filter(|&j| !in_first(j))
        .filter(|&j| (1..=window).all(|o| s[j] >= s[(j + o) % n] && s[j] >= s[(j + n - o) % n]))
        .filter(|&j| s[j] > 1.5 * median)
        .max_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(std::cmp::Ordering::Equal));
    if let Some(i2) = second {
        let (l2, r2) = half_extent(&s, i2, Some(&in_first));
        out.push(guess(i2, l2, r2));
    }
    out
}

fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

/// Fits the two band energies to a transmission trace covering at least one
/// free spectral range.
pub fn extract_eigenenergies(trace: &TransmissionTrace, cav: &CavityParams, init: FitInit) -> Result<FitOutcome> {
    cav.validate()?;
    let m = trace.detunings.len();
    if m < 16 || trace.intensities.len() != m {
        return Err(Error::InvalidArgument("trace needs at least 16 matching samples".into()));
    }
    let step = (trace.detunings[m - 1] - trace.detunings[0]) / (m - 1) as f64;
    if trace.detunings[m - 1] - trace.detunings[0] + step < cav.omega_fsr * (1.0 - 1e-9) {
        return Err(Error::InvalidArgument("trace must cover one free spectral range".into()));
    }
    let peak = trace.intensities.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::FitNonConvergence("trace carries no signal".into()));
    }
    let eps = 1e-4 * peak;
    let problem = Problem {
        phases: trace.detunings.iter().map(|&dw| cav.phase(dw)).collect(),
        data: &trace.intensities,
        log_data: trace.intensities.iter().map(|&i| (i + eps).ln()).collect(),
        eps,
        t: cav.t,
    };
    let t = cav.t;
    let im_from_rho = |rho: f64| (rho.clamp(1e-6, 1.0 - 1e-9) / t).ln();

    let two_peak_start = |phase1: f64, phase2: f64, rho: f64, height: f64| {
        let ln_s = (height * (1.0 - rho).powi(2)).max(1e-300).ln();
        vec![phase1, im_from_rho(rho), phase2, im_from_rho(rho), ln_s]
    };
    let separation = |f: &[f64]| {
        let sep = Complex64::new(circular_distance(f[0], f[2]), f[1] - f[3]).norm();
        let width = hwhm(t * f[1].exp()).max(hwhm(t * f[3].exp()));
        (sep, width)
    };

    let (starts, merged_start) = match init {
        FitInit::Explicit(e) => {
            let s0 = peak * (1.0 - t * e[0].im.exp()).powi(2);
            (vec![vec![e[0].re, e[0].im, e[1].re, e[1].im, s0.max(1e-300).ln()]], None)
        }
        FitInit::Auto => {
            let guesses = pick_peaks(&problem.phases, &trace.intensities);
            let p1 = &guesses[0];
            let rho1 = rho_from_hwhm(p1.hwhm);
            match guesses.get(1) {
                Some(p2) => {
                    let rho2 = rho_from_hwhm(p2.hwhm);
                    let ln_s = (p1.height * (1.0 - rho1).powi(2)).max(1e-300).ln();
                    (vec![vec![p1.phase, im_from_rho(rho1), p2.phase, im_from_rho(rho2), ln_s]], None)
                }
                None => {
                    // one visible maximum: either coincident resonances, which add
                    // coherently (four times one peak), or two blended ones
                    let ln_s = (p1.height * (1.0 - rho1).powi(2) / 4.0).max(1e-300).ln();
                    let narrow = rho_from_hwhm(0.5 * p1.hwhm);
                    let mut splits: Vec<Vec<f64>> = [0.5, 1.0, 1.5]
                        .iter()
                        .map(|w| two_peak_start(p1.phase - w * p1.hwhm, p1.phase + w * p1.hwhm, narrow, p1.height))
                        .collect();
                    for w in [-3.0, -2.0, 2.0, 3.0] {
                        splits.push(two_peak_start(p1.phase, p1.phase + w * p1.hwhm, narrow, p1.height));
                    }
                    (splits, Some(vec![p1.phase, im_from_rho(rho1), ln_s]))
                }
            }
        }
    };

    let mut best: Option<(Vec<f64>, usize, f64)> = None;
    let mut total_iterations = 0;
    let mut last_error = None;
    for start in starts {
        match levenberg_marquardt(&problem, start) {
            Ok((th, it)) => {
                total_iterations += it;
                let c = cost(&problem.residuals(&th));
                if best.as_ref().is_none_or(|b| c < b.2) {
                    best = Some((th, it, c));
                }
            }
            Err(e) => last_error = Some(e),
        }
    }

    let mut warning = None;
    let (theta, iterations, merged) = match (best, merged_start) {
        (Some((th, _, c_two)), Some(ms)) => {
            let (sep, width) = separation(&expand(&th));
            let (mth, mit) = levenberg_marquardt(&problem, ms)?;
            total_iterations += mit;
            let c_merged = cost(&problem.residuals(&mth));
            if sep >= width && c_two < 0.5 * c_merged {
                (th, total_iterations, false)
            } else {
                warning = Some("a single resonance was found; bands reported as merged".to_string());
                (mth, total_iterations, true)
            }
        }
        (Some((th, _, _)), None) => {
            let f = expand(&th);
            let (sep, width) = separation(&f);
            if sep < width {
                let re = f[0] + 0.5 * wrap_pi(f[2] - f[0]);
                let start = vec![re, 0.5 * (f[1] + f[3]), f[4]];
                let (th, it2) = levenberg_marquardt(&problem, start)?;
                warning = Some(format!(
                    "resonances separated by {sep:.3e} < half linewidth {width:.3e}; merged-peak fallback"
                ));
                (th, total_iterations + it2, true)
            } else {
                (th, total_iterations, false)
            }
        }
        (None, Some(ms)) => {
            let (mth, mit) = levenberg_marquardt(&problem, ms)?;
            warning = Some("a single resonance was found; bands reported as merged".to_string());
            (mth, total_iterations + mit, true)
        }
        (None, None) => {
            return Err(last_error.unwrap_or_else(|| Error::FitNonConvergence("no starting point".into())));
        }
    };

    let f = expand(&theta);
    let residual = problem.relative_residual(&theta);
    let covariance = covariance_diag(&problem, &theta);
    let mut e = [
        Complex64::new(wrap_pi(f[0]), f[1]),
        Complex64::new(wrap_pi(f[2]), f[3]),
    ];
    if e[1].re > e[0].re {
        e.swap(0, 1);
    }
    let cov4 = if merged {
        [covariance[0], covariance[1], covariance[0], covariance[1]]
    } else {
        [covariance[0], covariance[1], covariance[2], covariance[3]]
    };
    let mk = |band, z: Complex64| PeakEstimate {
        band,
        re_e: z.re,
        im_e: z.im,
        fit_residual: residual,
        covariance_diag: cov4,
    };
    Ok(FitOutcome {
        peaks: [mk(Band::Plus, e[0]), mk(Band::Minus, e[1])],
        merged,
        warning,
        scale: f[4].exp(),
        iterations,
    })
}

/// Diagonal of `σ² (JᵀJ)⁻¹` in the fitted parameterization.
fn covariance_diag(problem: &Problem, theta: &[f64]) -> Vec<f64> {
    let r = problem.residuals(theta);
    let jac = problem.jacobian(theta);
    let n = theta.len();
    let dof = (r.len().saturating_sub(n)).max(1) as f64;
    let sigma2 = 2.0 * cost(&r) / dof;
    let (a, _) = normal_equations(&jac, &r);
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            solve(a.clone(), e).map_or(f64::INFINITY, |col| sigma2 * col[i])
        })
        .collect()
}

/// Matches fitted peaks to reference energies, returning `|Δ Re|` and
/// `|Δ Im|` for each reference (real parts compared modulo 2π).
pub fn match_errors(peaks: &[PeakEstimate; 2], reference: [Complex64; 2]) -> [(f64, f64); 2] {
    let d = |p: &PeakEstimate, e: Complex64| (circular_distance(p.re_e, e.re), (p.im_e - e.im).abs());
    let straight = [d(&peaks[0], reference[0]), d(&peaks[1], reference[1])];
    let swapped = [d(&peaks[1], reference[0]), d(&peaks[0], reference[1])];
    let total = |x: &[(f64, f64); 2]| x.iter().map(|(a, b)| a + b).sum::<f64>();
    if total(&straight) <= total(&swapped) {
        straight
    } else {
        swapped
    }
}
