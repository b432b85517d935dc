//! Cross-checks against independent computations: dense eigensolves from
//! nalgebra, Jensen's formula for the Ronkin function and stored rasters.

use nalgebra::{DMatrix, Schur};
use nonbloch::analysis::{obc_spectrum, ronkin};
use nonbloch::geometry::find_exceptional_mu;
use nonbloch::hologram::{hologram_phase, target_field};
use nonbloch::linalg::CMatrix;
use nonbloch::model::{band_energies, bloch_matrix, build_obc_hamiltonian, build_ring_hamiltonian, sample_band_loop};
use nonbloch::ModelParams;
use num_complex::Complex64;

fn p3() -> ModelParams {
    ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057)
}

fn p5() -> ModelParams {
    ModelParams::from_pi_units(0.13, 0.5, -0.125, 0.036)
}

fn dense(m: &CMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenvalues from a complex Schur form. The matrix is first conjugated by a
/// fixed pseudo-random unitary; the sparse chain matrices otherwise stall the
/// QR iteration.
fn schur_eigenvalues(m: DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next()));
    let q = g.qr().q();
    let conj = &q * m * q.adjoint();
    let (_, t) = Schur::try_new(conj, f64::EPSILON, 10_000).expect("Schur iteration converges").unpack();
    t.diagonal().iter().copied().collect()
}

/// Greedy matching distance between two equally sized point sets.
fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for z in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, w)| (j, (z - w).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn bloch_bands_match_dense_two_by_two() {
    let beta = Complex64::new(1.0, 0.0);
    let (ep, em) = band_energies(&p3(), beta).unwrap();
    let m = bloch_matrix(&p3(), beta).unwrap().to_array();
    let eig = schur_eigenvalues(DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]));
    assert!(set_distance(&[ep, em], &eig) < 1e-12);
    assert!((ep.re.abs() - 1.246).abs() < 5e-3 && (ep.im.abs() - 0.140).abs() < 5e-3);
}

#[test]
fn ring_spectrum_is_bloch_sampled() {
    for p in [p3(), p5()] {
        let n = 24;
        let ring = schur_eigenvalues(dense(&build_ring_hamiltonian(&p, n).unwrap()));
        let mut bloch = Vec::new();
        for j in 0..n {
            let k = std::f64::consts::TAU * j as f64 / n as f64;
            let (ep, em) = band_energies(&p, Complex64::from_polar(1.0, -k)).unwrap();
            bloch.extend([ep, em]);
        }
        assert!(set_distance(&ring, &bloch) < 1e-9);
    }
}

#[test]
fn obc_matches_dense_eigensolver() {
    for (p, n) in [(p3(), 10), (p5(), 12)] {
        let ours = obc_spectrum(&p, n).unwrap().eigenvalues;
        let oracle = schur_eigenvalues(dense(&build_obc_hamiltonian(&p, n).unwrap()));
        assert!(set_distance(&ours, &oracle) < 1e-7, "n = {n}");
    }
}

#[test]
fn obc_spectrum_real_without_long_range_hopping() {
    for gamma in [0.0, 0.03, 0.1, 0.2] {
        let p = ModelParams::from_pi_units(0.31, 0.0, 0.25, gamma);
        let oracle = schur_eigenvalues(dense(&build_obc_hamiltonian(&p, 12).unwrap()));
        assert!(oracle.iter().all(|z| z.im.abs() < 1e-6), "gamma = {gamma}");
    }
}

#[test]
fn exceptional_points_are_companion_roots() {
    let p = p5();
    let eps = find_exceptional_mu(&p).unwrap();
    assert_eq!(eps.len(), 4);
    // roots of β·E₁(β) = −δ₂β² + i(η−γ)β − δ₁ and β·E₂(β) = −δ₁β² − i(η+γ)β − δ₂
    let i = Complex64::i();
    let quads = [
        [-p.delta2 + 0.0 * i, (p.eta - p.gamma) * i, -p.delta1 + 0.0 * i],
        [-p.delta1 + 0.0 * i, -(p.eta + p.gamma) * i, -p.delta2 + 0.0 * i],
    ];
    let mut roots = Vec::new();
    for [a, b, c] in quads {
        let companion = DMatrix::from_row_slice(2, 2, &[-b / a, -c / a, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        roots.extend(schur_eigenvalues(companion));
    }
    let found: Vec<Complex64> = eps.iter().map(|r| r.beta).collect();
    assert!(set_distance(&found, &roots) < 1e-12);
    for r in &eps {
        assert!(r.residual(&p) < 1e-10);
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Ronkin value from Jensen's formula applied to `β²(E² − E₁E₂)`.
fn ronkin_jensen(p: &ModelParams, e: Complex64, mu: f64) -> f64 {
    let i = Complex64::i();
    let re = |x: f64| Complex64::new(x, 0.0);
    // ascending coefficients
    let a = [re(-p.delta1), (p.eta - p.gamma) * i, re(-p.delta2)];
    let b = [re(-p.delta2), -(p.eta + p.gamma) * i, re(-p.delta1)];
    let mut poly: Vec<Complex64> = poly_mul(&a, &b).into_iter().map(|z| -z).collect();
    poly[2] += e * e;
    while poly.last().is_some_and(|z| z.norm() < 1e-15) {
        poly.pop();
    }
    let n = poly.len() - 1;
    let lead = poly[n];
    let mut companion = DMatrix::from_element(n, n, re(0.0));
    for j in 0..n {
        companion[(0, j)] = -poly[n - 1 - j] / lead;
    }
    for j in 1..n {
        companion[(j, j - 1)] = re(1.0);
    }
    let r = (-mu).exp();
    let roots = schur_eigenvalues(companion);
    lead.norm().ln() + roots.iter().map(|z| z.norm().max(r).ln()).sum::<f64>() - 2.0 * r.ln()
}

#[test]
fn ronkin_matches_jensen_formula() {
    for p in [p3(), p5()] {
        for mu in [0.2, 0.0, -0.1, -0.232, -0.4, -0.6] {
            let loops = sample_band_loop(&p, mu, 2048).unwrap();
            for e in [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.6, 0.1),
                Complex64::new(1.0, 0.0),
                Complex64::new(-2.5, 0.4),
            ] {
                let gap = loops
                    .iter()
                    .flat_map(|l| l.energies())
                    .map(|z| (z - e).norm())
                    .fold(f64::INFINITY, f64::min);
                if gap < 0.05 {
                    continue;
                }
                let ours = ronkin(&p, e, mu, 2048).unwrap();
                let oracle = ronkin_jensen(&p, e, mu);
                assert!((ours - oracle).abs() < 1e-8, "mu = {mu}, e = {e}: {ours} vs {oracle}");
            }
        }
    }
}

#[test]
fn golden_hologram_raster() {
    let field = target_field(Complex64::new(0.23f64.exp(), 0.0), 8, 64, 64, None).unwrap();
    let holo = hologram_phase(&field, field.default_clip().unwrap(), 8.0).unwrap();
    let golden = include_bytes!("golden/hologram_64x64.pgm");
    assert_eq!(holo.to_pgm(16).unwrap().as_slice(), golden.as_slice());
}
