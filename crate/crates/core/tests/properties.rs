use nonbloch::analysis::{ronkin, ronkin_slope};
use nonbloch::geometry::{find_exceptional_mu, wasserstein_metric, winding_number, WassersteinMethod};
use nonbloch::hologram::{encode_pgm, inverse_sinc, sinc};
use nonbloch::model::{band_energies, momentum_to_beta, nonbloch_basis, pairing, sample_band_loop, Side};
use nonbloch::output::fmt_float;
use nonbloch::ModelParams;
use num_complex::Complex64;
use proptest::prelude::*;

fn p3() -> ModelParams {
    ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057)
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05..0.6f64, -0.6..0.6f64, -0.4..0.4f64, -0.2..0.2f64)
        .prop_map(|(d1, d2, eta, gamma)| ModelParams::from_pi_units(d1, d2, eta, gamma))
}

fn distance_to_spectrum(p: &ModelParams, mu: f64, e: Complex64) -> f64 {
    sample_band_loop(p, mu, 1024)
        .unwrap()
        .iter()
        .flat_map(|l| l.energies())
        .map(|z| (z - e).norm())
        .fold(f64::INFINITY, f64::min)
}

fn away_from_eps(p: &ModelParams, mu: f64, margin: f64) -> bool {
    find_exceptional_mu(p).unwrap().iter().all(|r| (r.mu - mu).abs() > margin)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_modulus_is_exp_minus_mu(k in -10.0..10.0f64, mu in -2.0..2.0f64) {
        let beta = momentum_to_beta(k, mu);
        prop_assert!((beta.norm() - (-mu).exp()).abs() <= 1e-12 * (-mu).exp());
    }

    #[test]
    fn bands_are_chiral_roots(p in params(), k in 0.0..6.3f64, mu in -1.0..1.0f64) {
        let beta = momentum_to_beta(k, mu);
        let (ep, em) = band_energies(&p, beta).unwrap();
        prop_assert!((ep + em).norm() < 1e-12);
        let scale = 1.0 + (p.e1(beta) * p.e2(beta)).norm();
        prop_assert!(p.char_poly(beta, ep).norm() < 1e-12 * scale);
    }

    #[test]
    fn loops_are_continuous(p in params(), mu in -0.8..0.4f64) {
        prop_assume!(away_from_eps(&p, mu, 0.02));
        let loops = sample_band_loop(&p, mu, 2048).unwrap();
        for l in &loops {
            let pts = l.energies();
            let step = pts.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
            prop_assert!(step < 0.05, "jump {}", step);
        }
    }

    #[test]
    fn exceptional_points_annihilate_a_factor(p in params()) {
        for r in find_exceptional_mu(&p).unwrap() {
            prop_assert!(r.residual(&p) < 1e-10);
            prop_assert!((momentum_to_beta(r.k, r.mu) - r.beta).norm() < 1e-9 * (1.0 + r.beta.norm()));
        }
    }

    #[test]
    fn wasserstein_methods_agree(mu in -0.7..0.25f64) {
        let p = p3();
        prop_assume!(away_from_eps(&p, mu, 0.02));
        let a = wasserstein_metric(&p, mu, 1024, WassersteinMethod::Integral).unwrap();
        let b = wasserstein_metric(&p, mu, 1024, WassersteinMethod::AreaDerivative).unwrap();
        prop_assert!((a - b).abs() <= 0.01 * a.abs().max(b.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn ronkin_slope_is_winding(re in -2.0..2.0f64, im in -0.6..0.6f64, mu in -0.7..0.2f64) {
        let p = p3();
        let e = Complex64::new(re, im);
        prop_assume!(distance_to_spectrum(&p, mu, e) > 0.1);
        let w = winding_number(&sample_band_loop(&p, mu, 1024).unwrap(), e).unwrap();
        let s = ronkin_slope(&p, e, mu, 1e-3, 2048).unwrap();
        prop_assert!((s - w as f64).abs() < 0.02, "slope {} winding {}", s, w);
    }

    #[test]
    fn ronkin_is_convex_in_mu(re in -2.0..2.0f64, im in -0.6..0.6f64, mu in -0.7..0.2f64) {
        let p = p3();
        let e = Complex64::new(re, im);
        let h = 0.02;
        prop_assume!([mu - h, mu, mu + h].iter().all(|&m| distance_to_spectrum(&p, m, e) > 0.05));
        let v = |m| ronkin(&p, e, m, 2048).unwrap();
        prop_assert!(v(mu - h) + v(mu + h) - 2.0 * v(mu) > -1e-9);
    }

    #[test]
    fn inverse_sinc_round_trip(a in 0.0..=1.0f64) {
        let z = inverse_sinc(a).unwrap();
        prop_assert!((-std::f64::consts::PI..=0.0).contains(&z));
        prop_assert!((sinc(z) - a).abs() < 1e-12);
    }

    #[test]
    fn distinct_modes_on_a_circle_are_biorthogonal(r in 0.5..2.0f64, arg in -3.1..3.1f64, n in 2usize..40, j in 1usize..40) {
        prop_assume!(j % n != 0);
        let beta = Complex64::from_polar(r, arg);
        let other = beta * Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64);
        let left = nonbloch_basis(beta, n, Side::Left).unwrap();
        prop_assert!(pairing(&left, &nonbloch_basis(other, n, Side::Right).unwrap()).unwrap().norm() < 1e-12);
        let same = pairing(&left, &nonbloch_basis(beta, n, Side::Right).unwrap()).unwrap();
        prop_assert!((same - 1.0).norm() < 1e-12);
    }

    #[test]
    fn floats_round_trip_through_text(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn pgm_size_matches_header(w in 1usize..40, h in 1usize..40, wide in any::<bool>()) {
        let bits = if wide { 16 } else { 8 };
        let pixels = vec![0u16; w * h];
        let bytes = encode_pgm(w, h, &pixels, bits).unwrap();
        let header = format!("P5\n{w} {h}\n{}\n", if wide { 65535 } else { 255 });
        prop_assert!(bytes.starts_with(header.as_bytes()));
        prop_assert_eq!(bytes.len(), header.len() + w * h * (bits as usize / 8));
    }
}
