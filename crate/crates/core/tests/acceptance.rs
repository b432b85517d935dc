//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed even when earlier criteria fail.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nonbloch::analysis::{
    classify_minimum, directed_hausdorff, extract_mu_gbz, hausdorff, mu_gbz_closed_form, obc_root_gap, obc_spectrum,
    ronkin, ronkin_slope, trace_adaptive, MinimumShape, TraceOptions,
};
use nonbloch::cavity::{
    extract_eigenenergies, fsr_grid, greens_function, match_errors, mu_gbz_from_fits, round_trip_gain, round_trip_sum,
    synth_transmission, CavityParams, FitInit, NoiseSpec,
};
use nonbloch::config::parse_config;
use nonbloch::geometry::{
    find_exceptional_mu, qualifying_count, self_intersections, wasserstein_metric, winding_number, WassersteinMethod,
};
use nonbloch::hologram::{
    diffraction_oracle, first_order_coefficient, hologram_phase, sinc, target_field, DEFAULT_CLIP_FRACTION,
};
use nonbloch::model::{band_energies, momentum_to_beta, nonbloch_basis, pairing, sample_band_loop, Closure, Side};
use nonbloch::recipe::{run_recipe, RecipeName};
use nonbloch::{ModelParams, C};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fig3() -> ModelParams {
    ModelParams::from_pi_units(0.31, 0.0, 0.25, 0.057)
}

fn fig5() -> ModelParams {
    ModelParams::from_pi_units(0.13, 0.5, -0.125, 0.036)
}

fn ensure(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn percentile95(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[((v.len() as f64) * 0.95).ceil() as usize - 1]
}

fn c1_mu_gbz() -> Outcome {
    let ex = extract_mu_gbz(&fig3(), (-0.45, 0.0), 46, 1024).map_err(e)?;
    let mu = ex.mu_gbz;
    ensure((mu + 0.232).abs() <= 0.005, format!("mu_gbz = {mu:.6}"))?;
    ensure((mu + 0.23).abs() <= 0.01, format!("mu_gbz = {mu:.6} vs -0.23"))?;
    Ok(format!("mu_gbz = {mu:.6}"))
}

fn c2_exceptional_points() -> Outcome {
    let p = fig3();
    let eps = find_exceptional_mu(&p).map_err(e)?;
    let mut mus: Vec<f64> = eps.iter().map(|r| r.mu).collect();
    mus.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    ensure(mus.len() == 2, format!("distinct EP radii {mus:?}"))?;
    let worst = eps.iter().map(|r| r.residual(&p)).fold(0.0, f64::max);
    ensure(worst < 1e-10, format!("residual {worst:e}"))?;
    let (lo, hi) = (mus[0], mus[1]);
    ensure((lo + 0.474).abs() <= 0.001 && (hi - 0.010).abs() <= 0.001, format!("EPs {lo:.6}, {hi:.6}"))?;
    ensure((lo + 0.48).abs() <= 0.03 && (hi - 0.02).abs() <= 0.03, format!("EPs {lo:.6}, {hi:.6} vs -0.48, 0.02"))?;
    let mid = 0.5 * (lo + hi);
    let gbz = mu_gbz_closed_form(&p).ok_or("no closed-form mu_gbz")?;
    ensure((mid - gbz).abs() <= 1e-3, format!("midpoint {mid:.6} vs mu_gbz {gbz:.6}"))?;
    Ok(format!("EPs {lo:.6}, {hi:.6}; residual {worst:.1e}; midpoint {mid:.6}"))
}

fn c3_wasserstein() -> Outcome {
    let p = fig3();
    let n_k = 1024;
    let eps: Vec<f64> = find_exceptional_mu(&p).map_err(e)?.iter().map(|r| r.mu).collect();
    let candidates: Vec<f64> = linspace(-0.7, 0.25, 400)
        .into_iter()
        .filter(|mu| eps.iter().all(|ep| (mu - ep).abs() >= 0.02))
        .collect();
    let grid: Vec<f64> = (0..50).map(|i| candidates[i * (candidates.len() - 1) / 49]).collect();
    let mut worst = 0.0f64;
    for &mu in &grid {
        let a = wasserstein_metric(&p, mu, n_k, WassersteinMethod::Integral).map_err(e)?;
        let b = wasserstein_metric(&p, mu, n_k, WassersteinMethod::AreaDerivative).map_err(e)?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    ensure(worst <= 0.01, format!("method disagreement {:.3}%", 100.0 * worst))?;

    let ex = extract_mu_gbz(&p, (-0.45, 0.0), 46, n_k).map_err(e)?;
    let g = |mu: f64| wasserstein_metric(&p, mu, n_k, WassersteinMethod::Integral);
    let base = g(ex.mu_gbz).map_err(e)?;
    let (left, right) = (g(ex.mu_gbz - 0.01).map_err(e)?, g(ex.mu_gbz + 0.01).map_err(e)?);
    ensure(base < left && base < right, format!("no local minimum at {:.5}", ex.mu_gbz))?;
    let mut peaks = Vec::new();
    for &ep in &eps {
        let peak = (2..=6)
            .flat_map(|j| [ep - 10f64.powi(-j), ep + 10f64.powi(-j)])
            .filter_map(|mu| g(mu).ok())
            .fold(0.0, f64::max);
        ensure(peak > 10.0 * base, format!("peak {peak:.3} near EP {ep:.5}, baseline {base:.3}"))?;
        peaks.push(peak / base);
    }
    Ok(format!(
        "max disagreement {:.3}%; baseline {base:.4}; EP peaks {:.0}x, {:.0}x",
        100.0 * worst,
        peaks[0],
        peaks[1]
    ))
}

fn c4_obc() -> Outcome {
    let p = fig3();
    let spec = obc_spectrum(&p, 40).map_err(e)?;
    let max_im = spec.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let (lo, hi) = (0.209 - 0.05, 1.739 + 0.05);
    let out_of_range: Vec<f64> = spec
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .filter(|r| *r < lo || *r > hi)
        .collect();
    let mut bulk_ok = true;
    for z in &spec.eigenvalues {
        let r = z.norm();
        if (r < lo || r > hi) && obc_root_gap(&p, *z).map_err(e)? < 0.1 {
            bulk_ok = false;
        }
    }
    let info = format!(
        "max |Im| {max_im:.1e}; {} of {} outside [{lo:.3}, {hi:.3}] (min |E| {:.2e}); bulk-only range {}",
        out_of_range.len(),
        spec.eigenvalues.len(),
        spec.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min),
        if bulk_ok { "ok" } else { "violated" }
    );
    ensure(max_im < 1e-6, info.clone())?;
    ensure(out_of_range.is_empty(), info.clone())?;
    Ok(info)
}

fn centroid(points: &[C<f64>]) -> C<f64> {
    points.iter().sum::<C<f64>>() / points.len() as f64
}

fn c5_winding() -> Outcome {
    let p = fig3();
    let n_k = 1024;
    let loops = sample_band_loop(&p, 0.0, n_k).map_err(e)?;
    ensure(loops[0].closure == Closure::TwoPi, format!("mu = 0 closure {:?}", loops[0].closure))?;
    let mut found = Vec::new();
    for l in &loops {
        let w = winding_number(&loops, centroid(&l.energies())).map_err(e)?;
        found.push(w);
    }
    ensure(found.iter().all(|&w| w == 1), format!("mu = 0 windings {found:?}"))?;
    let lobes = sample_band_loop(&p, -0.48, n_k).map_err(e)?;
    ensure(lobes[0].closure == Closure::FourPi, format!("mu = -0.48 closure {:?}", lobes[0].closure))?;
    let pts = lobes[0].energies();
    let half = pts.len() / 2;
    let mut lobe_w = Vec::new();
    for part in [&pts[..half], &pts[half..]] {
        lobe_w.push(winding_number(&lobes, centroid(part)).map_err(e)?);
    }
    ensure(lobe_w.iter().all(|&w| w == -1), format!("mu = -0.48 windings {lobe_w:?}"))?;
    Ok(format!("mu = 0: {found:?}; mu = -0.48 lobes: {lobe_w:?}"))
}

fn c6_intersections() -> Outcome {
    let p = fig5();
    let mut counts = Vec::new();
    for (mu, want) in [(0.0, 0), (-0.06, 2), (-0.09, 3)] {
        let [plus, minus] = sample_band_loop(&p, mu, 1024).map_err(e)?;
        let a = qualifying_count(&self_intersections(&plus, &minus).map_err(e)?);
        let b = qualifying_count(&self_intersections(&minus, &plus).map_err(e)?);
        ensure(a == want && b == want, format!("mu = {mu}: counts {a}, {b}, expected {want}"))?;
        counts.push(a);
    }
    let traced = trace_adaptive(&p, -0.12, -0.01, 0.005, TraceOptions::default()).map_err(e)?;
    let cloud: Vec<Complex64> = traced.points.iter().map(|x| x.energy).collect();
    let obc = obc_spectrum(&p, 60).map_err(e)?;
    let d = directed_hausdorff(&cloud, &obc.eigenvalues);
    let sym = hausdorff(&cloud, &obc.eigenvalues);
    ensure(!cloud.is_empty() && d <= 0.05, format!("traced-to-OBC distance {d:.4}"))?;
    Ok(format!(
        "counts {counts:?}; {} traced points, distance to OBC {d:.4} (symmetric {sym:.4})",
        cloud.len()
    ))
}

fn c7_ronkin() -> Outcome {
    let p = fig3();
    let n_k = 4096;
    let probes = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 0.0),
        Complex64::new(0.3, 0.3),
        Complex64::new(-0.8, -0.1),
    ];
    let mut checked = 0;
    let mut nonzero = 0;
    let mut worst = 0.0f64;
    for mu in [0.2, 0.0, -0.1, -0.232, -0.3, -0.48, -0.7] {
        let loops = sample_band_loop(&p, mu, n_k).map_err(e)?;
        let pts: Vec<Complex64> = loops.iter().flat_map(|l| l.energies()).collect();
        for &z in &probes {
            if pts.iter().map(|q| (q - z).norm()).fold(f64::INFINITY, f64::min) < 0.05 {
                continue;
            }
            let w = winding_number(&loops, z).map_err(e)?;
            let s = ronkin_slope(&p, z, mu, 1e-3, n_k).map_err(e)?;
            worst = worst.max((s - w as f64).abs());
            checked += 1;
            nonzero += usize::from(w != 0);
        }
    }
    ensure(worst <= 0.02, format!("slope deviates from winding by {worst:.4}"))?;
    ensure(nonzero > 0 && checked > nonzero, format!("{checked} probes, {nonzero} nonzero"))?;

    let gbz = mu_gbz_closed_form(&p).ok_or("no closed-form mu_gbz")?;
    let mus = linspace(-0.6, 0.1, 401);
    let cut = |ev: Complex64| -> Result<_, String> {
        let vals: Vec<Option<f64>> = mus.iter().map(|&mu| ronkin(&p, ev, mu, n_k).ok()).collect();
        classify_minimum(&mus, &vals).map_err(e)
    };
    let flat = cut(Complex64::new(0.0, 0.0))?;
    let sharp = cut(Complex64::new(1.0, 0.0))?;
    ensure(flat.shape == MinimumShape::Flat, format!("e_ref = 0 is {:?}", flat.shape))?;
    ensure(
        sharp.shape == MinimumShape::Sharp && (sharp.mu_min - gbz).abs() <= 0.02,
        format!("e_ref = 1 is {:?} at {:.4}", sharp.shape, sharp.mu_min),
    )?;
    Ok(format!(
        "{checked} probes, max |slope - w| {worst:.1e}; e=0 flat width {:.3}; e=1 sharp at {:.4}",
        flat.width, sharp.mu_min
    ))
}

fn c8_cavity() -> Outcome {
    let p = fig3();
    let cav = CavityParams::default();
    let mut worst_series = 0.0f64;
    let mut max_gain = 0.0f64;
    for (k, mu) in [(0.3, -0.232), (1.7, -0.232), (2.9, -0.232), (4.4, -0.2), (5.8, -0.2)] {
        let beta = momentum_to_beta(k, mu);
        let (ep, em) = band_energies(&p, beta).map_err(e)?;
        max_gain = max_gain.max(round_trip_gain(cav.t, &[ep, em]));
        for dw in linspace(-0.5, 0.45, 20) {
            let g = greens_function(&p, &cav, beta, dw).map_err(e)?;
            let s = round_trip_sum(&p, &cav, beta, dw, 1000).map_err(e)?;
            worst_series = worst_series.max((g - s).norm());
        }
    }
    ensure(worst_series <= 1e-10, format!("series mismatch {worst_series:e} at gain <= {max_gain:.3}"))?;

    let grid = fsr_grid(&cav, 512);
    let mut worst_clean = 0.0f64;
    for k in [0.4, 1.3, 2.2, 3.9, 5.5] {
        let beta = momentum_to_beta(k, -0.2);
        let (ep, em) = band_energies(&p, beta).map_err(e)?;
        let tr = synth_transmission(&p, &cav, beta, &grid, &NoiseSpec::off(), (0, 0)).map_err(e)?;
        let fit = extract_eigenenergies(&tr, &cav, FitInit::Auto).map_err(e)?;
        for (dr, di) in match_errors(&fit.peaks, [ep, em]) {
            worst_clean = worst_clean.max(dr).max(di);
        }
    }
    ensure(worst_clean <= 1e-6, format!("noiseless inversion error {worst_clean:e}"))?;

    let beta = momentum_to_beta(0.8, -0.2);
    let (ep, em) = band_energies(&p, beta).map_err(e)?;
    let mut re = Vec::new();
    let mut im = Vec::new();
    for seed in 0..100 {
        let tr = synth_transmission(&p, &cav, beta, &grid, &NoiseSpec::with_seed(0.02, seed), (0, 0)).map_err(e)?;
        let fit = extract_eigenenergies(&tr, &cav, FitInit::Auto).map_err(e)?;
        for (dr, di) in match_errors(&fit.peaks, [ep, em]) {
            re.push(dr);
            im.push(di);
        }
    }
    let (p_re, p_im) = (percentile95(re), percentile95(im));
    ensure(p_re <= 1e-3 && p_im <= 5e-3, format!("95th percentile Re {p_re:.2e}, Im {p_im:.2e}"))?;

    let mu = mu_gbz_from_fits(&p, &cav, (-0.3, -0.15), 7, 64, &grid, &NoiseSpec::off()).map_err(e)?;
    let gbz = mu_gbz_closed_form(&p).ok_or("no closed-form mu_gbz")?;
    ensure((mu - gbz).abs() <= 1e-3, format!("fitted mu_gbz {mu:.6} vs {gbz:.6}"))?;
    Ok(format!(
        "series {worst_series:.1e}; noiseless {worst_clean:.1e}; noisy p95 Re {p_re:.1e} Im {p_im:.1e}; fitted mu_gbz {mu:.5}"
    ))
}

fn c9_hologram() -> Outcome {
    let mut worst_law = 0.0f64;
    for i in 0..=40 {
        let m = i as f64 / 40.0;
        let c1 = first_order_coefficient(m, 4096).norm();
        worst_law = worst_law.max((c1 - sinc(std::f64::consts::PI * (m - 1.0)).abs()).abs());
    }
    ensure(worst_law <= 1e-3, format!("coefficient law error {worst_law:e}"))?;

    let n = 20;
    let mut worst_cross = 0.0f64;
    for radius in [0.8, 1.0, 1.25] {
        let beta = Complex64::from_polar(radius, 0.37);
        let left = nonbloch_basis(beta, n, Side::Left).map_err(e)?;
        for j in 1..n {
            let other = beta * Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64);
            let right = nonbloch_basis(other, n, Side::Right).map_err(e)?;
            worst_cross = worst_cross.max(pairing(&left, &right).map_err(e)?.norm());
        }
    }
    ensure(worst_cross < 1e-12, format!("cross-talk {worst_cross:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fidelities = Vec::new();
    for _ in 0..20 {
        let r = rng.random_range(0.7..1.4);
        let arg = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let beta = Complex64::from_polar(r, arg);
        let field = target_field(beta, n, 512, 512, None).map_err(e)?;
        let clip = field.min_nonzero_modulus().ok_or("empty field")? * DEFAULT_CLIP_FRACTION;
        let holo = hologram_phase(&field, clip, 16.0).map_err(e)?;
        fidelities.push((r, diffraction_oracle(&holo, &field).map_err(e)?));
    }
    let (r_min, f_min) = fidelities
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let passing = fidelities.iter().filter(|f| f.1 >= 0.99).count();
    ensure(
        f_min >= 0.99,
        format!("{passing}/20 fidelities >= 0.99; worst {f_min:.4} at |beta| = {r_min:.3}"),
    )?;
    Ok(format!("law {worst_law:.1e}; cross-talk {worst_cross:.1e}; worst fidelity {f_min:.4}"))
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Outcome {
    let mut files = 0;
    for (recipe, cfg) in [(RecipeName::Fig3, "fig3.cfg"), (RecipeName::Fig4, "fig3.cfg")] {
        let cfg = parse_config(&config_path(cfg)).map_err(e)?;
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().map_err(e)?;
                run_recipe(recipe, &cfg, dir.path()).map_err(e)?;
                Ok(snapshot(dir.path()))
            })
            .collect::<Result<_, String>>()?;
        ensure(!runs[0].is_empty(), format!("{recipe} wrote nothing"))?;
        ensure(runs[0] == runs[1], format!("{recipe} outputs differ between runs"))?;
        files += runs[0].len();
    }
    Ok(format!("{files} files byte-identical across reruns"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("1 mu_gbz extraction", Duration::from_secs(10), c1_mu_gbz),
        ("2 exceptional points", Duration::from_secs(1), c2_exceptional_points),
        ("3 wasserstein identity", Duration::from_secs(60), c3_wasserstein),
        ("4 obc reality and range", Duration::from_secs(5), c4_obc),
        ("5 winding flip", Duration::from_secs(5), c5_winding),
        ("6 long-range intersections", Duration::from_secs(120), c6_intersections),
        ("7 ronkin slope and minima", Duration::from_secs(60), c7_ronkin),
        ("8 cavity round trip", Duration::from_secs(300), c8_cavity),
        ("9 hologram", Duration::from_secs(120), c9_hologram),
        ("10 determinism", Duration::from_secs(600), c10_determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
