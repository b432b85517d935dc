use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::gbz::bracketed_minimum;
use crate::cavity::fit::{extract_eigenenergies, FitInit, FitOutcome};
use crate::cavity::green::CavityParams;
use crate::cavity::synth::{synth_transmission, NoiseSpec, TransmissionTrace};
use crate::error::Result;
use crate::geometry::wasserstein::wasserstein_from_loops;
use crate::model::{momentum_to_beta, Band, BandLoop, BandSample, Closure, Params};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub k_index: usize,
    pub k: f64,
    pub beta: Complex64,
    pub trace: Option<TransmissionTrace>,
    pub fit: Option<FitOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanLayer {
    pub mu: f64,
    pub points: Vec<ScanPoint>,
    /// Loops assembled from fitted energies; `Open` when any point failed.
    #[serde(skip)]
    pub loops: [BandLoop<f64>; 2],
    pub gaps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanDataset {
    pub params: Params<f64>,
    pub cavity: CavityParams,
    pub noise: NoiseSpec,
    pub n_k: usize,
    pub layers: Vec<ScanLayer>,
}

fn k_grid(n_k: usize) -> Vec<f64> {
    (0..n_k).map(|j| TAU * j as f64 / n_k as f64).collect()
}

fn measure_point(
    p: &Params<f64>,
    cav: &CavityParams,
    mu: f64,
    k: f64,
    dw_grid: &[f64],
    noise: &NoiseSpec,
    index: (usize, usize),
    keep_trace: bool,
) -> ScanPoint {
    let beta = momentum_to_beta(k, mu);
    let outcome = synth_transmission(p, cav, beta, dw_grid, noise, index)
        .and_then(|tr| extract_eigenenergies(&tr, cav, FitInit::Auto).map(|fit| (tr, fit)));
    match outcome {
        Ok((tr, fit)) => ScanPoint {
            k_index: index.1,
            k,
            beta,
            trace: keep_trace.then_some(tr),
            fit: Some(fit),
            error: None,
        },
        Err(e) => ScanPoint {
            k_index: index.1,
            k,
            beta,
            trace: None,
            fit: None,
            error: Some(e.to_string()),
        },
    }
}

/// Orders fitted energy pairs into two continuous bands. The `+` band starts
/// on the member with the larger real part; gaps leave the loops open.
pub fn assemble_loops(mu: f64, ks: &[f64], pairs: &[Option<[Complex64; 2]>]) -> [BandLoop<f64>; 2] {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut prev: Option<[Complex64; 2]> = None;
    for (&k, pair) in ks.iter().zip(pairs) {
        let Some([a, b]) = *pair else { continue };
        let (x, y) = match prev {
            None => {
                if a.re >= b.re {
                    (a, b)
                } else {
                    (b, a)
                }
            }
            Some([pp, pm]) => {
                if (a - pp).norm() + (b - pm).norm() <= (b - pp).norm() + (a - pm).norm() {
                    (a, b)
                } else {
                    (b, a)
                }
            }
        };
        let beta = momentum_to_beta(k, mu);
        plus.push(BandSample { k, beta, energy: x });
        minus.push(BandSample { k, beta, energy: y });
        prev = Some([x, y]);
    }
    let complete = plus.len() == ks.len() && plus.len() >= 3;
    let closure = if !complete {
        Closure::Open
    } else {
        let last = plus[plus.len() - 1].energy;
        if (last - minus[0].energy).norm() < (last - plus[0].energy).norm() {
            Closure::FourPi
        } else {
            Closure::TwoPi
        }
    };
    if closure == Closure::FourPi {
        let shifted = |v: &[BandSample<f64>]| -> Vec<BandSample<f64>> {
            v.iter().map(|s| BandSample { k: s.k + TAU, ..*s }).collect()
        };
        let mut full = plus.clone();
        full.extend(shifted(&minus));
        let mut other = minus.clone();
        other.extend(shifted(&plus));
        return [
            BandLoop {
                mu,
                band: Band::Plus,
                samples: full,
                closure,
                params: None,
            },
            BandLoop {
                mu,
                band: Band::Minus,
                samples: other,
                closure,
                params: None,
            },
        ];
    }
    [
        BandLoop {
            mu,
            band: Band::Plus,
            samples: plus,
            closure,
            params: None,
        },
        BandLoop {
            mu,
            band: Band::Minus,
            samples: minus,
            closure,
            params: None,
        },
    ]
}

fn pairs_of(points: &[ScanPoint]) -> Vec<Option<[Complex64; 2]>> {
    points
        .iter()
        .map(|pt| pt.fit.as_ref().map(|f| [f.peaks[0].energy(), f.peaks[1].energy()]))
        .collect()
}

/// Synthesizes and fits every `(μ, k)` point, then assembles fitted loops
/// per μ. Failed points are recorded as gaps.
pub fn scan_experiment(
    p: &Params<f64>,
    cav: &CavityParams,
    mu_list: &[f64],
    n_k: usize,
    dw_grid: &[f64],
    noise: &NoiseSpec,
) -> Result<ScanDataset> {
    p.validate()?;
    cav.validate()?;
    let ks = k_grid(n_k);
    let jobs: Vec<(usize, usize)> = (0..mu_list.len()).flat_map(|i| (0..n_k).map(move |j| (i, j))).collect();
    let measured: Vec<ScanPoint> = jobs
        .par_iter()
        .map(|&(i, j)| measure_point(p, cav, mu_list[i], ks[j], dw_grid, noise, (i, j), true))
        .collect();
    let mut layers = Vec::with_capacity(mu_list.len());
    for (i, chunk) in measured.chunks(n_k.max(1)).enumerate() {
        let points = chunk.to_vec();
        let gaps = points.iter().filter(|pt| pt.fit.is_none()).map(|pt| pt.k_index).collect();
        let loops = assemble_loops(mu_list[i], &ks, &pairs_of(&points));
        layers.push(ScanLayer {
            mu: mu_list[i],
            points,
            loops,
            gaps,
        });
    }
    Ok(ScanDataset {
        params: *p,
        cavity: *cav,
        noise: *noise,
        n_k,
        layers,
    })
}

/// Fitted loops at a single μ without keeping the traces.
pub fn fitted_loops(
    p: &Params<f64>,
    cav: &CavityParams,
    mu: f64,
    n_k: usize,
    dw_grid: &[f64],
    noise: &NoiseSpec,
) -> [BandLoop<f64>; 2] {
    let ks = k_grid(n_k);
    // the stream index is derived from μ so repeated searches stay reproducible
    let mu_index = (mu.to_bits() >> 20) as usize;
    let points: Vec<ScanPoint> = ks
        .par_iter()
        .enumerate()
        .map(|(j, &k)| measure_point(p, cav, mu, k, dw_grid, noise, (mu_index, j), false))
        .collect();
    assemble_loops(mu, &ks, &pairs_of(&points))
}

/// μ at the minimum of the Wasserstein metric computed from fitted loops.
pub fn mu_gbz_from_fits(
    p: &Params<f64>,
    cav: &CavityParams,
    mu_range: (f64, f64),
    n_mu: usize,
    n_k: usize,
    dw_grid: &[f64],
    noise: &NoiseSpec,
) -> Result<f64> {
    let metric = |mu: f64| wasserstein_from_loops(&fitted_loops(p, cav, mu, n_k, dw_grid, noise));
    bracketed_minimum(metric, mu_range.0, mu_range.1, n_mu, 1e-4).map(|(mu, _)| mu)
}
