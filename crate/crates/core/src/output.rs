//! Deterministic CSV/JSON serialization of results.
//!
//! Floats in CSV use 17 significant digits in scientific notation, which
//! round-trips every `f64` and does not depend on the locale.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::RonkinGrid;
use crate::cavity::ScanDataset;
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::IntersectionPoint;
use crate::linalg::CMatrix;
use crate::model::BandLoop;

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Rectangular numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// `{"columns": [...], "rows": [[...], ...]}` with non-finite values as `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<Option<f64>>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&x| x.is_finite().then_some(x)).collect())
            .collect();
        let value = serde_json::json!({ "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&value).expect("table serializes");
        s.push('\n');
        s
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes `stem.csv` or `stem.json` under `dir` and returns the path.
pub fn write_table(dir: &Path, stem: &str, table: &Table, format: OutputFormat) -> Result<PathBuf> {
    let (path, text) = match format {
        OutputFormat::Csv => (dir.join(format!("{stem}.csv")), table.to_csv()),
        OutputFormat::Json => (dir.join(format!("{stem}.json")), table.to_json()),
    };
    write_bytes(&path, text.as_bytes())?;
    Ok(path)
}

pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    write_bytes(path, to_json_string(value)?.as_bytes())
}

/// `k, re_E_plus, im_E_plus, re_E_minus, im_E_minus` over one `2π` period.
pub fn spectrum_table(loops: &[BandLoop<f64>; 2]) -> Table {
    let mut t = Table::new(&["k", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus"]);
    let period_samples = match loops[0].closure {
        crate::model::Closure::FourPi => loops[0].len() / 2,
        _ => loops[0].len(),
    };
    for j in 0..period_samples {
        let (a, b) = (&loops[0].samples[j], &loops[1].samples[j]);
        t.push(vec![a.k, a.energy.re, a.energy.im, b.energy.re, b.energy.im]);
    }
    t
}

/// Each row holds `re,im` pairs for the matrix row.
pub fn matrix_csv(m: &CMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m
            .row(r)
            .iter()
            .flat_map(|z| [fmt_float(z.re), fmt_float(z.im)])
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn complex_table(name: &str, values: &[Complex64]) -> Table {
    let re = format!("re_{name}");
    let im = format!("im_{name}");
    let mut t = Table::new(&[re.as_str(), im.as_str()]);
    for z in values {
        t.push(vec![z.re, z.im]);
    }
    t
}

/// Long-format landscape `e_re, e_im, mu, V`; cells on the spectrum are NaN.
pub fn landscape_table(grid: &RonkinGrid<f64>) -> Table {
    let mut t = Table::new(&["e_re", "e_im", "mu", "V"]);
    for (i, mu) in grid.mus.iter().enumerate() {
        for (j, e) in grid.e_refs.iter().enumerate() {
            t.push(vec![e.re, e.im, *mu, grid.values[i][j].unwrap_or(f64::NAN)]);
        }
    }
    t
}

pub fn intersection_table(points: &[IntersectionPoint<f64>]) -> Table {
    let mut t = Table::new(&[
        "mu",
        "band",
        "re_E",
        "im_E",
        "k_a",
        "k_b",
        "qualifies",
        "tangential",
        "winding_a",
        "winding_b",
        "gap",
    ]);
    for x in points {
        let band = match x.band {
            crate::model::Band::Plus => 1.0,
            crate::model::Band::Minus => -1.0,
        };
        t.push(vec![
            x.mu,
            band,
            x.energy.re,
            x.energy.im,
            x.k_pair.0,
            x.k_pair.1,
            f64::from(u8::from(x.qualifies_as_obc)),
            f64::from(u8::from(x.tangential)),
            f64::from(x.sector_windings.0),
            f64::from(x.sector_windings.1),
            x.gap,
        ]);
    }
    t
}

/// Summary shared by the analysis commands and recipes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub mu_gbz: Option<f64>,
    pub ep_mus: Vec<f64>,
    pub obc_eigenvalues: Vec<[f64; 2]>,
    pub gbz_betas: Vec<[f64; 2]>,
}

pub fn pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanLayerEntry {
    pub mu: f64,
    pub file: String,
    pub fitted_file: String,
    pub gaps: Vec<usize>,
    pub closure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanManifest<'a> {
    pub config: Option<&'a RunConfig>,
    pub n_k: usize,
    pub n_dw: usize,
    pub layers: Vec<ScanLayerEntry>,
}

/// Fitted energies per k; failed points are NaN.
pub fn fitted_table(layer: &crate::cavity::ScanLayer) -> Table {
    let mut t = Table::new(&[
        "k",
        "re_E_plus",
        "im_E_plus",
        "re_E_minus",
        "im_E_minus",
        "residual",
    ]);
    let plus = &layer.loops[0];
    let minus = &layer.loops[1];
    let mut sample = 0;
    for pt in &layer.points {
        if pt.fit.is_some() && sample < plus.len() {
            let (a, b) = (plus.samples[sample].energy, minus.samples[sample].energy);
            let resid = pt.fit.as_ref().map_or(f64::NAN, |f| f.peaks[0].fit_residual);
            t.push(vec![pt.k, a.re, a.im, b.re, b.im, resid]);
            sample += 1;
        } else {
            t.push(vec![pt.k, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
        }
    }
    t
}

/// One `k, dw, intensity` file and one fitted-band file per μ, plus
/// `manifest.json`.
pub fn write_scan(dir: &Path, ds: &ScanDataset, config: Option<&RunConfig>, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut layers = Vec::new();
    let n_dw = ds
        .layers
        .iter()
        .flat_map(|l| l.points.iter())
        .find_map(|p| p.trace.as_ref().map(|t| t.detunings.len()))
        .unwrap_or(0);
    for (i, layer) in ds.layers.iter().enumerate() {
        let mut t = Table::new(&["k", "dw", "intensity"]);
        for pt in &layer.points {
            if let Some(tr) = &pt.trace {
                for (dw, y) in tr.detunings.iter().zip(&tr.intensities) {
                    t.push(vec![pt.k, *dw, *y]);
                }
            }
        }
        let stem = format!("scan_mu_{i:03}");
        let path = write_table(dir, &stem, &t, format)?;
        let fitted = write_table(dir, &format!("fitted_mu_{i:03}"), &fitted_table(layer), format)?;
        layers.push(ScanLayerEntry {
            mu: layer.mu,
            file: file_name(&path),
            fitted_file: file_name(&fitted),
            gaps: layer.gaps.clone(),
            closure: format!("{:?}", layer.loops[0].closure),
        });
        written.push(path);
        written.push(fitted);
    }
    let manifest = ScanManifest {
        config,
        n_k: ds.n_k,
        n_dw,
        layers,
    };
    let mpath = dir.join("manifest.json");
    write_json(&mpath, &manifest)?;
    written.push(mpath);
    Ok(written)
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
