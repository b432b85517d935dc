//! Flat `key = value` run configuration with strict validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::analysis::obc::MAX_CELLS;
use crate::cavity::{CavityParams, NoiseSpec};
use crate::model::Params;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based line, absent for whole-file problems such as missing keys.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source_name: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration {}", self.source_name)?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Fully resolved run settings. `resolved` echoes every key with the value
/// in effect and whether it came from a default.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: Params<f64>,
    pub model_pi_units: [f64; 4],
    pub cavity: CavityParams,
    pub n_cells: usize,
    pub n_k: usize,
    pub mu_list: Vec<f64>,
    pub n_dw: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub format: OutputFormat,
    pub resolved: Vec<ResolvedKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedKey {
    pub key: String,
    pub value: String,
    pub defaulted: bool,
}

#[derive(Clone, Copy)]
enum Kind {
    Real,
    PositiveReal,
    Fraction,
    NonNegativeReal,
    Count { min: usize, max: usize },
    Seed,
    Format,
    RealList,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
}

const KEYS: &[KeySpec] = &[
    KeySpec { name: "delta1_pi", kind: Kind::PositiveReal, default: None },
    KeySpec { name: "delta2_pi", kind: Kind::Real, default: None },
    KeySpec { name: "eta_pi", kind: Kind::Real, default: None },
    KeySpec { name: "gamma_pi", kind: Kind::Real, default: None },
    KeySpec { name: "n_cells", kind: Kind::Count { min: 2, max: MAX_CELLS }, default: Some("40") },
    KeySpec { name: "n_k", kind: Kind::Count { min: 16, max: 1 << 20 }, default: Some("512") },
    KeySpec { name: "n_modes", kind: Kind::Count { min: 1, max: 10_000 }, default: Some("20") },
    KeySpec { name: "cavity_t", kind: Kind::Fraction, default: Some("0.9") },
    KeySpec { name: "omega_fsr", kind: Kind::PositiveReal, default: Some("1") },
    KeySpec { name: "kappa", kind: Kind::PositiveReal, default: Some("1") },
    KeySpec { name: "mu_list", kind: Kind::RealList, default: Some("0") },
    KeySpec { name: "n_dw", kind: Kind::Count { min: 64, max: 1 << 20 }, default: Some("1024") },
    KeySpec { name: "noise_sigma_rel", kind: Kind::NonNegativeReal, default: Some("0.02") },
    KeySpec { name: "noise_floor_rel", kind: Kind::NonNegativeReal, default: Some("0.0001") },
    KeySpec { name: "seed", kind: Kind::Seed, default: Some("0") },
    KeySpec { name: "format", kind: Kind::Format, default: Some("csv") },
];

fn check_value(kind: Kind, raw: &str) -> Result<(), String> {
    let real = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("'{s}' is not a finite number"))
    };
    match kind {
        Kind::Real => real(raw).map(|_| ()),
        Kind::PositiveReal => match real(raw)? {
            x if x > 0.0 => Ok(()),
            x => Err(format!("{x} must be positive")),
        },
        Kind::NonNegativeReal => match real(raw)? {
            x if x >= 0.0 => Ok(()),
            x => Err(format!("{x} must be non-negative")),
        },
        Kind::Fraction => match real(raw)? {
            x if x > 0.0 && x < 1.0 => Ok(()),
            x => Err(format!("{x} must lie strictly between 0 and 1")),
        },
        Kind::Count { min, max } => match raw.trim().parse::<usize>() {
            Ok(n) if (min..=max).contains(&n) => Ok(()),
            Ok(n) => Err(format!("{n} outside the allowed range {min}..={max}")),
            Err(_) => Err(format!("'{raw}' is not a non-negative integer")),
        },
        Kind::Seed => raw
            .trim()
            .parse::<u64>()
            .map(|_| ())
            .map_err(|_| format!("'{raw}' is not an unsigned integer")),
        Kind::Format => match raw.trim() {
            "csv" | "json" => Ok(()),
            other => Err(format!("'{other}' is not one of csv, json")),
        },
        Kind::RealList => {
            let items: Vec<&str> = raw.split(',').map(str::trim).collect();
            if items.iter().any(|s| s.is_empty()) {
                return Err("list contains an empty entry".into());
            }
            items.into_iter().try_for_each(|s| real(s).map(|_| ()))
        }
    }
}

/// Parses configuration text. `source_name` only labels diagnostics.
pub fn parse_config_str(text: &str, source_name: &str) -> Result<RunConfig, ConfigError> {
    let mut diagnostics = Vec::new();
    let mut values: BTreeMap<&'static str, (String, usize)> = BTreeMap::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                message: format!("expected 'key = value', found '{line}'"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(spec) = KEYS.iter().find(|s| s.name == key) else {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                message: format!("unknown key '{key}'"),
            });
            continue;
        };
        if let Some((_, first)) = values.get(spec.name) {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                message: format!("duplicate key '{key}' (first set on line {first})"),
            });
            continue;
        }
        if value.is_empty() {
            diagnostics.push(Diagnostic {
                line: Some(line_no),
                message: format!("key '{key}' has no value"),
            });
            continue;
        }
        match check_value(spec.kind, value) {
            Ok(()) => {
                values.insert(spec.name, (value.to_string(), line_no));
            }
            Err(msg) => diagnostics.push(Diagnostic {
                line: Some(line_no),
                message: format!("{key}: {msg}"),
            }),
        }
    }

    let missing: Vec<&str> = KEYS
        .iter()
        .filter(|s| s.default.is_none() && !values.contains_key(s.name))
        .map(|s| s.name)
        .collect();
    if !missing.is_empty() {
        diagnostics.push(Diagnostic {
            line: None,
            message: format!("missing required keys: {}", missing.join(", ")),
        });
    }
    if !diagnostics.is_empty() {
        return Err(ConfigError {
            source_name: source_name.to_string(),
            diagnostics,
        });
    }

    let mut resolved = Vec::with_capacity(KEYS.len());
    let mut get = |name: &'static str| -> String {
        let spec = KEYS.iter().find(|s| s.name == name).expect("known key");
        let (value, defaulted) = match values.get(name) {
            Some((v, _)) => (v.clone(), false),
            None => (spec.default.unwrap_or_default().to_string(), true),
        };
        resolved.push(ResolvedKey {
            key: name.to_string(),
            value: value.clone(),
            defaulted,
        });
        value
    };
    let real = |s: String| s.parse::<f64>().expect("validated");
    let count = |s: String| s.parse::<usize>().expect("validated");

    let pi_units = [
        real(get("delta1_pi")),
        real(get("delta2_pi")),
        real(get("eta_pi")),
        real(get("gamma_pi")),
    ];
    let n_cells = count(get("n_cells"));
    let n_k = count(get("n_k"));
    let n_modes = count(get("n_modes"));
    let t = real(get("cavity_t"));
    let omega_fsr = real(get("omega_fsr"));
    let kappa = real(get("kappa"));
    let mu_list = get("mu_list")
        .split(',')
        .map(|s| s.trim().parse::<f64>().expect("validated"))
        .collect();
    let n_dw = count(get("n_dw"));
    let sigma_rel = real(get("noise_sigma_rel"));
    let floor_rel = real(get("noise_floor_rel"));
    let seed = get("seed").parse::<u64>().expect("validated");
    let format = match get("format").as_str() {
        "json" => OutputFormat::Json,
        _ => OutputFormat::Csv,
    };

    Ok(RunConfig {
        model: Params::from_pi_units(pi_units[0], pi_units[1], pi_units[2], pi_units[3]),
        model_pi_units: pi_units,
        cavity: CavityParams {
            t,
            omega_fsr,
            kappa,
            n_modes,
        },
        n_cells,
        n_k,
        mu_list,
        n_dw,
        noise: NoiseSpec {
            sigma_rel,
            floor_rel,
            seed: Some(seed),
        },
        seed,
        format,
        resolved,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source_name: name.clone(),
        diagnostics: vec![Diagnostic {
            line: None,
            message: format!("cannot read file: {e}"),
        }],
    })?;
    parse_config_str(&text, &name)
}

impl RunConfig {
    /// Replaces the seed everywhere it is used and records the override.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.noise.seed = Some(seed);
        if let Some(r) = self.resolved.iter_mut().find(|r| r.key == "seed") {
            r.value = seed.to_string();
            r.defaulted = false;
        }
        self
    }

    pub fn with_format(mut self, format: OutputFormat) -> Self {
        self.format = format;
        if let Some(r) = self.resolved.iter_mut().find(|r| r.key == "format") {
            r.value = match format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            };
            r.defaulted = false;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = "delta1_pi = 0.31\ndelta2_pi = 0\neta_pi = 0.25\ngamma_pi = 0.057\n";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(FIG3, "fig3").unwrap();
        assert_eq!(cfg.model_pi_units, [0.31, 0.0, 0.25, 0.057]);
        assert!((cfg.model.delta1 - 0.31 * std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(cfg.n_cells, 40);
        assert_eq!(cfg.n_k, 512);
        assert_eq!(cfg.cavity.n_modes, 20);
        assert_eq!(cfg.cavity.t, 0.9);
        assert_eq!(cfg.resolved.len(), KEYS.len());
        assert!(cfg.resolved.iter().find(|r| r.key == "n_cells").unwrap().defaulted);
        assert!(!cfg.resolved.iter().find(|r| r.key == "eta_pi").unwrap().defaulted);
    }

    #[test]
    fn empty_file_lists_missing_keys() {
        let err = parse_config_str("", "empty").unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        let msg = &err.diagnostics[0].message;
        for k in ["delta1_pi", "delta2_pi", "eta_pi", "gamma_pi"] {
            assert!(msg.contains(k));
        }
    }

    #[test]
    fn diagnostics_carry_lines() {
        let text = format!("{FIG3}# comment\nn_cells = 500\ncolour = red\nmu_list = 0, x\nnonsense\n");
        let err = parse_config_str(&text, "bad").unwrap_err();
        let lines: Vec<_> = err.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![Some(6), Some(7), Some(8), Some(9)]);
    }

    #[test]
    fn delta1_must_be_positive() {
        let text = FIG3.replace("0.31", "-0.31");
        assert!(parse_config_str(&text, "neg").is_err());
    }

    #[test]
    fn duplicates_and_inline_comments() {
        let text = format!("{FIG3}mu_list = 0, -0.1 # two values\nseed = 5\nseed = 6\n");
        let err = parse_config_str(&text, "dup").unwrap_err();
        assert_eq!(err.diagnostics[0].line, Some(7));
        let ok = parse_config_str(&format!("{FIG3}mu_list = 0, -0.1 # two values\n"), "ok").unwrap();
        assert_eq!(ok.mu_list, vec![0.0, -0.1]);
    }
}
