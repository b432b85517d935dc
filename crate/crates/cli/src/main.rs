use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use nonbloch::analysis::{
    extract_mu_gbz, gbz_circle, mu_gbz_closed_form, obc_spectrum, ronkin_landscape, trace_adaptive, GbzSource,
    TraceOptions,
};
use nonbloch::cavity::{
    extract_eigenenergies, fsr_grid, scan_experiment, synth_transmission, CavityParams, FitInit, NoiseSpec,
    TransmissionTrace,
};
use nonbloch::config::{parse_config, ConfigError, OutputFormat, RunConfig};
use nonbloch::geometry::{
    find_exceptional_mu, metric_curve, self_intersections, winding_number_model, WassersteinMethod,
};
use nonbloch::hologram::{diffraction_oracle, hologram_phase, target_field};
use nonbloch::model::{build_obc_hamiltonian, momentum_to_beta, sample_band_loop};
use nonbloch::output::{
    complex_table, intersection_table, landscape_table, matrix_csv, pairs, spectrum_table, to_json_string, write_bytes,
    write_json, write_scan, write_table, AnalysisSummary, Table,
};
use nonbloch::recipe::{run_recipe, RecipeName};
use nonbloch::Error;

#[derive(Parser)]
#[command(name = "nonbloch", version, about = "Non-Bloch band theory for the non-Hermitian extended SSH chain")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` file)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving all output files
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (defaults to the number of cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the noise seed of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Integral,
    Area,
}

#[derive(Subcommand)]
enum Command {
    /// Band loops E±(k − iμ) for each μ
    Spectrum {
        /// Comma-separated μ values (defaults to `mu_list`)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Wasserstein metric over a μ range
    Wasserstein {
        #[arg(long, default_value_t = -0.6, allow_hyphen_values = true)]
        mu_min: f64,
        #[arg(long, default_value_t = 0.15, allow_hyphen_values = true)]
        mu_max: f64,
        #[arg(long, default_value_t = 151)]
        n_mu: usize,
        #[arg(long, value_enum, default_value = "integral")]
        method: Method,
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Ronkin landscape over real reference energies and μ
    Ronkin {
        #[arg(long, default_value_t = -std::f64::consts::PI, allow_hyphen_values = true)]
        e_min: f64,
        #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
        e_max: f64,
        #[arg(long, default_value_t = 128)]
        n_e: usize,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        mu_min: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        mu_max: f64,
        #[arg(long, default_value_t = 101)]
        n_mu: usize,
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Generalized Brillouin zone, exceptional points and OBC summary
    Gbz {
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Spectral winding number around a reference energy
    Winding {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        e_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        e_im: f64,
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Open-chain spectrum by diagonalization
    Obc {
        #[arg(long)]
        n_cells: Option<usize>,
        /// Also write the Hamiltonian as `re,im` pairs
        #[arg(long)]
        matrix: bool,
    },
    /// Self-intersections of the band loops
    Intersections {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        nk: Option<usize>,
    },
    /// Synthesize one transmission trace
    Synth {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        /// Disable detector noise
        #[arg(long)]
        noiseless: bool,
    },
    /// Fit band energies to a trace with `dw` and `intensity` columns
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Full (μ, k) scan: synthesis, fitting and loop assembly
    Scan {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        nk: Option<usize>,
        #[arg(long)]
        noiseless: bool,
    },
    /// Phase-only hologram for a left non-Bloch projector
    Hologram {
        #[arg(long, allow_hyphen_values = true)]
        beta_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta_im: f64,
        #[arg(long, default_value_t = 20)]
        n_modes: usize,
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long, default_value_t = 16.0)]
        grating: f64,
        /// Output file for the hologram graymap
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        bits: u8,
        /// Run the diffraction oracle and report the fidelity
        #[arg(long)]
        verify: bool,
    },
    /// Reproduce the data behind a figure (fig1, fig3, fig4, fig5)
    Recipe { name: String },
}

enum Failure {
    Config(String),
    Numerical(String),
    Check(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("this command needs --config".into()))?;
    let mut cfg = parse_config(path)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(f) = common.format {
        cfg = cfg.with_format(match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        });
    }
    Ok(cfg)
}

fn mus_or_default(mu: &[f64], cfg: &RunConfig) -> Vec<f64> {
    if mu.is_empty() {
        cfg.mu_list.clone()
    } else {
        mu.to_vec()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn read_trace(path: &Path) -> Result<TransmissionTrace, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Failure::Config(format!("{}: missing column '{name}'", path.display())))
    };
    let (i_dw, i_int) = (col("dw")?, col("intensity")?);
    let mut detunings = Vec::new();
    let mut intensities = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| {
            cells
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Failure::Config(format!("{}: line {}: bad number", path.display(), n + 2)))
        };
        detunings.push(parse(i_dw)?);
        intensities.push(parse(i_int)?);
    }
    Ok(TransmissionTrace {
        beta: Complex64::new(1.0, 0.0),
        detunings,
        intensities,
        noise_seed: None,
    })
}

fn run(cli: Cli) -> Outcome {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let out = &common.out_dir;

    match &cli.command {
        Command::Spectrum { mu, nk } => {
            let cfg = load_config(common)?;
            let n_k = nk.unwrap_or(cfg.n_k);
            for (i, m) in mus_or_default(mu, &cfg).iter().enumerate() {
                let loops = sample_band_loop(&cfg.model, *m, n_k)?;
                report(&write_table(out, &format!("spectrum_mu_{i:03}"), &spectrum_table(&loops), cfg.format)?);
            }
        }
        Command::Wasserstein {
            mu_min,
            mu_max,
            n_mu,
            method,
            nk,
        } => {
            let cfg = load_config(common)?;
            let method = match method {
                Method::Integral => WassersteinMethod::Integral,
                Method::Area => WassersteinMethod::AreaDerivative,
            };
            let mus = linspace(*mu_min, *mu_max, *n_mu);
            let values = metric_curve(&cfg.model, &mus, nk.unwrap_or(cfg.n_k), method);
            let mut t = Table::new(&["mu", "G_w"]);
            for (m, v) in mus.iter().zip(values) {
                t.push(vec![*m, v.unwrap_or(f64::NAN)]);
            }
            report(&write_table(out, "wasserstein", &t, cfg.format)?);
        }
        Command::Ronkin {
            e_min,
            e_max,
            n_e,
            mu_min,
            mu_max,
            n_mu,
            nk,
        } => {
            let cfg = load_config(common)?;
            let es: Vec<Complex64> = linspace(*e_min, *e_max, *n_e)
                .into_iter()
                .map(|e| Complex64::new(e, 0.0))
                .collect();
            let grid = ronkin_landscape(&cfg.model, &es, &linspace(*mu_min, *mu_max, *n_mu), nk.unwrap_or(cfg.n_k))?;
            report(&write_table(out, "ronkin_landscape", &landscape_table(&grid), cfg.format)?);
        }
        Command::Gbz { nk } => {
            let cfg = load_config(common)?;
            let p = cfg.model;
            let n_k = nk.unwrap_or(cfg.n_k);
            let eps = find_exceptional_mu(&p)?;
            let obc = obc_spectrum(&p, cfg.n_cells)?;
            let (mu_gbz, betas) = if let Some(exact) = mu_gbz_closed_form(&p) {
                let lo = eps.first().map_or(exact - 0.2, |e| e.mu + 0.02);
                let hi = eps.last().map_or(exact + 0.2, |e| e.mu - 0.002);
                let found = extract_mu_gbz(&p, (lo, hi), 41, n_k)?;
                if let Some(w) = &found.warning {
                    eprintln!("warning: {w}");
                }
                let circle = gbz_circle(&p, found.mu_gbz, 64, GbzSource::WassersteinMin);
                (Some(found.mu_gbz), circle.betas)
            } else {
                let traced = trace_adaptive(
                    &p,
                    -0.12,
                    -0.01,
                    0.005,
                    TraceOptions {
                        n_k,
                        ..Default::default()
                    },
                )?;
                (None, traced.gbz.betas)
            };
            let summary = AnalysisSummary {
                mu_gbz,
                ep_mus: eps.iter().map(|e| e.mu).collect(),
                obc_eigenvalues: pairs(&obc.eigenvalues),
                gbz_betas: pairs(&betas),
            };
            let path = out.join("analysis.json");
            write_json(&path, &summary)?;
            if let Some(m) = mu_gbz {
                println!("mu_gbz = {m:.6}");
            }
            report(&path);
        }
        Command::Winding { mu, e_re, e_im, nk } => {
            let cfg = load_config(common)?;
            let w = winding_number_model(&cfg.model, *mu, Complex64::new(*e_re, *e_im), nk.unwrap_or(cfg.n_k))?;
            println!("{w}");
        }
        Command::Obc { n_cells, matrix } => {
            let cfg = load_config(common)?;
            let n = n_cells.unwrap_or(cfg.n_cells);
            let s = obc_spectrum(&cfg.model, n)?;
            if let Some(w) = &s.warning {
                eprintln!("warning: {w}");
            }
            report(&write_table(out, "obc_spectrum", &complex_table("E", &s.eigenvalues), cfg.format)?);
            if *matrix {
                let path = out.join("obc_hamiltonian.csv");
                write_bytes(&path, matrix_csv(&build_obc_hamiltonian(&cfg.model, n)?).as_bytes())?;
                report(&path);
            }
        }
        Command::Intersections { mu, nk } => {
            let cfg = load_config(common)?;
            for (i, m) in mus_or_default(mu, &cfg).iter().enumerate() {
                let [a, b] = sample_band_loop(&cfg.model, *m, nk.unwrap_or(cfg.n_k))?;
                let mut pts = self_intersections(&a, &b)?;
                pts.extend(self_intersections(&b, &a)?);
                let q = pts.iter().filter(|x| x.qualifies_as_obc).count();
                println!("mu = {m}: {} crossings, {q} qualifying", pts.len());
                report(&write_table(out, &format!("intersections_mu_{i:03}"), &intersection_table(&pts), cfg.format)?);
            }
        }
        Command::Synth { mu, k, noiseless } => {
            let cfg = load_config(common)?;
            let noise = if *noiseless { NoiseSpec::off() } else { cfg.noise };
            let grid = fsr_grid(&cfg.cavity, cfg.n_dw);
            let tr = synth_transmission(&cfg.model, &cfg.cavity, momentum_to_beta(*k, *mu), &grid, &noise, (0, 0))?;
            let mut t = Table::new(&["dw", "intensity"]);
            for (d, y) in tr.detunings.iter().zip(&tr.intensities) {
                t.push(vec![*d, *y]);
            }
            report(&write_table(out, "trace", &t, cfg.format)?);
        }
        Command::Fit { input } => {
            let cavity = match &common.config {
                Some(_) => load_config(common)?.cavity,
                None => CavityParams::default(),
            };
            let trace = read_trace(input)?;
            let fit = extract_eigenenergies(&trace, &cavity, FitInit::Auto)?;
            if let Some(w) = &fit.warning {
                eprintln!("warning: {w}");
            }
            let path = out.join("fit.json");
            write_json(&path, &fit)?;
            print!("{}", to_json_string(&fit.peaks.iter().map(|p| [p.re_e, p.im_e]).collect::<Vec<_>>())?);
            report(&path);
        }
        Command::Scan { mu, nk, noiseless } => {
            let cfg = load_config(common)?;
            let noise = if *noiseless { NoiseSpec::off() } else { cfg.noise };
            let grid = fsr_grid(&cfg.cavity, cfg.n_dw);
            let ds = scan_experiment(
                &cfg.model,
                &cfg.cavity,
                &mus_or_default(mu, &cfg),
                nk.unwrap_or(cfg.n_k),
                &grid,
                &noise,
            )?;
            for layer in &ds.layers {
                if !layer.gaps.is_empty() {
                    eprintln!("warning: mu = {}: {} points failed", layer.mu, layer.gaps.len());
                }
            }
            for path in write_scan(out, &ds, Some(&cfg), cfg.format)? {
                report(&path);
            }
        }
        Command::Hologram {
            beta_re,
            beta_im,
            n_modes,
            size,
            grating,
            out: target,
            bits,
            verify,
        } => {
            let field = target_field(Complex64::new(*beta_re, *beta_im), *n_modes, *size, *size, None)?;
            let clip = field
                .default_clip()
                .ok_or_else(|| Failure::Config("target field vanishes everywhere".into()))?;
            let holo = hologram_phase(&field, clip, *grating)?;
            let path = target.clone().unwrap_or_else(|| out.join("hologram.pgm"));
            write_bytes(&path, &holo.to_pgm(*bits)?)?;
            report(&path);
            let (modulus, phase) = field.to_pgm_pair(*bits)?;
            let stem = path.with_extension("");
            for (suffix, bytes) in [("field_modulus", modulus), ("field_phase", phase)] {
                let p = PathBuf::from(format!("{}_{suffix}.pgm", stem.display()));
                write_bytes(&p, &bytes)?;
                report(&p);
            }
            if *verify {
                println!("fidelity = {:.6}", diffraction_oracle(&holo, &field)?);
            }
        }
        Command::Recipe { name } => {
            let cfg = load_config(common)?;
            let name: RecipeName = name.parse()?;
            let rep = run_recipe(name, &cfg, out)?;
            for c in &rep.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} files in {}", rep.files.len(), out.display());
            if !rep.all_passed() {
                return Err(Failure::Check(format!("recipe {name} failed its checks")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Check(m)) => {
            eprintln!("{m}");
            ExitCode::from(4)
        }
    }
}
