//! The `obslab` batch front-end.
//!
//! A run reads one JSON [`RunConfig`], applies `--set key=value` overrides,
//! fills defaults, echoes the effective configuration, and writes JSON/CSV
//! artifacts into the output directory. Relative paths resolve against the
//! config file's directory.
//!
//! Exit codes: `0` success, `1` runtime failure, `2` invalid configuration,
//! `3` a verification subcommand found a violated inequality.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::{gcc_check, vgcc_check, ControlResolution, ControlVerdict};
use crate::error::Error;
use crate::gap::{gap_report, GapReport};
use crate::geometry::{FactorManifold, FactorPoint, FactorSpectrum};
use crate::observability::{
    assemble_gramian, g1v_estimate, obs_report, slice_family, verify_slice_inequality, G1vEstimate, G1vMode,
    ObservabilityConfig, ObservabilityReport, SliceCheckReport,
};
use crate::output::{config_hash, fmt_f64, to_json_string, Csv};
use crate::qlprobe::{concentration_scan, ConcentrationFamily, ConcentrationSeries, ConcentrationTarget};
use crate::quadrature::{QuadratureGrid, DEFAULT_CIRCLE_RESOLUTION, DEFAULT_SPHERE_RESOLUTION};
use crate::regions::{FactorSet, Region};
use crate::spectral::{evolve, ModeSet, ProductManifold, StateVector, SymbolSpec, TOL_EQ};

#[derive(Debug, Parser)]
#[command(name = "obslab", version, about = "Observability laboratory for Schrödinger-type equations on product manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set region.right.half_width=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker thread cap; falls back to OBSLAB_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Factor spectra and the product mode list.
    Spectrum,
    /// Distinct frequencies and the gap constant.
    Gap,
    /// Sampled vertical geometric control.
    Vgcc,
    /// Sampled geometric control on one factor (needs a `gcc` section).
    Gcc,
    /// Gramian entries as `row,col,re,im`.
    Gramian,
    /// Observability report and cutoff series.
    Obsconst,
    /// The g₁ᵛ estimate in both modes.
    G1v,
    /// Coefficients of a seeded random state at the requested times.
    Evolve,
    /// Concentration scan (needs a `qlscan` section).
    Qlscan,
    /// Full pipeline: observability report, gap report, and the slice check
    /// when a `verify` section is present.
    Report,
    /// Slice inequality check on seeded random coefficients.
    Verify,
}

fn default_symbol() -> SymbolSpec {
    SymbolSpec::Identity
}

fn default_region() -> Region {
    Region::full()
}

fn default_tol() -> f64 {
    TOL_EQ
}

fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G1vConfig {
    pub samples: usize,
    pub mode: G1vMode,
}

impl Default for G1vConfig {
    fn default() -> Self {
        G1vConfig { samples: 16, mode: G1vMode::Eigenspace }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GccConfig {
    pub manifold: FactorManifold,
    pub set: FactorSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlScanConfig {
    pub family: ConcentrationFamily,
    pub target: ConcentrationTarget,
    pub l_values: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Left base point of the slice; defaults to the first left sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<FactorPoint>,
    pub n_terms: usize,
    pub trials: usize,
    /// Defaults to `4 / C_0` of the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

/// One run's configuration. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub product: ProductManifold,
    #[serde(default = "default_symbol")]
    pub symbol: SymbolSpec,
    pub lambda_max: f64,
    /// Cutoffs of the observability series; defaults to `[lambda_max]`.
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    #[serde(default = "default_region")]
    pub region: Region,
    pub horizon: f64,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
    #[serde(default)]
    pub control: Option<ControlResolution>,
    #[serde(default)]
    pub g1v: G1vConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol_eq: f64,
    #[serde(default = "default_output")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gcc: Option<GccConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qlscan: Option<QlScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

fn default_resolution(m: FactorManifold) -> Vec<usize> {
    match m {
        FactorManifold::Circle => vec![DEFAULT_CIRCLE_RESOLUTION],
        FactorManifold::Sphere2 => DEFAULT_SPHERE_RESOLUTION.to_vec(),
    }
}

impl RunConfig {
    /// Fills every defaulted field so the echoed config is self-contained.
    pub fn resolved(mut self) -> Result<Self, CliError> {
        if !(self.lambda_max >= 0.0 && self.lambda_max.is_finite()) {
            return Err(CliError::Validation(format!("lambda_max must be finite and >= 0, got {}", self.lambda_max)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::Validation(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.cutoffs.is_empty() {
            self.cutoffs = vec![self.lambda_max];
        }
        if self.cutoffs.iter().any(|c| !(*c >= 0.0 && *c <= self.lambda_max)) {
            return Err(CliError::Validation("cutoffs must lie in [0, lambda_max]".into()));
        }
        self.quadrature.get_or_insert_with(|| QuadratureConfig {
            left: default_resolution(self.product.left),
            right: default_resolution(self.product.right),
        });
        self.control.get_or_insert_with(|| ControlResolution::default_for(self.product.right));
        self.region = self.region.validated(self.product)?;
        Ok(self)
    }

    fn grids(&self) -> Result<(QuadratureGrid, QuadratureGrid), Error> {
        let q = self.quadrature.as_ref().expect("resolved config");
        Ok((QuadratureGrid::new(self.product.left, &q.left)?, QuadratureGrid::new(self.product.right, &q.right)?))
    }

    fn control(&self) -> ControlResolution {
        self.control.expect("resolved config")
    }

    fn modes(&self) -> Result<ModeSet, Error> {
        self.symbol.mode_set(self.product, self.lambda_max, self.tol_eq)
    }

    pub fn observability(&self) -> ObservabilityConfig {
        let q = self.quadrature.clone().expect("resolved config");
        ObservabilityConfig {
            product: self.product,
            symbol: self.symbol,
            cutoffs: self.cutoffs.clone(),
            region: self.region.clone(),
            horizon: self.horizon,
            grid_left: q.left,
            grid_right: q.right,
            control: self.control(),
            g1v_samples: self.g1v.samples,
            tol_eq: self.tol_eq,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("verification failed: {0}")]
    Assertion(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Assertion(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPositiveSemidefinite { .. } | Error::EigenFailure => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Every JSON artifact: the result tagged with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub seed: u64,
    pub result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G1vPair {
    pub eigenspace: G1vEstimate,
    pub basis_only: G1vEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullReport {
    pub observability: ObservabilityReport,
    pub gap: GapReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_check: Option<SliceCheckReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlScanArtifact {
    pub series: ConcentrationSeries,
    pub region_id: String,
    pub grid_left: Vec<usize>,
    pub grid_right: Vec<usize>,
}

/// Applies one dotted `key=value` override. The value is parsed as JSON and
/// falls back to a plain string.
pub fn apply_override(config: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = config;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Validation(format!("`{part}` in `{key}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Validation(format!("index {idx} out of range (len {len}) in `{key}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Validation(format!("`{key}` descends into a scalar"))),
        };
    }
    Err(CliError::Validation(format!("empty override key in `{assignment}`")))
}

/// Parses, overrides and resolves a configuration.
pub fn load_config(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Validation(e.to_string()))?;
    cfg.resolved()
}

struct Run {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    written: Vec<PathBuf>,
}

impl Run {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, result: T) -> Result<(), CliError> {
        let a = Artifact { config_hash: self.hash.clone(), seed: self.cfg.seed, result };
        let text = to_json_string(&a).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.write(name, &text)
    }

    fn csv(&self, header: &[&str]) -> Csv {
        Csv::new(&self.hash, self.cfg.seed, header)
    }
}

fn series_csv(run: &Run, report: &ObservabilityReport) -> Csv {
    let mut csv = run.csv(&["lambda_max", "n_modes", "lambda_min", "g1v", "C0", "vgcc"]);
    for p in &report.series {
        csv.row(&[fmt_f64(p.lambda_max), p.n_modes.to_string(), fmt_f64(p.lambda_min), fmt_f64(p.g1v), fmt_f64(p.gap_constant), p.vgcc.to_string()]);
    }
    csv
}

fn slice_check(cfg: &RunConfig, v: &VerifyConfig) -> Result<SliceCheckReport, CliError> {
    let modes = cfg.modes()?;
    let family = slice_family(&modes, v.n_terms)?;
    let freqs: Vec<f64> = family.iter().map(|t| t.frequency).collect();
    let c0 = gap_report(&freqs, cfg.tol_eq)?.gap_constant;
    let horizon = v.horizon.unwrap_or(4.0 / c0);
    if !horizon.is_finite() {
        return Err(CliError::Validation("family has a single frequency; set verify.horizon".into()));
    }
    let x = v.x.unwrap_or_else(|| crate::control::factor_samples(cfg.product.left, 1)[0]);
    if x.manifold() != cfg.product.left || !x.is_valid() {
        return Err(CliError::Validation("verify.x is not a point of the left factor".into()));
    }
    let (_, gr) = cfg.grids()?;
    Ok(verify_slice_inequality(&family, modes.right(), &cfg.region.slice(x), horizon, c0, &gr, v.trials, cfg.seed)?)
}

fn execute(run: &mut Run, command: Command) -> Result<(), CliError> {
    let cfg = run.cfg.clone();
    match command {
        Command::Spectrum => {
            let mut factors = run.csv(&["factor", "level", "eigenvalue", "multiplicity", "offset"]);
            for (side, m) in [("left", cfg.product.left), ("right", cfg.product.right)] {
                let spec = FactorSpectrum::build(m, cfg.lambda_max)?;
                for l in spec.levels() {
                    factors.row(&[side.into(), l.index.to_string(), fmt_f64(l.eigenvalue), l.multiplicity.to_string(), l.offset.to_string()]);
                }
            }
            run.write("factor_spectrum.csv", factors.as_str())?;
            let modes = cfg.modes()?;
            let mut csv = run.csv(&["index", "j", "k", "mu_sum", "frequency"]);
            for (a, m) in modes.modes().iter().enumerate() {
                csv.row(&[a.to_string(), m.j.to_string(), m.k.to_string(), fmt_f64(m.mu_sum), fmt_f64(m.frequency)]);
            }
            run.write("modes.csv", csv.as_str())?;
        }
        Command::Gap => {
            let r = gap_report(&cfg.modes()?.frequencies(), cfg.tol_eq)?;
            let mut csv = run.csv(&["C0", "n_distinct", "pair_low", "pair_high"]);
            let (lo, hi) = r.achieving_pair.map_or((f64::NAN, f64::NAN), |p| p);
            csv.row(&[fmt_f64(r.gap_constant), r.distinct_values.len().to_string(), fmt_f64(lo), fmt_f64(hi)]);
            run.write("gap.csv", csv.as_str())?;
            run.write_json("gap.json", r)?;
        }
        Command::Vgcc => {
            let v = vgcc_check(cfg.product, &cfg.region, cfg.horizon, &cfg.control())?;
            run.write_json("vgcc.json", v)?;
        }
        Command::Gcc => {
            let g = cfg.gcc.as_ref().ok_or_else(|| CliError::Validation("`gcc` needs a gcc section".into()))?;
            let res = cfg.control.filter(|_| g.manifold == cfg.product.right).unwrap_or_else(|| ControlResolution::default_for(g.manifold));
            let v: ControlVerdict = gcc_check(g.manifold, &g.set, cfg.horizon, &res)?;
            run.write_json("gcc.json", v)?;
        }
        Command::Gramian => {
            let modes = cfg.modes()?;
            let (gl, gr) = cfg.grids()?;
            let g = assemble_gramian(&modes, &cfg.region, cfg.horizon, &gl, &gr)?;
            let mut csv = run.csv(&["row", "col", "re", "im"]);
            let m = g.matrix();
            for r in 0..g.dim() {
                for c in 0..g.dim() {
                    csv.row(&[r.to_string(), c.to_string(), fmt_f64(m[(r, c)].re), fmt_f64(m[(r, c)].im)]);
                }
            }
            run.write("gramian.csv", csv.as_str())?;
        }
        Command::Obsconst => {
            let report = obs_report(&cfg.observability())?;
            let csv = series_csv(run, &report);
            run.write("series.csv", csv.as_str())?;
            run.write_json("obsconst.json", report)?;
        }
        Command::G1v => {
            let (_, gr) = cfg.grids()?;
            let right = FactorSpectrum::build(cfg.product.right, cfg.lambda_max)?;
            let xs = crate::control::factor_samples(cfg.product.left, cfg.g1v.samples.max(1));
            let eigenspace = g1v_estimate(&cfg.region, cfg.product, &right, &xs, &gr, G1vMode::Eigenspace)?;
            let basis_only = g1v_estimate(&cfg.region, cfg.product, &right, &xs, &gr, G1vMode::BasisOnly)?;
            run.write_json("g1v.json", G1vPair { eigenspace, basis_only })?;
        }
        Command::Evolve => {
            let e = cfg.evolve.as_ref().ok_or_else(|| CliError::Validation("`evolve` needs an evolve section".into()))?;
            let modes = cfg.modes()?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let s0 = StateVector::random(modes.len(), &mut rng);
            let mut csv = run.csv(&["t", "mode", "j", "k", "re", "im"]);
            for &t in &e.times {
                let s = evolve(&modes, &s0, t)?;
                for (a, (m, c)) in modes.modes().iter().zip(s.coefficients()).enumerate() {
                    csv.row(&[fmt_f64(t), a.to_string(), m.j.to_string(), m.k.to_string(), fmt_f64(c.re), fmt_f64(c.im)]);
                }
            }
            run.write("evolve.csv", csv.as_str())?;
        }
        Command::Qlscan => {
            let q = cfg.qlscan.as_ref().ok_or_else(|| CliError::Validation("`qlscan` needs a qlscan section".into()))?;
            let (gl, gr) = match &q.target {
                ConcentrationTarget::Sphere { .. } => {
                    let r = match cfg.product.right {
                        FactorManifold::Sphere2 => cfg.quadrature.as_ref().expect("resolved config").right.clone(),
                        FactorManifold::Circle => DEFAULT_SPHERE_RESOLUTION.to_vec(),
                    };
                    let g = QuadratureGrid::new(FactorManifold::Sphere2, &r)?;
                    (g.clone(), g)
                }
                ConcentrationTarget::Product { product, .. } if *product != cfg.product => {
                    return Err(CliError::Validation("qlscan target product differs from the run product".into()));
                }
                ConcentrationTarget::Product { .. } => cfg.grids()?,
            };
            let series = concentration_scan(q.family, &q.target, &q.l_values, &gl, &gr)?;
            let target_json = serde_json::to_value(&q.target).expect("target serializes");
            let region_id = config_hash(&target_json)[..12].to_string();
            let mut csv = run.csv(&["l", "mass", "region_id"]);
            for (l, m) in series.l_values.iter().zip(&series.masses) {
                csv.row(&[l.to_string(), fmt_f64(*m), region_id.clone()]);
            }
            run.write("qlscan.csv", csv.as_str())?;
            let sidecar = QlScanArtifact {
                series,
                region_id,
                grid_left: gl.resolution().to_vec(),
                grid_right: gr.resolution().to_vec(),
            };
            run.write_json("qlscan.json", sidecar)?;
        }
        Command::Report => {
            let observability = obs_report(&cfg.observability())?;
            let gap = gap_report(&cfg.modes()?.frequencies(), cfg.tol_eq)?;
            let slice = cfg.verify.as_ref().map(|v| slice_check(&cfg, v)).transpose()?;
            let csv = series_csv(run, &observability);
            run.write("series.csv", csv.as_str())?;
            run.write_json("report.json", FullReport { observability, gap, slice_check: slice })?;
        }
        Command::Verify => {
            let v = cfg.verify.clone().unwrap_or(VerifyConfig { x: None, n_terms: 30, trials: 100, horizon: None });
            let report = slice_check(&cfg, &v)?;
            let passed = report.passed;
            let min_ratio = report.min_ratio;
            run.write_json("verify.json", report)?;
            if !passed {
                return Err(CliError::Assertion(format!("slice inequality violated, min ratio {min_ratio}")));
            }
        }
    }
    Ok(())
}

/// Runs one subcommand; returns the artifact paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let threads = cli.threads.or_else(|| std::env::var("OBSLAB_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let cfg = load_config(&text, &cli.overrides)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = base.join(&cfg.output_dir);
    fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("creating {}: {e}", out.display())))?;
    let effective = serde_json::to_value(&cfg).expect("config serializes");
    let hash = config_hash(&effective);
    let mut run = Run { cfg, hash, out, written: Vec::new() };
    let echoed = to_json_string(&effective).map_err(|e| CliError::Runtime(e.to_string()))?;
    run.write("effective_config.json", &echoed)?;
    execute(&mut run, cli.command)?;
    Ok(run.written)
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("obslab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
