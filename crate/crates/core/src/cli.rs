//! Command-line harness: config parsing, sweep tables and the subcommands
//! behind the `infoloss` binary.
//!
//! Exit codes: 0 success, 1 a check failed, 2 usage or parse error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{cond_diff_entropy_x2_given_x1, cond_entropy_w_given_x, default_bins, QuadratureConfig};
use crate::lossrate::{
    analyze_loss_rate, bound_prop4, loss_rate_analytic, loss_rate_bounds_mc, loss_rv, AnalysisSettings,
    LossRateReport,
};
use crate::lumpability::{analyze_lumpability, check_lumpable, LumpConfig, LumpabilityReport};
use crate::pbf::{self, Branch, FunctionTag, PiecewiseFunction};
use crate::process::{self, StationaryProcess};
use crate::relloss::{
    binomial_standard_error, classify, downsampler_relative_loss, empirical_constant_frequency, ratio_to_f64,
    DimensionProfile, Regime, MIN_FREQUENCY_SAMPLES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

// ---------------------------------------------------------------- config

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1Params {
    pub a: f64,
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicParams {
    #[serde(rename = "M")]
    pub m: f64,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaParams {
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalParams {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ProcessSpec {
    Ar1(Ar1Params),
    CyclicWalk(CyclicParams),
    Tightness,
    IidGaussian(SigmaParams),
    IidUniform(IntervalParams),
}

impl ProcessSpec {
    pub fn build(&self) -> Result<StationaryProcess> {
        match self {
            ProcessSpec::Ar1(p) => process::make_ar1(p.a, p.sigma),
            ProcessSpec::CyclicWalk(p) => process::make_cyclic_walk(p.m, p.a),
            ProcessSpec::Tightness => Ok(process::make_tightness_example()),
            ProcessSpec::IidGaussian(p) => process::iid_gaussian(p.sigma),
            ProcessSpec::IidUniform(p) => process::iid_uniform(p.lo, p.hi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleParams {
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftModParams {
    pub period: f64,
    #[serde(default)]
    pub offset: f64,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerParams {
    pub edges: Vec<f64>,
}

/// One piece of a user-defined function: affine `slope*x + intercept` or constant.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PieceSpec {
    Affine { lo: f64, hi: f64, slope: f64, intercept: f64 },
    Constant { lo: f64, hi: f64, value: f64 },
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseParams {
    pub branches: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FunctionSpec {
    Identity,
    Magnitude,
    Scale(ScaleParams),
    Square,
    ShiftMod(ShiftModParams),
    Quantizer(QuantizerParams),
    /// Stages applied in order, first stage first.
    Compose(Vec<FunctionSpec>),
    Piecewise(PiecewiseParams),
}

impl FunctionSpec {
    pub fn build(&self) -> Result<PiecewiseFunction> {
        match self {
            FunctionSpec::Identity => Ok(pbf::identity()),
            FunctionSpec::Magnitude => Ok(pbf::magnitude()),
            FunctionSpec::Scale(p) => pbf::scale(p.k),
            FunctionSpec::Square => Ok(pbf::square()),
            FunctionSpec::ShiftMod(p) => pbf::shift_mod(p.period, p.offset, p.cells),
            FunctionSpec::Quantizer(p) => pbf::quantizer(&p.edges),
            FunctionSpec::Compose(stages) => {
                let mut it = stages.iter();
                let first = it
                    .next()
                    .ok_or_else(|| Error::IncompatibleSpec("compose needs at least one stage".into()))?;
                let mut acc = first.build()?;
                for s in it {
                    acc = PiecewiseFunction::compose(&s.build()?, &acc)?;
                }
                Ok(acc)
            }
            FunctionSpec::Piecewise(p) => {
                let branches = p
                    .branches
                    .iter()
                    .map(|b| match *b {
                        PieceSpec::Affine { lo, hi, slope, intercept } => Branch::affine(lo, hi, slope, intercept),
                        PieceSpec::Constant { lo, hi, value } => Branch::constant(lo, hi, value),
                    })
                    .collect();
                PiecewiseFunction::new(branches, FunctionTag::Custom)
            }
        }
    }

    /// The individual stages of a composition (a single stage otherwise).
    pub fn stages(&self) -> Vec<FunctionSpec> {
        match self {
            FunctionSpec::Compose(s) => s.iter().flat_map(|f| f.stages()).collect(),
            other => vec![other.clone()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    pub samples: Option<usize>,
    pub bins: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pick the pipeline from the function's constant mass.
    #[default]
    Auto,
    LossRate,
    RelativeLoss,
}

/// A declarative analysis request.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub mode: Mode,
    pub process: ProcessSpec,
    pub function: FunctionSpec,
    #[serde(default)]
    pub estimation: EstimationSpec,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

// ----------------------------------------------------------------- tables

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Rational(Ratio<u64>),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // shortest representation that parses back to the same bits
            Cell::Real(v) => write!(f, "{v:?}"),
            Cell::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Real(v) if v.is_finite() => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Ratio<u64>> for Cell {
    fn from(r: Ratio<u64>) -> Self {
        Cell::Rational(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub n_samples: usize,
    pub bins: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
}

/// Columns of reals or rationals with enough metadata to regenerate them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Metadata,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

// -------------------------------------------------------------------- cli

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
        _ => Err(format!("expected a non-negative integer, got {s:?}")),
    }
}

#[derive(Clone, Debug, Args)]
pub struct GlobalOpts {
    /// RNG seed for every sampled path.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Path length for Monte Carlo estimates (accepts 1e6).
    #[arg(long, global = true, value_parser = parse_count)]
    pub samples: Option<usize>,
    /// Histogram bins per axis [default: ceil(samples^(1/3))].
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long = "quad-tol", global = true)]
    pub quad_tol: Option<f64>,
    /// Grid points per axis for lumpability checks.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Output file; `.json` selects JSON, anything else CSV for sweeps.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "infoloss", version, about = "Information loss rates of piecewise bijective functions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

fn default_a_values() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// AR(1) process through the magnitude function, swept over the pole.
    Ar1Sweep {
        #[arg(long = "a", value_delimiter = ',', default_values_t = default_a_values())]
        a_values: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Cyclic random walk through the magnitude function, swept over a/M.
    CyclicSweep {
        #[arg(long = "ratio", value_delimiter = ',', default_values_t = (1..=10).map(|k| k as f64 / 10.0).collect::<Vec<_>>())]
        ratios: Vec<f64>,
        #[arg(long = "M", default_value_t = 1.0)]
        m: f64,
    },
    /// The example where every bound is attained.
    Tightness,
    /// Relative loss of an M-fold downsampler for several block lengths.
    Downsample {
        #[arg(long = "M")]
        m: u64,
        #[arg(long = "n", value_delimiter = ',', default_values_t = vec![1u64, 2, 3, 4, 5, 6, 7, 8, 10, 100, 1000])]
        n: Vec<u64>,
    },
    /// Relative information loss (rate).
    RelLoss {
        /// Downsampling factor.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        downsample: Option<u64>,
        /// Block length; omit for the limit.
        #[arg(long, requires = "downsample")]
        block: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check the sufficient condition for a Markov output; exits 1 if it fails.
    LumpCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full report for the function and process of a config file.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Fully resolved numeric settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub n_samples: usize,
    pub bins: usize,
    pub quad: QuadratureConfig,
    pub lump: LumpConfig,
}

impl Settings {
    pub fn resolve(g: &GlobalOpts, est: Option<&EstimationSpec>) -> Result<Self> {
        let est = est.cloned().unwrap_or_default();
        let n_samples = g.samples.or(est.samples).unwrap_or(1_000_000);
        let bins = g.bins.or(est.bins).unwrap_or_else(|| default_bins(n_samples));
        let quad_tol = g.quad_tol.unwrap_or(1e-9);
        if quad_tol.is_nan() || quad_tol <= 0.0 {
            return Err(Error::BadParameter(format!("--quad-tol must be positive, got {quad_tol}")));
        }
        if bins == 0 {
            return Err(Error::BadParameter("--bins must be at least 1".into()));
        }
        Ok(Settings {
            seed: g.seed.or(est.seed).unwrap_or(42),
            n_samples,
            bins,
            quad: QuadratureConfig::with_tol(quad_tol),
            lump: LumpConfig {
                grid: g.grid.unwrap_or(201),
                ..LumpConfig::default()
            },
        })
    }

    fn analysis(&self) -> AnalysisSettings {
        AnalysisSettings {
            n_samples: self.n_samples,
            bins: Some(self.bins),
            seed: self.seed,
            quad: self.quad.clone(),
            lump: self.lump.clone(),
            ..AnalysisSettings::default()
        }
    }

    fn metadata(&self, command: &str, argv: &[String]) -> Metadata {
        let mut tolerances = BTreeMap::new();
        tolerances.insert("quad_tol".into(), self.quad.abs_tol);
        tolerances.insert("lump_tol".into(), self.lump.tol);
        tolerances.insert("lump_grid".into(), self.lump.grid as f64);
        Metadata {
            command: command.into(),
            command_line: argv.to_vec(),
            seed: self.seed,
            n_samples: self.n_samples,
            bins: self.bins,
            tolerances,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// What a command produced.
#[derive(Clone, Debug)]
pub enum Output {
    Table(SweepTable),
    Json { value: serde_json::Value, passed: bool },
}

impl Output {
    fn json<T: Serialize>(v: &T, passed: bool) -> Result<Self> {
        Ok(Output::Json {
            value: serde_json::to_value(v)?,
            passed,
        })
    }

    pub fn passed(&self) -> bool {
        match self {
            Output::Table(_) => true,
            Output::Json { passed, .. } => *passed,
        }
    }

    fn render(&self, json: bool) -> Result<String> {
        Ok(match self {
            Output::Table(t) if json => t.to_json_string()?,
            Output::Table(t) => t.to_csv_string()?,
            Output::Json { value, .. } => serde_json::to_string_pretty(value)?,
        })
    }
}

// --------------------------------------------------------------- commands

/// One row per pole `a`.
pub fn cmd_ar1_sweep(a_values: &[f64], sigma: f64, s: &Settings, argv: &[String]) -> Result<SweepTable> {
    if let Some(&a) = a_values.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::BadParameter(format!("pole must lie in (0, 1), got {a}")));
    }
    let f = pbf::magnitude();
    let rows: Vec<Vec<Cell>> = a_values
        .par_iter()
        .map(|&a| -> Result<Vec<Cell>> {
            let p = process::make_ar1(a, sigma)?;
            let lump = check_lumpable(&f, &p, &s.lump);
            let sandwich = loss_rate_bounds_mc(&f, &p, s.n_samples, s.seed, s.bins, &s.quad)?;
            let value = loss_rate_analytic(&f, &p, &s.quad).ok();
            let prop5 = cond_entropy_w_given_x(&f, &p, &s.quad)?;
            let prop4 = bound_prop4(&f, &p, 6, s.n_samples, s.seed)?.value;
            Ok(vec![
                a.into(),
                value.unwrap_or(f64::NAN).into(),
                sandwich.endpoint_a.into(),
                sandwich.endpoint_b.into(),
                sandwich.lower.into(),
                sandwich.upper.into(),
                sandwich.loss.value.into(),
                prop4.into(),
                prop5.into(),
                lump.max_deviation.into(),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        columns: [
            "a", "value", "endpoint_a", "endpoint_b", "lower", "upper", "prop3", "prop4", "prop5", "lump_deviation",
        ]
        .map(String::from)
        .to_vec(),
        rows,
        metadata: s.metadata("ar1-sweep", argv),
    })
}

/// `H(W2|X1)` of the cyclic walk in closed form.
pub fn cyclic_branch_entropy_closed_form(m: f64, a: f64) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    if m > 2.0 * a {
        a / (m * ln2)
    } else {
        (m - a) / (m * ln2) + (2.0 * a / m).log2()
    }
}

/// One row per ratio `a/M`.
pub fn cmd_cyclic_sweep(ratios: &[f64], m: f64, s: &Settings, argv: &[String]) -> Result<SweepTable> {
    if let Some(&r) = ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::BadParameter(format!("ratio a/M must lie in (0, 1], got {r}")));
    }
    let f = pbf::magnitude();
    let rows: Vec<Vec<Cell>> = ratios
        .par_iter()
        .map(|&r| -> Result<Vec<Cell>> {
            let a = r * m;
            let p = process::make_cyclic_walk(m, a)?;
            Ok(vec![
                r.into(),
                a.into(),
                r.into(),
                loss_rate_analytic(&f, &p, &s.quad)?.into(),
                cyclic_branch_entropy_closed_form(m, a).into(),
                cond_entropy_w_given_x(&f, &p, &s.quad)?.into(),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        columns: ["ratio", "a", "analytic", "quadrature", "prop5_closed_form", "prop5_quadrature"]
            .map(String::from)
            .to_vec(),
        rows,
        metadata: s.metadata("cyclic-sweep", argv),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TightnessReport {
    pub loss: f64,
    pub loss_rate: f64,
    pub h_w2_given_x1: f64,
    pub h_x: f64,
    pub h_rate_x: f64,
    pub residuals: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub lumpability: LumpabilityReport,
    pub passed: bool,
}

/// The chain `L = L̄ = H(W2|X1) = 1` with residuals.
pub fn cmd_tightness(s: &Settings) -> Result<TightnessReport> {
    let p = process::make_tightness_example();
    let f = pbf::shift_mod(2.0, 0.0, 2)?;
    let loss = loss_rv(&f, &p, &s.quad)?.value;
    let loss_rate = loss_rate_analytic(&f, &p, &s.quad)?;
    let h_w = cond_entropy_w_given_x(&f, &p, &s.quad)?;
    let h_x = p.analytic().map(|a| a.h_marginal).unwrap_or(f64::NAN);
    let h_rate_x = cond_diff_entropy_x2_given_x1(&p, &s.quad)?;
    let lumpability = analyze_lumpability(&f, &p, &s.lump, &s.quad)?;
    let tolerance = 1e-6;
    let residuals: BTreeMap<String, f64> = [
        ("loss", loss - 1.0),
        ("loss_rate", loss_rate - 1.0),
        ("h_w2_given_x1", h_w - 1.0),
        ("h_x", h_x - 2.0),
        ("h_rate_x", h_rate_x - 1.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.abs()))
    .collect();
    let holds = |c: &Option<crate::lumpability::ConditionCheck>| c.as_ref().is_some_and(|c| c.holds);
    let passed = residuals.values().all(|r| *r <= tolerance)
        && lumpability.condition_holds
        && holds(&lumpability.tightness_a)
        && holds(&lumpability.tightness_b);
    Ok(TightnessReport {
        loss,
        loss_rate,
        h_w2_given_x1: h_w,
        h_x,
        h_rate_x,
        residuals,
        tolerance,
        lumpability,
        passed,
    })
}

/// Finite-block and limiting relative loss of an `m`-fold downsampler.
pub fn cmd_downsample(m: u64, n_list: &[u64], s: &Settings, argv: &[String]) -> Result<SweepTable> {
    let limit = downsampler_relative_loss(m, None)?;
    let rows = n_list
        .iter()
        .map(|&n| -> Result<Vec<Cell>> {
            let d = DimensionProfile::downsampler(m, n)?;
            Ok(vec![
                Cell::Real(n as f64),
                Cell::Real(d.dim_in as f64),
                Cell::Real(d.dim_out as f64),
                d.rel_loss_n.into(),
                ratio_to_f64(d.rel_loss_n).into(),
                limit.into(),
                (ratio_to_f64(d.rel_loss_n) - ratio_to_f64(limit)).abs().into(),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable {
        columns: ["n", "dim_in", "dim_out", "rel_loss_n", "rel_loss_n_real", "limit", "abs_error"]
            .map(String::from)
            .to_vec(),
        rows,
        metadata: s.metadata("downsample", argv),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelativeLossReport {
    pub process: String,
    pub regime: Regime,
    /// Relative loss (rate), identical for one sample and for the process.
    pub value: f64,
    pub empirical_frequency: Option<f64>,
    pub standard_error: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

pub fn relative_loss_report(f: &PiecewiseFunction, p: &StationaryProcess, s: &Settings) -> Result<RelativeLossReport> {
    let regime = classify(f, p, &s.quad)?;
    let value = match regime {
        Regime::FiniteLoss => 0.0,
        Regime::ConstantPieces { mass } => mass,
    };
    let (empirical, se) = if s.n_samples >= MIN_FREQUENCY_SAMPLES {
        (
            Some(empirical_constant_frequency(f, p, s.n_samples, s.seed)?),
            Some(binomial_standard_error(value, s.n_samples)),
        )
    } else {
        (None, None)
    };
    Ok(RelativeLossReport {
        process: p.name().into(),
        regime,
        value,
        empirical_frequency: empirical,
        standard_error: se,
        n_samples: s.n_samples,
        seed: s.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DownsampleReport {
    #[serde(rename = "M")]
    pub m: u64,
    pub block: Option<u64>,
    pub value: String,
    pub value_real: f64,
}

/// Either a loss-rate report or a relative-loss report, chosen by regime.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum AnalysisReport {
    LossRate(Box<LossRateReport>),
    RelativeLoss(RelativeLossReport),
}

pub fn cmd_analyze(cfg: &Config, s: &Settings) -> Result<AnalysisReport> {
    let p = cfg.process.build()?;
    let f = cfg.function.build()?;
    let regime = classify(&f, &p, &s.quad)?;
    match (cfg.mode, regime) {
        (Mode::LossRate, Regime::ConstantPieces { mass }) => Err(Error::IncompatibleSpec(format!(
            "loss rate requested, but the function is constant on a set of probability {mass}; \
             the loss is infinite, use mode = \"relative_loss\""
        ))),
        (Mode::RelativeLoss, Regime::FiniteLoss) => Err(Error::IncompatibleSpec(
            "relative loss requested, but the function has no constant piece the process visits; \
             the relative loss is 0, use mode = \"loss_rate\""
                .into(),
        )),
        (_, Regime::FiniteLoss) => Ok(AnalysisReport::LossRate(Box::new(analyze_loss_rate(
            &f,
            &p,
            &s.analysis(),
        )?))),
        (_, Regime::ConstantPieces { .. }) => Ok(AnalysisReport::RelativeLoss(relative_loss_report(&f, &p, s)?)),
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli, argv: &[String]) -> Result<Output> {
    let g = &cli.global;
    match &cli.command {
        Command::Ar1Sweep { a_values, sigma } => {
            let s = Settings::resolve(g, None)?;
            Ok(Output::Table(cmd_ar1_sweep(a_values, *sigma, &s, argv)?))
        }
        Command::CyclicSweep { ratios, m } => {
            let s = Settings::resolve(g, None)?;
            Ok(Output::Table(cmd_cyclic_sweep(ratios, *m, &s, argv)?))
        }
        Command::Tightness => {
            let r = cmd_tightness(&Settings::resolve(g, None)?)?;
            Output::json(&r, r.passed)
        }
        Command::Downsample { m, n } => {
            let s = Settings::resolve(g, None)?;
            Ok(Output::Table(cmd_downsample(*m, n, &s, argv)?))
        }
        Command::RelLoss {
            downsample: Some(m),
            block,
            ..
        } => {
            let r = downsampler_relative_loss(*m, *block)?;
            let report = DownsampleReport {
                m: *m,
                block: *block,
                value: Cell::Rational(r).to_string(),
                value_real: ratio_to_f64(r),
            };
            Output::json(&report, true)
        }
        Command::RelLoss { config, .. } => {
            let path = config
                .as_ref()
                .ok_or_else(|| Error::BadParameter("rel-loss needs --downsample or --config".into()))?;
            let cfg = Config::load(path)?;
            let s = Settings::resolve(g, Some(&cfg.estimation))?;
            let r = relative_loss_report(&cfg.function.build()?, &cfg.process.build()?, &s)?;
            Output::json(&r, true)
        }
        Command::LumpCheck { config } => {
            let cfg = Config::load(config)?;
            let s = Settings::resolve(g, Some(&cfg.estimation))?;
            let f = cfg.function.build()?;
            let p = cfg.process.build()?;
            let r = if f.is_all_injective() {
                analyze_lumpability(&f, &p, &s.lump, &s.quad)?
            } else {
                check_lumpable(&f, &p, &s.lump)
            };
            let passed = r.condition_holds;
            Output::json(&r, passed)
        }
        Command::Analyze { config } => {
            let cfg = Config::load(config)?;
            let s = Settings::resolve(g, Some(&cfg.estimation))?;
            Output::json(&cmd_analyze(&cfg, &s)?, true)
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::IncompatibleSpec(_)
        | Error::BadParameter(_)
        | Error::RangeMismatch { .. }
        | Error::Tiling(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_CHECK_FAILED,
    }
}

/// Parses `args`, runs the command and writes the result to `--out` or
/// `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let result = execute(&cli, &argv).and_then(|out| {
        let to_json = cli
            .global
            .out
            .as_ref()
            .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
        let text = out.render(to_json || !matches!(out, Output::Table(_)))?;
        match &cli.global.out {
            Some(path) => {
                write_atomic(path, text.as_bytes())?;
                if let (Output::Table(t), false) = (&out, to_json) {
                    let mut meta = path.clone().into_os_string();
                    meta.push(".meta.json");
                    write_atomic(Path::new(&meta), serde_json::to_string_pretty(&t.metadata)?.as_bytes())?;
                }
            }
            None => {
                stdout.write_all(text.as_bytes())?;
                if !text.ends_with('\n') {
                    writeln!(stdout)?;
                }
            }
        }
        Ok(out.passed())
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main_with_args() -> i32 {
    run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("infoloss").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn parses_config_with_composition() {
        let cfg = Config::parse(
            r#"
            [process]
            kind = "iid_gaussian"
            params = { sigma = 2.0 }

            [function]
            kind = "compose"
            params = [{ kind = "scale", params = { k = 2.0 } }, { kind = "magnitude" }]

            [estimation]
            samples = 20000
            seed = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Auto);
        assert_eq!(cfg.function.stages().len(), 2);
        let f = cfg.function.build().unwrap();
        assert_eq!(f.eval(-1.5).unwrap(), 3.0);
        assert_eq!(cfg.estimation.seed, Some(3));
    }

    #[test]
    fn parses_every_process_kind() {
        for (kind, params) in [
            ("ar1", "{ a = 0.5 }"),
            ("cyclic_walk", "{ M = 1.0, a = 0.3 }"),
            ("iid_gaussian", "{}"),
            ("iid_uniform", "{ lo = 0.0, hi = 2.0 }"),
        ] {
            let text = format!("[process]\nkind = \"{kind}\"\nparams = {params}\n[function]\nkind = \"identity\"\n");
            Config::parse(&text).unwrap().process.build().unwrap();
        }
        let text = "[process]\nkind = \"tightness\"\n[function]\nkind = \"shift_mod\"\nparams = { period = 2.0, cells = 2 }\n";
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.process.build().unwrap().name(), "tightness");
    }

    #[test]
    fn malformed_config_names_the_field() {
        let e = Config::parse("[process]\nkind = \"ar1\"\nparams = { a = 0.5, pole = 1 }\n[function]\nkind = \"magnitude\"\n")
            .unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Parse(_)));
        assert!(msg.contains("pole") && msg.contains("line"), "{msg}");
        let e = Config::parse("[process]\nkind = \"ar2\"\n[function]\nkind = \"magnitude\"\n").unwrap_err();
        assert!(e.to_string().contains("ar2"));
    }

    #[test]
    fn cell_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            let s = Cell::Real(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(Cell::Rational(Ratio::new(10, 14)).to_string(), "5/7");
    }

    #[test]
    fn downsample_table() {
        let s = Settings::resolve(&Cli::parse_from(["x", "tightness"]).global, None).unwrap();
        let t = cmd_downsample(3, &[7, 1000], &s, &[]).unwrap();
        assert_eq!(t.rows[0][3], Cell::Rational(Ratio::new(5, 7)));
        assert_eq!(t.rows[0][5], Cell::Rational(Ratio::new(2, 3)));
    }

    #[test]
    fn cyclic_closed_form_regimes_meet() {
        for m in [0.5, 1.0, 3.0] {
            let a = m / 2.0;
            let lo = a / (m * std::f64::consts::LN_2);
            let hi = (m - a) / (m * std::f64::consts::LN_2) + (2.0 * a / m).log2();
            assert!((lo - hi).abs() < 1e-15);
            assert!((cyclic_branch_entropy_closed_form(m, a) - lo).abs() < 1e-15);
        }
        assert!((cyclic_branch_entropy_closed_form(1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exit_codes() {
        let (code, _, err) = run_capture(&["no-such-command"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
        let (code, out, _) = run_capture(&["rel-loss", "--downsample", "3", "--block", "7"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["value"], "5/7");
        let (code, _, _) = run_capture(&["rel-loss", "--downsample", "0"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["rel-loss"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["analyze", "--config", "/nonexistent/config.toml"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn samples_flag_accepts_scientific_notation() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }
}
