//! Information loss and information loss rate of piecewise bijective
//! functions, with every available upper and lower bound.
//!
//! Values are in bits. Sample-based estimates carry their `(n_samples, bins,
//! seed)` so they can be regenerated exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{
    cond_diff_entropy_x2_given_x1, cond_diff_entropy_y2_given_x1, cond_diff_entropy_y2_given_y1,
    cond_entropy_w_given_x, default_bins, diff_entropy_hist, expected_log_abs_derivative,
    loss_by_preimage_quadrature, markov_block_entropy_w, mutual_information_hist, require_injective,
    BlockEntropy, QuadratureConfig,
};
use crate::lumpability::{check_lumpable, LumpConfig, LumpabilityReport};
use crate::pbf::{snap_to, FunctionTag, PiecewiseFunction};
use crate::process::StationaryProcess;

/// Accuracy promised by [`loss_rate_analytic`].
pub const ANALYTIC_RATE_TOL: f64 = 1e-3;

/// Where a number came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    ClosedForm { rule: String },
    Quadrature { abs_tol: f64 },
    MonteCarlo { n_samples: usize, bins: usize, seed: u64 },
    BlockEntropy { order: usize, n_samples: usize, seed: u64 },
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::ClosedForm { rule } => write!(f, "closed form ({rule})"),
            Method::Quadrature { abs_tol } => write!(f, "quadrature (abs_tol {abs_tol:e})"),
            Method::MonteCarlo { n_samples, bins, seed } => {
                write!(f, "monte carlo (n={n_samples}, bins={bins}, seed={seed})")
            }
            Method::BlockEntropy { order, n_samples, seed } => {
                write!(f, "block entropy (k={order}, n={n_samples}, seed={seed})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
}

fn injective_or_infinite(f: &PiecewiseFunction, p: &StationaryProcess) -> Result<()> {
    require_injective(f, p).map_err(|e| match e {
        Error::ConstantBranch(_) => Error::InfiniteLoss,
        other => other,
    })
}

fn closed_form_loss(f: &PiecewiseFunction, p: &StationaryProcess) -> Option<Estimate> {
    let (slo, shi) = p.marginal().support();
    let (dlo, dhi) = f.domain();
    let covers = dlo <= slo && shi <= dhi;
    let rule = match f.tag() {
        FunctionTag::Magnitude if covers && p.marginal().is_symmetric() => ("magnitude of a symmetric density", 1.0),
        FunctionTag::Identity | FunctionTag::Scale(_) if f.branches().len() == 1 => ("bijective map", 0.0),
        _ => return None,
    };
    Some(Estimate {
        value: rule.1,
        method: Method::ClosedForm { rule: rule.0.into() },
    })
}

/// `L(X → Y) = H(X|Y)` for one sample of the marginal. Registered closed
/// forms take precedence; otherwise quadrature over the output.
pub fn loss_rv(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<Estimate> {
    injective_or_infinite(f, p)?;
    if let Some(e) = closed_form_loss(f, p) {
        return Ok(e);
    }
    Ok(Estimate {
        value: loss_by_preimage_quadrature(f, p, cfg)?,
        method: Method::Quadrature { abs_tol: cfg.abs_tol },
    })
}

/// `L(X → Y) = h(X) − h(Y) + E{log|g'(X)|}` with `h(Y)` (and `h(X)` when no
/// closed form is known) from histograms of a sampled path.
pub fn loss_rv_mc(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    n_samples: usize,
    seed: u64,
    bins: usize,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    injective_or_infinite(f, p)?;
    let path = p.sample_path(n_samples, seed);
    let ys: Vec<f64> = path.values.iter().map(|&x| f.eval(x)).collect::<Result<_>>()?;
    let hx = match p.analytic() {
        Some(a) => a.h_marginal,
        None => diff_entropy_hist(&path.values, bins)?,
    };
    let hy = diff_entropy_hist(&ys, bins)?;
    let dlog = expected_log_abs_derivative(f, p, cfg)?;
    Ok(Estimate {
        value: hx - hy + dlog,
        method: Method::MonteCarlo { n_samples, bins, seed },
    })
}

/// Lumpability check used to gate [`loss_rate_analytic`].
pub fn gate_config() -> LumpConfig {
    LumpConfig { grid: 101, tol: 1e-6 }
}

/// `L̄(X → Y) = h(X2|X1) − h(Y2|X1) + E{log|g'(X)|}`, valid when `Y` is Markov.
///
/// Refuses with [`Error::NotLumpable`] when the sufficient lumpability
/// condition fails on the grid.
pub fn loss_rate_analytic(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<f64> {
    injective_or_infinite(f, p)?;
    let report = check_lumpable(f, p, &gate_config());
    if !report.condition_holds {
        return Err(Error::NotLumpable {
            max_deviation: report.max_deviation,
        });
    }
    loss_rate_upper_quadrature(f, p, cfg)
}

/// `h(X2|X1) − h(Y2|X1) + E{log|g'(X)|}`, an upper bound on the loss rate
/// (equality when `Y` is Markov).
pub fn loss_rate_upper_quadrature(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<f64> {
    injective_or_infinite(f, p)?;
    let hx = cond_diff_entropy_x2_given_x1(p, cfg)?;
    let hy = cond_diff_entropy_y2_given_x1(f, p, cfg)?;
    let dlog = expected_log_abs_derivative(f, p, cfg)?;
    Ok(hx - hy + dlog)
}

/// `h(X2|X1) − h(Y2|Y1) + E{log|g'(X)|}`, a lower bound on the loss rate.
pub fn loss_rate_lower_quadrature(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<f64> {
    injective_or_infinite(f, p)?;
    let hx = cond_diff_entropy_x2_given_x1(p, cfg)?;
    let hy = cond_diff_entropy_y2_given_y1(f, p, cfg)?;
    let dlog = expected_log_abs_derivative(f, p, cfg)?;
    Ok(hx - hy + dlog)
}

/// Sandwich bracket on the loss rate from histogram mutual information.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichBounds {
    /// `L − Î(X1;X2) + Î(Y1;Y2)`
    pub endpoint_a: f64,
    /// `L − Î(X1;X2) + Î(X1;Y2)`
    pub endpoint_b: f64,
    pub lower: f64,
    pub upper: f64,
    pub loss: Estimate,
    pub mi_x1_x2: f64,
    pub mi_y1_y2: f64,
    pub mi_x1_y2: f64,
    pub n_samples: usize,
    pub bins: usize,
    pub seed: u64,
}

impl SandwichBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Estimates both sandwich endpoints from one sampled path. The endpoints
/// are returned ordered numerically as `(lower, upper)`.
pub fn loss_rate_bounds_mc(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    n_samples: usize,
    seed: u64,
    bins: usize,
    cfg: &QuadratureConfig,
) -> Result<SandwichBounds> {
    let loss = loss_rv(f, p, cfg)?;
    let path = p.sample_path(n_samples, seed);
    let xs = &path.values;
    let ys: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect::<Result<_>>()?;
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let (x1, x2) = (&xs[..n - 1], &xs[1..]);
    let (y1, y2) = (&ys[..n - 1], &ys[1..]);
    let mi_x1_x2 = mutual_information_hist(x1, x2, bins)?;
    let mi_y1_y2 = mutual_information_hist(y1, y2, bins)?;
    let mi_x1_y2 = mutual_information_hist(x1, y2, bins)?;
    let endpoint_a = loss.value - mi_x1_x2 + mi_y1_y2;
    let endpoint_b = loss.value - mi_x1_x2 + mi_x1_y2;
    Ok(SandwichBounds {
        endpoint_a,
        endpoint_b,
        lower: endpoint_a.min(endpoint_b),
        upper: endpoint_a.max(endpoint_b),
        loss,
        mi_x1_x2,
        mi_y1_y2,
        mi_x1_y2,
        n_samples,
        bins,
        seed,
    })
}

/// Upper bound `L̄ ≤ L(X → Y)`.
pub fn bound_prop3(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<Estimate> {
    loss_rv(f, p, cfg)
}

/// Upper bound `L̄ ≤ H̄(W)`, estimated from the branch-index process.
pub fn bound_prop4(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    max_order: usize,
    n_samples: usize,
    seed: u64,
) -> Result<BlockEntropy> {
    markov_block_entropy_w(f, p, max_order, n_samples, seed)
}

/// Upper bound `L̄ ≤ H(W2|X1)` for Markov inputs with finite loss.
pub fn bound_prop5(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<Estimate> {
    injective_or_infinite(f, p)?;
    Ok(Estimate {
        value: cond_entropy_w_given_x(f, p, cfg)?,
        method: Method::Quadrature { abs_tol: cfg.abs_tol },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeMethod {
    /// Per-sample loss `L`, via [`loss_rv`].
    RandomVariable,
    /// Loss rate `L̄`, via [`loss_rate_analytic`].
    Rate,
}

impl CascadeMethod {
    pub fn tolerance(self, cfg: &QuadratureConfig) -> f64 {
        match self {
            CascadeMethod::RandomVariable => (1e3 * cfg.abs_tol).max(1e-6),
            CascadeMethod::Rate => ANALYTIC_RATE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CascadeReport {
    pub total: f64,
    pub stages: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub additive: bool,
    pub method: CascadeMethod,
}

/// Loss of a cascade `g_n ∘ … ∘ g_1` together with the loss of each stage
/// acting on the output of the previous one.
pub fn cascade_loss_rate(
    stages: &[PiecewiseFunction],
    p: &StationaryProcess,
    method: CascadeMethod,
    cfg: &QuadratureConfig,
) -> Result<CascadeReport> {
    if stages.is_empty() {
        return Err(Error::BadParameter("cascade needs at least one stage".into()));
    }
    let measure = |f: &PiecewiseFunction, q: &StationaryProcess| -> Result<f64> {
        match method {
            CascadeMethod::RandomVariable => loss_rv(f, q, cfg).map(|e| e.value),
            CascadeMethod::Rate => loss_rate_analytic(f, q, cfg),
        }
    };

    let mut current = p.clone();
    let mut composed: Option<PiecewiseFunction> = None;
    let mut values = Vec::with_capacity(stages.len());
    for g in stages {
        let (lo, hi) = current.marginal().support();
        let (dlo, dhi) = g.domain();
        let lo = snap_to(lo, dlo);
        let hi = snap_to(hi, dhi);
        if lo < dlo || hi > dhi {
            return Err(Error::RangeMismatch {
                range_lo: lo,
                range_hi: hi,
                domain_lo: dlo,
                domain_hi: dhi,
            });
        }
        let upper = if hi.is_finite() { hi.next_up().min(dhi) } else { hi };
        let g = g.restrict(lo, upper)?;
        values.push(measure(&g, &current)?);
        composed = Some(match composed {
            None => g.clone(),
            Some(inner) => PiecewiseFunction::compose(&g, &inner)?,
        });
        current = current.pushforward(Arc::new(g))?;
    }
    let total = measure(composed.as_ref().expect("non-empty"), p)?;
    let residual = (total - values.iter().sum::<f64>()).abs();
    let tolerance = 2.0 * method.tolerance(cfg);
    Ok(CascadeReport {
        total,
        stages: values,
        residual,
        tolerance,
        additive: residual <= tolerance,
        method,
    })
}

/// Settings for a full [`analyze_loss_rate`] run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisSettings {
    pub n_samples: usize,
    /// `None` selects `⌈N^{1/3}⌉`.
    pub bins: Option<usize>,
    pub seed: u64,
    pub quad: QuadratureConfig,
    pub lump: LumpConfig,
    pub block_order: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            n_samples: 1_000_000,
            bins: None,
            seed: 42,
            quad: QuadratureConfig::default(),
            lump: LumpConfig::default(),
            block_order: 6,
        }
    }
}

impl AnalysisSettings {
    pub fn bins(&self) -> usize {
        self.bins.unwrap_or_else(|| default_bins(self.n_samples))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub n_samples: usize,
    pub bins: usize,
    pub seed: u64,
    pub quad_tol: f64,
}

/// All loss-rate numbers for one (function, process) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRateReport {
    pub process: String,
    /// Loss rate, present when the output was verified Markov on the grid.
    pub value: Option<f64>,
    pub lower_bound: f64,
    pub upper_bound_sandwich: f64,
    pub quadrature_lower: f64,
    pub quadrature_upper: f64,
    /// `L(X → Y)`
    pub bound_l: f64,
    /// `H̄(W)` estimate
    pub bound_hw: Option<f64>,
    /// `H(W2|X1)`
    pub bound_hw2x1: Option<f64>,
    pub methods: BTreeMap<String, String>,
    pub provenance: Provenance,
    pub lumpability: LumpabilityReport,
}

/// Runs every computation that applies to `(f, p)`.
pub fn analyze_loss_rate(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    settings: &AnalysisSettings,
) -> Result<LossRateReport> {
    let cfg = &settings.quad;
    let bins = settings.bins();
    let mut methods = BTreeMap::new();

    let lumpability = crate::lumpability::analyze_lumpability(f, p, &settings.lump, cfg)?;
    let loss = loss_rv(f, p, cfg)?;
    methods.insert("bound_l".into(), loss.method.to_string());

    let sandwich = loss_rate_bounds_mc(f, p, settings.n_samples, settings.seed, bins, cfg)?;
    let mc = Method::MonteCarlo {
        n_samples: settings.n_samples,
        bins,
        seed: settings.seed,
    };
    methods.insert("lower_bound".into(), mc.to_string());
    methods.insert("upper_bound_sandwich".into(), mc.to_string());

    let quadrature_upper = loss_rate_upper_quadrature(f, p, cfg)?;
    let quadrature_lower = loss_rate_lower_quadrature(f, p, cfg)?;
    let quad_method = Method::Quadrature { abs_tol: cfg.abs_tol }.to_string();
    methods.insert("quadrature_upper".into(), quad_method.clone());
    methods.insert("quadrature_lower".into(), quad_method.clone());

    let value = if lumpability.condition_holds {
        methods.insert("value".into(), quad_method.clone());
        Some(quadrature_upper)
    } else {
        None
    };

    let bound_hw = match bound_prop4(f, p, settings.block_order, settings.n_samples, settings.seed) {
        Ok(b) => {
            methods.insert(
                "bound_hw".into(),
                Method::BlockEntropy {
                    order: b.order,
                    n_samples: b.n_samples,
                    seed: b.seed,
                }
                .to_string(),
            );
            Some(b.value)
        }
        Err(Error::TooFewSamples { .. }) => None,
        Err(e) => return Err(e),
    };
    let bound_hw2x1 = Some(bound_prop5(f, p, cfg)?.value);
    methods.insert("bound_hw2x1".into(), quad_method);

    Ok(LossRateReport {
        process: p.name().to_string(),
        value,
        lower_bound: sandwich.lower,
        upper_bound_sandwich: sandwich.upper,
        quadrature_lower,
        quadrature_upper,
        bound_l: loss.value,
        bound_hw,
        bound_hw2x1,
        methods,
        provenance: Provenance {
            n_samples: settings.n_samples,
            bins,
            seed: settings.seed,
            quad_tol: cfg.abs_tol,
        },
        lumpability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbf::{identity, magnitude, quantizer, scale, shift_mod};
    use crate::process::{iid_gaussian, iid_uniform, make_ar1, make_cyclic_walk, make_tightness_example};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn loss_rv_examples() {
        let g = iid_gaussian(1.0).unwrap();
        let l = loss_rv(&magnitude(), &g, &cfg()).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(matches!(l.method, Method::ClosedForm { .. }));
        assert_eq!(loss_rv(&identity(), &g, &cfg()).unwrap().value, 0.0);

        let u = iid_uniform(0.0, 4.0).unwrap();
        let l = loss_rv(&shift_mod(2.0, 0.0, 2).unwrap(), &u, &cfg()).unwrap();
        assert!((l.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loss_rv_mc_agrees_with_closed_form() {
        let g = iid_gaussian(1.0).unwrap();
        let l = loss_rv_mc(&magnitude(), &g, 1_000_000, 3, 100, &cfg()).unwrap();
        assert!((l.value - 1.0).abs() < 0.03, "{l:?}");
        let u = iid_uniform(0.0, 4.0).unwrap();
        let l = loss_rv_mc(&shift_mod(2.0, 0.0, 2).unwrap(), &u, 1_000_000, 4, 100, &cfg()).unwrap();
        assert!((l.value - 1.0).abs() < 0.03, "{l:?}");
    }

    #[test]
    fn constant_pieces_give_infinite_loss() {
        let u = iid_uniform(0.0, 1.0).unwrap();
        let q = quantizer(&[0.0, 0.5, 1.0]).unwrap();
        assert!(matches!(loss_rv(&q, &u, &cfg()), Err(Error::InfiniteLoss)));
        assert!(matches!(bound_prop5(&q, &u, &cfg()), Err(Error::InfiniteLoss)));
    }

    #[test]
    fn analytic_rate_examples() {
        let c = make_cyclic_walk(1.0, 0.3).unwrap();
        let l = loss_rate_analytic(&magnitude(), &c, &cfg()).unwrap();
        assert!((l - 0.3).abs() < ANALYTIC_RATE_TOL, "{l}");

        let t = make_tightness_example();
        let l = loss_rate_analytic(&shift_mod(2.0, 0.0, 2).unwrap(), &t, &cfg()).unwrap();
        assert!((l - 1.0).abs() < 1e-6);

        let g = iid_gaussian(1.0).unwrap();
        let l = loss_rate_analytic(&magnitude(), &g, &cfg()).unwrap();
        assert!((l - 1.0).abs() < 1e-6);
    }

    #[test]
    fn analytic_rate_refuses_non_lumpable() {
        use crate::process::{make_markov, Gaussian, GaussianShiftKernel};
        let p = make_markov(
            "shifted",
            Arc::new(Gaussian::new(1.0, (1.0f64 / 0.75).sqrt()).unwrap()),
            Arc::new(GaussianShiftKernel { a: 0.5, sigma: 1.0, offset: 0.5 }),
        )
        .unwrap();
        assert!(matches!(
            loss_rate_analytic(&magnitude(), &p, &cfg()),
            Err(Error::NotLumpable { .. })
        ));
    }

    #[test]
    fn bound_chain_for_cyclic_walk() {
        let c = make_cyclic_walk(1.0, 0.5).unwrap();
        let f = magnitude();
        let rate = loss_rate_analytic(&f, &c, &cfg()).unwrap();
        let p5 = bound_prop5(&f, &c, &cfg()).unwrap().value;
        let p3 = bound_prop3(&f, &c, &cfg()).unwrap().value;
        assert!((p3 - 1.0).abs() < 1e-12);
        assert!(rate <= p5 + 1e-6 && p5 <= p3 + 1e-6);
        let p4 = bound_prop4(&f, &c, 6, 1_000_000, 9).unwrap().value;
        assert!(p5 <= p4 + 0.02, "p5 {p5} p4 {p4}");
    }

    #[test]
    fn ar1_branch_bound_is_below_one_bit() {
        let p = make_ar1(0.9, 1.0).unwrap();
        let v = bound_prop5(&magnitude(), &p, &cfg()).unwrap().value;
        assert!(v < 1.0 - 1e-3, "{v}");
    }

    #[test]
    fn sandwich_for_iid_is_the_loss() {
        let g = iid_gaussian(1.0).unwrap();
        let s = loss_rate_bounds_mc(&magnitude(), &g, 1_000_000, 5, 100, &cfg()).unwrap();
        assert!((s.lower - 1.0).abs() <= 0.03 && (s.upper - 1.0).abs() <= 0.03, "{s:?}");
    }

    #[test]
    fn quadrature_sandwich_brackets_the_rate() {
        let p = make_ar1(0.6, 1.0).unwrap();
        let f = magnitude();
        let lo = loss_rate_lower_quadrature(&f, &p, &cfg()).unwrap();
        let hi = loss_rate_upper_quadrature(&f, &p, &cfg()).unwrap();
        // lumpable: both coincide
        assert!((hi - lo).abs() < 1e-6, "{lo} {hi}");
        assert!(hi < 1.0);
    }

    #[test]
    fn cascade_examples() {
        let g = iid_gaussian(1.0).unwrap();
        let r = cascade_loss_rate(&[magnitude(), identity()], &g, CascadeMethod::Rate, &cfg()).unwrap();
        assert!((r.total - 1.0).abs() < 1e-6);
        assert!((r.stages[0] - 1.0).abs() < 1e-6 && r.stages[1].abs() < 1e-6);
        assert!(r.additive);

        let r = cascade_loss_rate(&[scale(2.0).unwrap(), magnitude()], &g, CascadeMethod::Rate, &cfg()).unwrap();
        assert!((r.total - 1.0).abs() < 1e-6);
        assert!(r.stages[0].abs() < 1e-6 && (r.stages[1] - 1.0).abs() < 1e-6, "{r:?}");

        let r = cascade_loss_rate(&[magnitude(), magnitude()], &g, CascadeMethod::Rate, &cfg()).unwrap();
        assert!((r.total - 1.0).abs() < 1e-6);
        assert!((r.stages[0] - 1.0).abs() < 1e-6 && r.stages[1].abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn cascade_rejects_range_mismatch() {
        let g = iid_gaussian(1.0).unwrap();
        assert!(matches!(
            cascade_loss_rate(&[magnitude(), shift_mod(1.0, 0.0, 2).unwrap()], &g, CascadeMethod::Rate, &cfg()),
            Err(Error::RangeMismatch { .. })
        ));
    }

    #[test]
    fn bijective_function_loses_nothing() {
        let p = make_ar1(0.5, 1.0).unwrap();
        let f = scale(-3.0).unwrap();
        assert_eq!(loss_rv(&f, &p, &cfg()).unwrap().value, 0.0);
        assert!(loss_rate_analytic(&f, &p, &cfg()).unwrap().abs() < 1e-9);
        assert!(bound_prop5(&f, &p, &cfg()).unwrap().value.abs() < 1e-9);
    }
}
