//! Grid checks of the sufficient conditions under which `Y = g(X)` is Markov,
//! and of the extra conditions that make `H(W2|X1)` a tight bound.
//!
//! A check that "holds" holds on the evaluated grid only.

use serde::Serialize;

use crate::estimate::{branch_probabilities, QuadratureConfig};
use crate::pbf::{PiecewiseFunction, Preimage};
use crate::process::StationaryProcess;

/// Minimum grid points per axis.
pub const MIN_GRID: usize = 101;
/// Grid points closer than this to a jump are skipped.
pub const BOUNDARY_GAP: f64 = 1e-9;
const MAX_WITNESSES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LumpConfig {
    pub grid: usize,
    pub tol: f64,
}

impl Default for LumpConfig {
    fn default() -> Self {
        LumpConfig { grid: 201, tol: 1e-6 }
    }
}

/// A grid point where the weighted preimage sums disagree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub y1: f64,
    pub y2: f64,
    pub x: f64,
    pub x_prime: f64,
    pub deviation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LumpabilityReport {
    pub condition_holds: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub grid: String,
    pub tightness_a: Option<ConditionCheck>,
    pub tightness_b: Option<ConditionCheck>,
    pub witnesses: Vec<Witness>,
}

/// `|s − s'| / max(s, s', 1e-300)`.
pub fn relative_deviation(s: f64, t: f64) -> f64 {
    (s - t).abs() / s.max(t).max(1e-300)
}

fn midpoint_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (k as f64 + 0.5) * (hi - lo) / n as f64)
}

fn near_any(v: f64, points: &[f64]) -> bool {
    points.iter().any(|&p| (v - p).abs() < BOUNDARY_GAP * p.abs().max(1.0))
}

fn weighted_sum(f: &PiecewiseFunction, p: &StationaryProcess, y2: f64, x: f64, buf: &mut Vec<Preimage>) -> f64 {
    f.preimage_into(y2, buf);
    buf.iter()
        .filter_map(Preimage::point)
        .map(|x2| {
            let k = p.cond_pdf(x2, x);
            if k == 0.0 { 0.0 } else { k / f.abs_derivative(x2).unwrap_or(f64::INFINITY) }
        })
        .sum()
}

/// Checks that `Σ_{x2 ∈ g⁻¹[y2]} f(x2|x) / |g'(x2)|` does not depend on the
/// choice of `x ∈ g⁻¹[y1]` (with `f_X(x) > 0`), over a `grid × grid` set of
/// output pairs.
pub fn check_lumpable(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &LumpConfig) -> LumpabilityReport {
    let grid = cfg.grid.max(MIN_GRID);
    let marginal = p.marginal();
    let kernel = p.kernel();
    let (lo, hi) = marginal.integration_range();
    let mut report = LumpabilityReport {
        condition_holds: true,
        max_deviation: 0.0,
        tolerance: cfg.tol,
        grid: format!("{grid}x{grid} cell midpoints over the output range"),
        tightness_a: None,
        tightness_b: None,
        witnesses: Vec::new(),
    };
    if !f.is_all_injective() {
        report.condition_holds = false;
        report.max_deviation = f64::INFINITY;
        return report;
    }
    let Some((ylo, yhi)) = f.range_on(lo, hi) else {
        return report;
    };
    let y_jumps = f.image_breakpoints(&marginal.breakpoints(), lo, hi);
    let mut pre = Vec::new();
    let mut buf = Vec::new();

    for y1 in midpoint_grid(ylo, yhi, grid) {
        if near_any(y1, &y_jumps) {
            continue;
        }
        f.preimage_into(y1, &mut pre);
        let sources: Vec<f64> = pre
            .iter()
            .filter_map(Preimage::point)
            .filter(|&x| marginal.pdf(x) > 0.0)
            .collect();
        if sources.len() < 2 {
            continue;
        }
        let mut kernel_jumps = y_jumps.clone();
        for &x in &sources {
            let (a, b) = kernel.integration_range(x);
            kernel_jumps.extend(f.image_breakpoints(&kernel.breakpoints(x), a, b));
        }
        for y2 in midpoint_grid(ylo, yhi, grid) {
            if near_any(y2, &kernel_jumps) {
                continue;
            }
            let sums: Vec<f64> = sources.iter().map(|&x| weighted_sum(f, p, y2, x, &mut buf)).collect();
            for i in 0..sums.len() {
                for j in i + 1..sums.len() {
                    let dev = relative_deviation(sums[i], sums[j]);
                    if dev > report.max_deviation {
                        report.max_deviation = dev;
                    }
                    if dev > cfg.tol && report.witnesses.len() < MAX_WITNESSES {
                        report.witnesses.push(Witness {
                            y1,
                            y2,
                            x: sources[i],
                            x_prime: sources[j],
                            deviation: dev,
                        });
                    }
                }
            }
        }
    }
    report.condition_holds = report.max_deviation <= cfg.tol;
    report
}

/// Checks the two tightness conditions on a grid of inputs `x` and outputs `y`:
/// (a) the per-branch terms `f(g_w⁻¹(y)|x) / |g'(g_w⁻¹(y))|` agree across
/// branches with positive probability, and (b) those branch probabilities
/// `Pr(W2 = w | X1 = x)` are all equal.
pub fn check_tightness(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &LumpConfig,
    quad_cfg: &QuadratureConfig,
) -> crate::Result<(ConditionCheck, ConditionCheck)> {
    let grid = cfg.grid.max(MIN_GRID);
    let marginal = p.marginal();
    let kernel = p.kernel();
    let (lo, hi) = marginal.integration_range();
    let Some((ylo, yhi)) = f.range_on(lo, hi) else {
        let ok = ConditionCheck { holds: true, max_deviation: 0.0 };
        return Ok((ok, ok));
    };
    let mut x_jumps = marginal.breakpoints();
    x_jumps.extend(f.branches().iter().map(|b| b.domain().0));
    let mut dev_a = 0.0_f64;
    let mut dev_b = 0.0_f64;
    let mut pre = Vec::new();

    for x in midpoint_grid(lo, hi, grid) {
        if marginal.pdf(x) <= 0.0 || near_any(x, &x_jumps) {
            continue;
        }
        let probs = branch_probabilities(f, kernel.as_ref(), x, quad_cfg)?;
        let live: Vec<usize> = (0..probs.len()).filter(|&w| probs[w] > 1e-12).collect();
        for (i, &w) in live.iter().enumerate() {
            for &v in &live[i + 1..] {
                dev_b = dev_b.max((probs[w] - probs[v]).abs());
            }
        }
        if live.len() < 2 {
            continue;
        }
        let (a, b) = kernel.integration_range(x);
        let y_jumps = f.image_breakpoints(&kernel.breakpoints(x), a, b);
        for y in midpoint_grid(ylo, yhi, grid) {
            if near_any(y, &y_jumps) {
                continue;
            }
            f.preimage_into(y, &mut pre);
            let terms: Vec<f64> = pre
                .iter()
                .filter(|q| live.contains(&(q.branch() - 1)))
                .filter_map(Preimage::point)
                .map(|x2| p.cond_pdf(x2, x) / f.abs_derivative(x2).unwrap_or(f64::INFINITY))
                .collect();
            for i in 0..terms.len() {
                for j in i + 1..terms.len() {
                    dev_a = dev_a.max(relative_deviation(terms[i], terms[j]));
                }
            }
        }
    }
    Ok((
        ConditionCheck {
            holds: dev_a <= cfg.tol,
            max_deviation: dev_a,
        },
        ConditionCheck {
            holds: dev_b <= cfg.tol,
            max_deviation: dev_b,
        },
    ))
}

/// Lumpability report with the tightness conditions filled in.
pub fn analyze_lumpability(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &LumpConfig,
    quad_cfg: &QuadratureConfig,
) -> crate::Result<LumpabilityReport> {
    let mut report = check_lumpable(f, p, cfg);
    if f.is_all_injective() {
        let (a, b) = check_tightness(f, p, cfg, quad_cfg)?;
        report.tightness_a = Some(a);
        report.tightness_b = Some(b);
    }
    Ok(report)
}
