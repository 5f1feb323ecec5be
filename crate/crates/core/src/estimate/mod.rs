//! Numerical primitives shared by the loss-rate computations: quadrature,
//! histogram estimators, and the conditional-entropy integrals.
//!
//! Every entropy here is in bits.

pub mod histogram;
pub mod quadrature;

use std::collections::BTreeMap;

use serde::Serialize;

pub use histogram::{default_bins, diff_entropy_hist, mutual_information_hist, Histogram1D, Histogram2D};
pub use quadrature::{quad, quad_try, QuadratureConfig};

use crate::error::{Error, Result};
use crate::pbf::{PiecewiseFunction, Preimage};
use crate::process::{StationaryProcess, TransitionKernel};

/// `p log2 p`, with `0 log 0 = 0`.
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 { p * p.log2() } else { 0.0 }
}

pub(crate) fn require_injective(f: &PiecewiseFunction, p: &StationaryProcess) -> Result<()> {
    let (lo, hi) = p.marginal().integration_range();
    for b in f.branches().iter().filter(|b| b.is_constant()) {
        let (a, c) = b.domain();
        if a.max(lo) < c.min(hi) {
            return Err(Error::ConstantBranch(a.max(lo)));
        }
    }
    Ok(())
}

/// `Pr(W2 = w | X1 = x)` for every branch `w` (index `w - 1`).
pub fn branch_probabilities(
    f: &PiecewiseFunction,
    kernel: &dyn TransitionKernel,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let (lo, hi) = kernel.integration_range(x);
    let inner = cfg.bare().with_splits(kernel.breakpoints(x));
    f.branches()
        .iter()
        .map(|b| {
            let (a, c) = b.domain();
            let (a, c) = (a.max(lo), c.min(hi));
            if a >= c {
                return Ok(0.0);
            }
            quad(|x2| kernel.pdf(x2, x), a, c, &inner)
        })
        .collect()
}

/// `H(W2 | X1) = ∫ f_X(x) H(W2 | X1 = x) dx`.
pub fn cond_entropy_w_given_x(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let marginal = p.marginal();
    let kernel = p.kernel().as_ref();
    let (lo, hi) = marginal.integration_range();
    let mut splits = marginal.breakpoints();
    for b in f.branches() {
        let (a, _) = b.domain();
        splits.push(a);
        splits.extend(kernel.breakpoints(a));
    }
    splits.extend(cfg.splits.iter().copied());
    let outer = cfg.bare().with_splits(splits);
    quad_try(
        |x| {
            let density = marginal.pdf(x);
            if density == 0.0 {
                return Ok(0.0);
            }
            let probs = branch_probabilities(f, kernel, x, cfg)?;
            Ok(-density * probs.into_iter().map(plogp).sum::<f64>())
        },
        lo,
        hi,
        &outer,
    )
}

/// `E{log2 |g'(X)|}` by quadrature over each branch.
pub fn expected_log_abs_derivative(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_injective(f, p)?;
    let marginal = p.marginal();
    let (lo, hi) = marginal.integration_range();
    let inner = cfg.bare().with_splits(marginal.breakpoints());
    let mut total = 0.0;
    for b in f.branches() {
        let (a, c) = b.domain();
        let (a, c) = (a.max(lo), c.min(hi));
        if a >= c {
            continue;
        }
        total += quad(
            |x| {
                let d = marginal.pdf(x);
                if d == 0.0 { 0.0 } else { d * b.derivative(x).abs().log2() }
            },
            a,
            c,
            &inner,
        )?;
    }
    Ok(total)
}

/// Monte Carlo estimate of `E{log2 |g'(X)|}` from a sampled path.
pub fn expected_log_abs_derivative_mc(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let path = p.sample_path(n_samples, seed);
    let mut acc = 0.0;
    for &x in &path.values {
        acc += f.log_abs_derivative(x)?;
    }
    Ok(acc / n_samples as f64)
}

/// Plug-in conditional block entropies of the branch-index process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockEntropy {
    /// `Ĥ(W_{k+1} | W_1^k)` for `k = 0, 1, …`.
    pub by_order: Vec<f64>,
    /// Order whose estimate is reported.
    pub order: usize,
    pub value: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Largest block order supported by [`markov_block_entropy_w`].
pub const MAX_BLOCK_ORDER: usize = 6;

/// Estimates `H̄(W)` through `Ĥ(W_{k+1} | W_1^k)`, `k ≤ max_order`, keeping
/// only orders with at least 30 samples per possible block.
pub fn markov_block_entropy_w(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    max_order: usize,
    n_samples: usize,
    seed: u64,
) -> Result<BlockEntropy> {
    let alphabet = f.branches().len() as u64;
    let max_order = max_order.min(MAX_BLOCK_ORDER);
    let affordable = |k: usize| alphabet.saturating_pow(k as u32 + 1).saturating_mul(30) <= n_samples as u64;
    if !affordable(1) {
        return Err(Error::TooFewSamples {
            needed: (alphabet * alphabet * 30) as usize,
            got: n_samples,
        });
    }
    let path = p.sample_path(n_samples, seed);
    let symbols: Vec<u64> = path
        .values
        .iter()
        .map(|&x| f.branch_index(x).map(|i| i as u64 - 1))
        .collect::<Result<_>>()?;

    let block_entropy = |len: usize| -> f64 {
        if len == 0 {
            return 0.0;
        }
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for w in symbols.windows(len) {
            let code = w.iter().fold(0u64, |acc, &s| acc * alphabet + s);
            *counts.entry(code).or_default() += 1;
        }
        let n = (symbols.len() + 1 - len) as f64;
        -counts.values().map(|&c| plogp(c as f64 / n)).sum::<f64>()
    };

    let mut by_order = Vec::new();
    let mut prev_joint = 0.0;
    for k in 0..=max_order {
        if k > 0 && !affordable(k) {
            break;
        }
        let joint = block_entropy(k + 1);
        by_order.push(joint - prev_joint);
        prev_joint = joint;
    }
    let order = (1..by_order.len())
        .rev()
        .find(|&k| (by_order[k] - by_order[k - 1]).abs() < 0.01)
        .unwrap_or(by_order.len() - 1);
    Ok(BlockEntropy {
        value: by_order[order],
        by_order,
        order,
        n_samples,
        seed,
    })
}

/// `h(X2 | X1)` by nested quadrature.
pub fn cond_diff_entropy_x2_given_x1(p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<f64> {
    let marginal = p.marginal();
    let kernel = p.kernel();
    let (lo, hi) = marginal.integration_range();
    let outer = cfg.bare().with_splits(marginal.breakpoints());
    quad_try(
        |x1| {
            let d = marginal.pdf(x1);
            if d == 0.0 {
                return Ok(0.0);
            }
            let (a, b) = kernel.integration_range(x1);
            let inner = cfg.bare().with_splits(kernel.breakpoints(x1));
            let h = quad(|x2| -plogp(kernel.pdf(x2, x1)), a, b, &inner)?;
            Ok(d * h)
        },
        lo,
        hi,
        &outer,
    )
}

/// Density of `Y2 = g(X2)` given `X1 = x1`, evaluated at `y`.
fn output_density_given_input(
    f: &PiecewiseFunction,
    kernel: &dyn TransitionKernel,
    x1: f64,
    y: f64,
    buf: &mut Vec<Preimage>,
) -> f64 {
    f.preimage_into(y, buf);
    buf.iter()
        .filter_map(Preimage::point)
        .map(|x2| {
            let k = kernel.pdf(x2, x1);
            if k == 0.0 {
                0.0
            } else {
                k / f.abs_derivative(x2).unwrap_or(f64::INFINITY)
            }
        })
        .sum()
}

/// Output range and jump points of `Y2` given `X1 = x1`.
fn output_window(f: &PiecewiseFunction, kernel: &dyn TransitionKernel, x1: f64) -> Option<(f64, f64, Vec<f64>)> {
    let (a, b) = kernel.integration_range(x1);
    let (ylo, yhi) = f.range_on(a, b)?;
    let splits = f.image_breakpoints(&kernel.breakpoints(x1), a, b);
    Some((ylo, yhi, splits))
}

/// `h(Y2 | X1)` for `Y = g(X)` by nested quadrature.
pub fn cond_diff_entropy_y2_given_x1(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_injective(f, p)?;
    let marginal = p.marginal();
    let kernel = p.kernel().as_ref();
    let (lo, hi) = marginal.integration_range();
    let mut splits = marginal.breakpoints();
    for b in f.branches() {
        splits.extend(kernel.breakpoints(b.domain().0));
    }
    let outer = cfg.bare().with_splits(splits);
    let mut buf = Vec::new();
    quad_try(
        |x1| {
            let d = marginal.pdf(x1);
            if d == 0.0 {
                return Ok(0.0);
            }
            let Some((ylo, yhi, ys)) = output_window(f, kernel, x1) else {
                return Ok(0.0);
            };
            let inner = cfg.bare().with_splits(ys);
            let h = quad(
                |y| -plogp(output_density_given_input(f, kernel, x1, y, &mut buf)),
                ylo,
                yhi,
                &inner,
            )?;
            Ok(d * h)
        },
        lo,
        hi,
        &outer,
    )
}

/// `h(Y2 | Y1)` for `Y = g(X)` by nested quadrature, using
/// `f(y2|y1) = Σ_{x1 ∈ g⁻¹[y1]} f(y2|x1) f_X(x1) / (|g'(x1)| f_Y(y1))`.
pub fn cond_diff_entropy_y2_given_y1(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_injective(f, p)?;
    let marginal = p.marginal();
    let kernel = p.kernel().as_ref();
    let (lo, hi) = marginal.integration_range();
    let Some((ylo, yhi)) = f.range_on(lo, hi) else {
        return Ok(0.0);
    };
    let mut xs = marginal.breakpoints();
    for b in f.branches() {
        xs.extend(kernel.breakpoints(b.domain().0));
    }
    let outer = cfg.bare().with_splits(f.image_breakpoints(&xs, lo, hi));
    let mut pre = Vec::new();
    let mut buf = Vec::new();
    quad_try(
        |y1| {
            f.preimage_into(y1, &mut pre);
            let sources: Vec<(f64, f64)> = pre
                .iter()
                .filter_map(Preimage::point)
                .filter_map(|x| {
                    let w = marginal.pdf(x) / f.abs_derivative(x).ok()?;
                    (w > 0.0).then_some((x, w))
                })
                .collect();
            let fy: f64 = sources.iter().map(|s| s.1).sum();
            if fy == 0.0 {
                return Ok(0.0);
            }
            let mut y_lo = f64::INFINITY;
            let mut y_hi = f64::NEG_INFINITY;
            let mut splits = Vec::new();
            for &(x1, _) in &sources {
                if let Some((a, b, s)) = output_window(f, kernel, x1) {
                    y_lo = y_lo.min(a);
                    y_hi = y_hi.max(b);
                    splits.extend(s);
                }
            }
            if y_lo >= y_hi {
                return Ok(0.0);
            }
            let inner = cfg.bare().with_splits(splits);
            let h = quad(
                |y2| {
                    let q: f64 = sources
                        .iter()
                        .map(|&(x1, w)| w / fy * output_density_given_input(f, kernel, x1, y2, &mut buf))
                        .sum();
                    -plogp(q)
                },
                y_lo,
                y_hi,
                &inner,
            )?;
            Ok(fy * h)
        },
        ylo,
        yhi,
        &outer,
    )
}

/// `H(X | Y) = H(W | Y)` for a single sample, by quadrature over the output:
/// `∫ Σ_w −q_w log2(q_w / f_Y(y)) dy` with `q_w = f_X(x_w) / |g'(x_w)|`.
pub fn loss_by_preimage_quadrature(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    require_injective(f, p)?;
    let marginal = p.marginal();
    let (lo, hi) = marginal.integration_range();
    let Some((ylo, yhi)) = f.range_on(lo, hi) else {
        return Ok(0.0);
    };
    let splits = f.image_breakpoints(&marginal.breakpoints(), lo, hi);
    let c = cfg.bare().with_splits(splits);
    let mut pre = Vec::new();
    quad(
        |y| {
            f.preimage_into(y, &mut pre);
            let qs: Vec<f64> = pre
                .iter()
                .filter_map(Preimage::point)
                .map(|x| {
                    let d = marginal.pdf(x);
                    if d == 0.0 { 0.0 } else { d / f.abs_derivative(x).unwrap_or(f64::INFINITY) }
                })
                .collect();
            let fy: f64 = qs.iter().sum();
            if fy == 0.0 {
                return 0.0;
            }
            qs.iter().map(|&q| if q > 0.0 { -q * (q / fy).log2() } else { 0.0 }).sum()
        },
        ylo,
        yhi,
        &c,
    )
}
