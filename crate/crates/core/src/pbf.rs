//! Piecewise bijective functions.
//!
//! A [`PiecewiseFunction`] is an ordered list of [`Branch`]es that tile a real
//! interval with half-open pieces `[lo, hi)`. Each branch is either injective
//! (with closed-form inverse and derivative supplied as closures) or constant.
//! All logarithms are base 2.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::quadrature::{quad, QuadratureConfig};
use crate::process::Density;

/// Shared real-to-real map.
pub type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of grid points per branch used by [`validate_branches`].
pub const VALIDATION_GRID: usize = 10_000;

/// How a branch maps its piece of the domain.
#[derive(Clone)]
pub enum BranchMap {
    Injective {
        forward: RealMap,
        inverse: RealMap,
        derivative: RealMap,
    },
    Constant(f64),
}

impl fmt::Debug for BranchMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchMap::Injective { .. } => f.write_str("Injective"),
            BranchMap::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

/// One piece `[lo, hi)` of a piecewise function.
#[derive(Clone, Debug)]
pub struct Branch {
    index: usize,
    lo: f64,
    hi: f64,
    map: BranchMap,
}

impl Branch {
    pub fn injective(
        lo: f64,
        hi: f64,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Branch {
            index: 0,
            lo,
            hi,
            map: BranchMap::Injective {
                forward: Arc::new(forward),
                inverse: Arc::new(inverse),
                derivative: Arc::new(derivative),
            },
        }
    }

    /// `x -> slope * x + intercept` on `[lo, hi)`; `slope` must be non-zero.
    pub fn affine(lo: f64, hi: f64, slope: f64, intercept: f64) -> Self {
        Branch::injective(
            lo,
            hi,
            move |x| slope * x + intercept,
            move |y| (y - intercept) / slope,
            move |_| slope,
        )
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Branch {
            index: 0,
            lo,
            hi,
            map: BranchMap::Constant(value),
        }
    }

    /// One-based position in the owning function.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn map(&self) -> &BranchMap {
        &self.map
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.map, BranchMap::Constant(_))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn forward(&self, x: f64) -> f64 {
        match &self.map {
            BranchMap::Injective { forward, .. } => forward(x),
            BranchMap::Constant(c) => *c,
        }
    }

    pub fn inverse(&self, y: f64) -> Option<f64> {
        match &self.map {
            BranchMap::Injective { inverse, .. } => Some(inverse(y)),
            BranchMap::Constant(_) => None,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.map {
            BranchMap::Injective { derivative, .. } => derivative(x),
            BranchMap::Constant(_) => 0.0,
        }
    }

    /// Closed hull of the image of the branch.
    pub fn image(&self) -> (f64, f64) {
        match &self.map {
            BranchMap::Constant(c) => (*c, *c),
            BranchMap::Injective { forward, .. } => {
                let a = forward(self.lo);
                let b = forward(self.hi);
                (a.min(b), a.max(b))
            }
        }
    }

    /// Image of `[lo, hi) ∩ [a, b)`, or `None` if the intersection is empty.
    pub fn image_on(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let lo = self.lo.max(a);
        let hi = self.hi.min(b);
        if lo >= hi {
            return None;
        }
        let (u, v) = (self.forward(lo), self.forward(hi));
        Some((u.min(v), u.max(v)))
    }

    fn with_domain(&self, lo: f64, hi: f64) -> Branch {
        Branch {
            index: 0,
            lo,
            hi,
            map: self.map.clone(),
        }
    }
}

/// What a function was built as; used to select registered closed forms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FunctionTag {
    Identity,
    Magnitude,
    Scale(f64),
    Square,
    ShiftMod { period: f64, offset: f64, cells: usize },
    Quantizer,
    Composite,
    Custom,
}

/// One element of a preimage set `g^{-1}[y]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preimage {
    Point { branch: usize, x: f64 },
    /// A constant branch whose value equals `y`; the whole piece maps to `y`.
    Interval { branch: usize, lo: f64, hi: f64 },
}

impl Preimage {
    pub fn branch(&self) -> usize {
        match *self {
            Preimage::Point { branch, .. } | Preimage::Interval { branch, .. } => branch,
        }
    }

    pub fn point(&self) -> Option<f64> {
        match *self {
            Preimage::Point { x, .. } => Some(x),
            Preimage::Interval { .. } => None,
        }
    }
}

/// Outcome of grid-based structural checks on a set of branches.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    /// Branches with `lo >= hi` (1-based positions).
    pub empty: Vec<usize>,
    pub gaps: Vec<(f64, f64)>,
    /// Pairs of overlapping branches (1-based positions after sorting).
    pub overlaps: Vec<(usize, usize)>,
    pub non_monotone: Vec<usize>,
    /// Branch and grid location where the inverse failed to undo the forward map.
    pub inverse_errors: Vec<(usize, f64)>,
    /// Branch and approximate location of (near-)zero derivative. Warning only.
    pub zero_derivative: Vec<(usize, f64)>,
}

impl ValidationReport {
    pub fn tiling_ok(&self) -> bool {
        self.empty.is_empty() && self.gaps.is_empty() && self.overlaps.is_empty()
    }

    /// True when there are no errors; zero-derivative warnings are allowed.
    pub fn is_valid(&self) -> bool {
        self.tiling_ok() && self.non_monotone.is_empty() && self.inverse_errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "empty={:?} gaps={:?} overlaps={:?} non_monotone={:?} inverse_errors={} zero_derivative={}",
            self.empty,
            self.gaps,
            self.overlaps,
            self.non_monotone,
            self.inverse_errors.len(),
            self.zero_derivative.len()
        )
    }
}

/// Finite stand-in for a possibly infinite interval, used for grid sampling.
fn finite_window(lo: f64, hi: f64) -> (f64, f64) {
    const SPAN: f64 = 1e3;
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + SPAN),
        (false, true) => (hi - SPAN, hi),
        (false, false) => (-SPAN, SPAN),
    }
}

/// A point strictly inside `[lo, hi)` that is safe to evaluate.
/// Moves `x` onto `edge` when the two differ only by rounding.
pub(crate) fn snap_to(x: f64, edge: f64) -> f64 {
    if x.is_finite() && edge.is_finite() && (x - edge).abs() <= 1e-12 * x.abs().max(1.0) {
        edge
    } else {
        x
    }
}

pub(crate) fn interior_point(lo: f64, hi: f64) -> f64 {
    let (a, b) = finite_window(lo, hi);
    0.5 * (a + b)
}

/// Checks tiling, monotonicity, inversion and derivative magnitude on a grid.
pub fn validate_branches(branches: &[Branch]) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut order: Vec<usize> = (0..branches.len()).collect();
    order.sort_by(|&i, &j| branches[i].lo.total_cmp(&branches[j].lo));
    for (pos, &i) in order.iter().enumerate() {
        let b = &branches[i];
        if b.lo.is_nan() || b.hi.is_nan() || b.lo >= b.hi {
            report.empty.push(i + 1);
        }
        if let Some(&j) = order.get(pos + 1) {
            let next = &branches[j];
            if b.hi > next.lo {
                report.overlaps.push((i + 1, j + 1));
            } else if b.hi < next.lo {
                report.gaps.push((b.hi, next.lo));
            }
        }
    }

    for (i, b) in branches.iter().enumerate() {
        if b.lo >= b.hi {
            continue;
        }
        let BranchMap::Injective {
            forward,
            inverse,
            derivative,
        } = &b.map
        else {
            continue;
        };
        let (a, c) = finite_window(b.lo, b.hi);
        let step = (c - a) / VALIDATION_GRID as f64;
        let xs = (0..VALIDATION_GRID).map(|k| a + (k as f64 + 0.5) * step);

        let mut prev: Option<f64> = None;
        let mut direction = 0.0_f64;
        let mut monotone = true;
        let mut derivs = Vec::with_capacity(VALIDATION_GRID);
        for x in xs {
            let y = forward(x);
            if let Some(p) = prev {
                let d = (y - p).signum();
                if y == p || (direction != 0.0 && d != direction) {
                    monotone = false;
                }
                direction = d;
            }
            prev = Some(y);
            let back = inverse(y);
            if (back - x).abs() > 1e-10 * x.abs().max(1.0) {
                report.inverse_errors.push((i + 1, x));
            }
            derivs.push((x, derivative(x).abs()));
        }
        if !monotone {
            report.non_monotone.push(i + 1);
        }
        let scale = derivs.iter().map(|d| d.1).fold(0.0, f64::max).max(1.0);
        let mut in_run = false;
        let mut best: Option<(f64, f64)> = None;
        for &(x, d) in &derivs {
            if d <= 1e-6 * scale {
                in_run = true;
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((x, d));
                }
            } else if in_run {
                in_run = false;
                if let Some((bx, _)) = best.take() {
                    report.zero_derivative.push((i + 1, bx));
                }
            }
        }
        if let Some((bx, _)) = best {
            report.zero_derivative.push((i + 1, bx));
        }
    }
    report
}

/// A surjective piecewise function on `[domain_lo, domain_hi)`.
///
/// Immutable after construction and `Send + Sync`.
#[derive(Clone, Debug)]
pub struct PiecewiseFunction {
    branches: Vec<Branch>,
    tag: FunctionTag,
}

impl PiecewiseFunction {
    /// Sorts branches by left end, assigns one-based indices and checks that
    /// they tile a single interval.
    pub fn new(mut branches: Vec<Branch>, tag: FunctionTag) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::BadParameter("function needs at least one branch".into()));
        }
        branches.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let report = validate_branches(&branches);
        if !report.tiling_ok() {
            return Err(Error::Tiling(Box::new(report)));
        }
        for (k, b) in branches.iter_mut().enumerate() {
            b.index = k + 1;
        }
        Ok(PiecewiseFunction { branches, tag })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn tag(&self) -> &FunctionTag {
        &self.tag
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.branches[0].lo, self.branches[self.branches.len() - 1].hi)
    }

    pub fn in_domain(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        lo <= x && x < hi
    }

    /// Closed hull of the function's image.
    pub fn range(&self) -> (f64, f64) {
        self.branches
            .iter()
            .map(Branch::image)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| {
                (a.min(c), b.max(d))
            })
    }

    /// Closed hull of the image of `[lo, hi) ∩ domain`.
    pub fn range_on(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.branches
            .iter()
            .filter_map(|b| b.image_on(lo, hi))
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn is_all_injective(&self) -> bool {
        self.branches.iter().all(|b| !b.is_constant())
    }

    pub fn has_constant_piece(&self) -> bool {
        self.branches.iter().any(Branch::is_constant)
    }

    pub fn branch_at(&self, x: f64) -> Result<&Branch> {
        if !self.in_domain(x) {
            return Err(Error::OutOfDomain(x));
        }
        let pos = self.branches.partition_point(|b| b.hi <= x);
        Ok(&self.branches[pos])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.branch_at(x)?.forward(x))
    }

    /// One-based index of the branch containing `x`.
    pub fn branch_index(&self, x: f64) -> Result<usize> {
        Ok(self.branch_at(x)?.index)
    }

    pub fn abs_derivative(&self, x: f64) -> Result<f64> {
        let b = self.branch_at(x)?;
        if b.is_constant() {
            return Err(Error::ConstantBranch(x));
        }
        Ok(b.derivative(x).abs())
    }

    /// `log2 |g'(x)|`.
    pub fn log_abs_derivative(&self, x: f64) -> Result<f64> {
        Ok(self.abs_derivative(x)?.log2())
    }

    /// All solutions of `g(x) = y`, ordered by branch.
    pub fn preimage(&self, y: f64) -> Vec<Preimage> {
        let mut out = Vec::new();
        self.preimage_into(y, &mut out);
        out
    }

    pub(crate) fn preimage_into(&self, y: f64, out: &mut Vec<Preimage>) {
        out.clear();
        for b in &self.branches {
            match &b.map {
                BranchMap::Constant(c) => {
                    if *c == y {
                        out.push(Preimage::Interval {
                            branch: b.index,
                            lo: b.lo,
                            hi: b.hi,
                        });
                    }
                }
                BranchMap::Injective { inverse, .. } => {
                    let (rlo, rhi) = b.image();
                    if y < rlo || y > rhi {
                        continue;
                    }
                    let x = inverse(y);
                    if b.contains(x) {
                        out.push(Preimage::Point { branch: b.index, x });
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_branches(&self.branches)
    }

    /// Restricts the domain to `[lo, hi) ∩ domain`, dropping empty pieces.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<PiecewiseFunction> {
        let branches: Vec<Branch> = self
            .branches
            .iter()
            .filter_map(|b| {
                let a = b.lo.max(lo);
                let c = b.hi.min(hi);
                (a < c).then(|| b.with_domain(a, c))
            })
            .collect();
        if branches.is_empty() {
            return Err(Error::RangeMismatch {
                range_lo: lo,
                range_hi: hi,
                domain_lo: self.domain().0,
                domain_hi: self.domain().1,
            });
        }
        PiecewiseFunction::new(branches, self.tag.clone())
    }

    /// Output values where a density pushed through `g` may jump: images of
    /// branch endpoints (from both sides) and of the given input points, all
    /// restricted to inputs in `[lo, hi]`.
    pub fn image_breakpoints(&self, xs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let mut ys = Vec::new();
        for b in &self.branches {
            let a = b.lo.max(lo);
            let c = b.hi.min(hi);
            if a > c {
                continue;
            }
            ys.push(b.forward(a));
            ys.push(b.forward(c));
            for &x in xs {
                if a <= x && x <= c {
                    ys.push(b.forward(x));
                }
            }
        }
        ys.retain(|y| y.is_finite());
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys
    }

    /// `outer ∘ inner`. Both must be all-injective and the image of `inner`
    /// must lie in the domain of `outer`.
    pub fn compose(outer: &PiecewiseFunction, inner: &PiecewiseFunction) -> Result<Self> {
        if !outer.is_all_injective() || !inner.is_all_injective() {
            return Err(Error::IncompatibleSpec(
                "composition needs all-injective functions".into(),
            ));
        }
        let (rlo, rhi) = inner.range();
        let (dlo, dhi) = outer.domain();
        // the right end of a closed range hull is allowed to touch the open
        // right end of the domain: the touching point has measure zero
        let (rlo, rhi) = (snap_to(rlo, dlo), snap_to(rhi, dhi));
        if rlo < dlo || rhi > dhi {
            return Err(Error::RangeMismatch {
                range_lo: rlo,
                range_hi: rhi,
                domain_lo: dlo,
                domain_hi: dhi,
            });
        }
        let cuts: Vec<f64> = outer.branches.iter().skip(1).map(|b| b.lo).collect();

        let mut out = Vec::new();
        for ib in &inner.branches {
            let (ilo, ihi) = ib.image();
            let mut xs = vec![ib.lo, ib.hi];
            for &c in &cuts {
                if ilo < c && c < ihi {
                    if let Some(x) = ib.inverse(c) {
                        if ib.lo < x && x < ib.hi {
                            xs.push(x);
                        }
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            for w in xs.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mid = ib.forward(interior_point(a, b));
                let ob = outer.branch_at(mid.min(dhi.next_down()))?;
                out.push(compose_branch(ob, ib, a, b));
            }
        }
        PiecewiseFunction::new(out, FunctionTag::Composite)
    }
}

fn compose_branch(outer: &Branch, inner: &Branch, lo: f64, hi: f64) -> Branch {
    let (
        BranchMap::Injective {
            forward: of,
            inverse: oi,
            derivative: od,
        },
        BranchMap::Injective {
            forward: inf,
            inverse: ii,
            derivative: id,
        },
    ) = (&outer.map, &inner.map)
    else {
        unreachable!("compose checks injectivity first");
    };
    let (of, inf2) = (of.clone(), inf.clone());
    let (oi, ii) = (oi.clone(), ii.clone());
    let (od, id, inf3) = (od.clone(), id.clone(), inf.clone());
    Branch::injective(
        lo,
        hi,
        move |x| of(inf2(x)),
        move |y| ii(oi(y)),
        move |x| id(x) * od(inf3(x)),
    )
}

/// Identity on the whole real line.
pub fn identity() -> PiecewiseFunction {
    identity_on(f64::NEG_INFINITY, f64::INFINITY).expect("valid")
}

pub fn identity_on(lo: f64, hi: f64) -> Result<PiecewiseFunction> {
    PiecewiseFunction::new(vec![Branch::affine(lo, hi, 1.0, 0.0)], FunctionTag::Identity)
}

/// `|x|` with pieces `(-inf, 0)` and `[0, inf)`.
pub fn magnitude() -> PiecewiseFunction {
    PiecewiseFunction::new(
        vec![
            Branch::affine(f64::NEG_INFINITY, 0.0, -1.0, 0.0),
            Branch::affine(0.0, f64::INFINITY, 1.0, 0.0),
        ],
        FunctionTag::Magnitude,
    )
    .expect("valid")
}

pub fn scale(k: f64) -> Result<PiecewiseFunction> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::BadParameter(format!("scale factor must be finite and non-zero, got {k}")));
    }
    PiecewiseFunction::new(
        vec![Branch::affine(f64::NEG_INFINITY, f64::INFINITY, k, 0.0)],
        FunctionTag::Scale(k),
    )
}

/// `x^2` with pieces `(-inf, 0)` and `[0, inf)`.
pub fn square() -> PiecewiseFunction {
    let piece = |lo, hi, sign: f64| {
        Branch::injective(lo, hi, |x| x * x, move |y: f64| sign * y.sqrt(), |x| 2.0 * x)
    };
    PiecewiseFunction::new(
        vec![
            piece(f64::NEG_INFINITY, 0.0, -1.0),
            piece(0.0, f64::INFINITY, 1.0),
        ],
        FunctionTag::Square,
    )
    .expect("valid")
}

/// Folds `cells` consecutive periods starting at `offset` onto the first:
/// `x -> x - k * period` on `[offset + k*period, offset + (k+1)*period)`.
pub fn shift_mod(period: f64, offset: f64, cells: usize) -> Result<PiecewiseFunction> {
    if !(period > 0.0 && period.is_finite() && offset.is_finite()) || cells == 0 {
        return Err(Error::BadParameter(format!(
            "shift_mod needs period > 0, finite offset and cells >= 1 (got {period}, {offset}, {cells})"
        )));
    }
    let edge = |k: usize| offset + k as f64 * period;
    let branches = (0..cells)
        .map(|k| Branch::affine(edge(k), edge(k + 1), 1.0, -(k as f64 * period)))
        .collect();
    PiecewiseFunction::new(branches, FunctionTag::ShiftMod { period, offset, cells })
}

/// Constant on each `[edges[k], edges[k+1])`, taking the cell midpoint.
pub fn quantizer(edges: &[f64]) -> Result<PiecewiseFunction> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::BadParameter(
            "quantizer needs at least two strictly increasing edges".into(),
        ));
    }
    let branches = edges
        .windows(2)
        .map(|w| Branch::constant(w[0], w[1], 0.5 * (w[0] + w[1])))
        .collect();
    PiecewiseFunction::new(branches, FunctionTag::Quantizer)
}

/// `P_X(X_c)`: marginal probability of the pieces on which `f` is constant.
pub fn constant_mass(
    f: &PiecewiseFunction,
    marginal: &dyn Density,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let (slo, shi) = marginal.integration_range();
    let mut splits = marginal.breakpoints();
    splits.extend(f.branches.iter().map(|b| b.lo));
    let total = quad_with_splits(|x| marginal.pdf(x), slo, shi, &splits, cfg)?;
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(total));
    }
    let (dlo, dhi) = f.domain();
    let (tlo, thi) = marginal.support();
    if !f.has_constant_piece() {
        return Ok(0.0);
    }
    if f.branches.iter().all(Branch::is_constant) && dlo <= tlo && thi <= dhi {
        return Ok(1.0);
    }
    let mut mass = 0.0;
    for b in f.branches.iter().filter(|b| b.is_constant()) {
        let a = b.lo.max(slo);
        let c = b.hi.min(shi);
        if a < c {
            mass += quad_with_splits(|x| marginal.pdf(x), a, c, &marginal.breakpoints(), cfg)?;
        }
    }
    Ok(mass.clamp(0.0, 1.0))
}

fn quad_with_splits(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    splits: &[f64],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let cfg = cfg.clone().with_splits(splits.iter().copied());
    quad(f, lo, hi, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{Gaussian, Uniform};

    fn tight_shift() -> PiecewiseFunction {
        shift_mod(2.0, 0.0, 2).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(magnitude().eval(-3.0).unwrap(), 3.0);
        assert_eq!(tight_shift().eval(3.5).unwrap(), 1.5);
        assert_eq!(identity_on(0.0, 1.0).unwrap().eval(0.25).unwrap(), 0.25);
        assert!(matches!(tight_shift().eval(4.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn branch_index_uses_half_open_pieces() {
        let m = 2.0;
        let f = magnitude().restrict(-m, m).unwrap();
        assert_eq!(f.branch_index(-0.5).unwrap(), 1);
        assert_eq!(f.branch_index(0.0).unwrap(), 2);
        assert_eq!(identity().branch_index(123.0).unwrap(), 1);
        assert!(f.branch_index(m).is_err());
    }

    #[test]
    fn preimage_examples() {
        assert_eq!(
            magnitude().preimage(2.0),
            vec![
                Preimage::Point { branch: 1, x: -2.0 },
                Preimage::Point { branch: 2, x: 2.0 }
            ]
        );
        assert_eq!(
            tight_shift().preimage(0.5),
            vec![
                Preimage::Point { branch: 1, x: 0.5 },
                Preimage::Point { branch: 2, x: 2.5 }
            ]
        );
        assert!(magnitude().preimage(-1.0).is_empty());
        // zero lies only in the right piece
        assert_eq!(magnitude().preimage(0.0).len(), 1);
    }

    #[test]
    fn preimage_marks_constant_pieces() {
        let f = quantizer(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            f.preimage(1.5),
            vec![Preimage::Interval { branch: 2, lo: 1.0, hi: 2.0 }]
        );
        assert!(f.preimage(1.2).is_empty());
    }

    #[test]
    fn log_abs_derivative_examples() {
        assert_eq!(magnitude().log_abs_derivative(-3.0).unwrap(), 0.0);
        assert_eq!(scale(2.0).unwrap().log_abs_derivative(1.0).unwrap(), 1.0);
        // d/dx x^2 = 2x = 8 at x = 4
        assert!((square().log_abs_derivative(4.0).unwrap() - 3.0).abs() < 1e-15);
        let q = quantizer(&[0.0, 1.0]).unwrap();
        assert!(matches!(q.log_abs_derivative(0.5), Err(Error::ConstantBranch(_))));
        assert!(matches!(q.log_abs_derivative(5.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn validate_examples() {
        assert!(magnitude().validate().is_valid());
        assert!(magnitude().validate().zero_derivative.is_empty());

        let overlapping = vec![Branch::affine(0.0, 1.0, 1.0, 0.0), Branch::affine(0.0, 1.0, 2.0, 0.0)];
        let report = validate_branches(&overlapping);
        assert_eq!(report.overlaps.len(), 1);
        assert!(matches!(
            PiecewiseFunction::new(overlapping, FunctionTag::Custom),
            Err(Error::Tiling(_))
        ));

        let gap = vec![Branch::affine(0.0, 1.0, 1.0, 0.0), Branch::affine(2.0, 3.0, 1.0, 0.0)];
        assert_eq!(validate_branches(&gap).gaps, vec![(1.0, 2.0)]);

        let cube = PiecewiseFunction::new(
            vec![Branch::injective(-1.0, 1.0, |x| x * x * x, f64::cbrt, |x| 3.0 * x * x)],
            FunctionTag::Custom,
        )
        .unwrap();
        let r = cube.validate();
        assert!(r.is_valid());
        assert_eq!(r.zero_derivative.len(), 1);
        assert!(r.zero_derivative[0].1.abs() < 1e-3);
    }

    #[test]
    fn validate_flags_non_monotone_branch() {
        let bad = vec![Branch::injective(-1.0, 1.0, |x| x * x, f64::sqrt, |x| 2.0 * x)];
        let r = validate_branches(&bad);
        assert_eq!(r.non_monotone, vec![1]);
        assert!(!r.inverse_errors.is_empty());
    }

    #[test]
    fn compose_examples() {
        let c = PiecewiseFunction::compose(&identity(), &magnitude()).unwrap();
        assert_eq!(c.branches().len(), 2);
        assert_eq!(c.eval(-1.5).unwrap(), 1.5);

        let half = scale(0.5).unwrap();
        let c = PiecewiseFunction::compose(&half, &magnitude()).unwrap();
        assert_eq!(c.eval(-4.0).unwrap(), 2.0);

        let c = PiecewiseFunction::compose(&magnitude(), &tight_shift()).unwrap();
        assert_eq!(c.eval(3.5).unwrap(), 1.5);
    }

    #[test]
    fn compose_splits_inner_pieces_at_outer_boundaries() {
        // magnitude after a shift that straddles zero
        let shift = PiecewiseFunction::new(vec![Branch::affine(0.0, 4.0, 1.0, -2.0)], FunctionTag::Custom).unwrap();
        let c = PiecewiseFunction::compose(&magnitude(), &shift).unwrap();
        assert_eq!(c.branches().len(), 2);
        assert_eq!(c.branches()[0].domain(), (0.0, 2.0));
        assert_eq!(c.eval(1.0).unwrap(), 1.0);
        assert_eq!(c.eval(3.0).unwrap(), 1.0);
        assert_eq!(c.preimage(1.0).len(), 2);
    }

    #[test]
    fn compose_rejects_range_mismatch() {
        assert!(matches!(
            PiecewiseFunction::compose(&tight_shift(), &magnitude()),
            Err(Error::RangeMismatch { .. })
        ));
        let q = quantizer(&[0.0, 1.0]).unwrap();
        assert!(PiecewiseFunction::compose(&identity(), &q).is_err());
    }

    #[test]
    fn constant_mass_examples() {
        let cfg = QuadratureConfig::default();
        let q = quantizer(&[0.0, 0.25, 0.5, 1.0]).unwrap();
        let u = Uniform::new(0.0, 1.0).unwrap();
        assert_eq!(constant_mass(&q, &u, &cfg).unwrap(), 1.0);

        let g = Gaussian::new(0.0, 1.0).unwrap();
        assert_eq!(constant_mass(&magnitude(), &g, &cfg).unwrap(), 0.0);

        let half = PiecewiseFunction::new(
            vec![Branch::constant(0.0, 1.0, 0.0), Branch::affine(1.0, 2.0, 1.0, 0.0)],
            FunctionTag::Custom,
        )
        .unwrap();
        let u2 = Uniform::new(0.0, 2.0).unwrap();
        assert!((constant_mass(&half, &u2, &cfg).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn constant_mass_rejects_unnormalized_density() {
        struct Bad;
        impl Density for Bad {
            fn pdf(&self, x: f64) -> f64 {
                if (0.0..1.0).contains(&x) { 2.0 } else { 0.0 }
            }
            fn sample(&self, _rng: &mut dyn rand::RngCore) -> f64 {
                0.5
            }
            fn support(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
        }
        let q = quantizer(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            constant_mass(&q, &Bad, &QuadratureConfig::default()),
            Err(Error::NotNormalized(_))
        ));
    }
}
