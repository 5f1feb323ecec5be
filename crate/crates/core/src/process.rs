//! Stationary first-order Markov and iid process models.
//!
//! Every process exposes its marginal density, its transition kernel (the
//! marginal itself for iid processes), an exact sampler driven by seeded
//! ChaCha streams, and closed-form entropies where known.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::quadrature::{quad, QuadratureConfig};
use crate::pbf::{PiecewiseFunction, Preimage};

/// Gaussian densities are integrated over mean ± this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 10.0;

/// A probability density on the real line.
pub trait Density: Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    /// True support, possibly unbounded.
    fn support(&self) -> (f64, f64);
    /// Finite interval used for quadrature.
    fn integration_range(&self) -> (f64, f64) {
        self.support()
    }
    /// Points where the density may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Differential entropy in bits, when known in closed form.
    fn entropy(&self) -> Option<f64> {
        None
    }
    /// Whether `pdf(x) == pdf(-x)` for all `x`.
    fn is_symmetric(&self) -> bool {
        false
    }
}

/// Conditional density `f(to | from)` of a first-order Markov process.
pub trait TransitionKernel: Send + Sync {
    fn pdf(&self, to: f64, from: f64) -> f64;
    fn sample(&self, from: f64, rng: &mut dyn RngCore) -> f64;
    /// Finite interval in `to` that carries all the mass given `from`.
    fn integration_range(&self, from: f64) -> (f64, f64);
    /// Points where the density may jump, in either argument, when the other
    /// argument is held at `at`.
    fn breakpoints(&self, _at: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    mean: f64,
    sd: f64,
}

impl Gaussian {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::BadParameter(format!("gaussian needs sd > 0, got {sd}")));
        }
        Ok(Gaussian { mean, sd })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

/// `φ(mean, sd²; x)`.
pub fn normal_pdf(mean: f64, sd: f64, x: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Differential entropy of a Gaussian with standard deviation `sd`, in bits.
pub fn gaussian_entropy(sd: f64) -> f64 {
    0.5 * (2.0 * PI * E * sd * sd).log2()
}

impl Density for Gaussian {
    fn pdf(&self, x: f64) -> f64 {
        normal_pdf(self.mean, self.sd, x)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        Normal::new(self.mean, self.sd).expect("validated").sample(rng)
    }

    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn integration_range(&self) -> (f64, f64) {
        let w = GAUSSIAN_TRUNCATION * self.sd;
        (self.mean - w, self.mean + w)
    }

    fn entropy(&self) -> Option<f64> {
        Some(gaussian_entropy(self.sd))
    }

    fn is_symmetric(&self) -> bool {
        self.mean == 0.0
    }
}

/// Uniform density on `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::BadParameter(format!("uniform needs finite lo < hi, got [{lo}, {hi})")));
        }
        Ok(Uniform { lo, hi })
    }
}

impl Density for Uniform {
    fn pdf(&self, x: f64) -> f64 {
        if self.lo <= x && x < self.hi {
            1.0 / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let x = self.lo + (self.hi - self.lo) * rng.random::<f64>();
        if x < self.hi { x } else { self.lo }
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.lo, self.hi]
    }

    fn entropy(&self) -> Option<f64> {
        Some((self.hi - self.lo).log2())
    }

    fn is_symmetric(&self) -> bool {
        self.lo == -self.hi
    }
}

/// Draws one value from a distribution.
pub type Sampler = Box<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;

/// Density assembled from closures.
pub struct FnDensity {
    pdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    sampler: Sampler,
    support: (f64, f64),
    breakpoints: Vec<f64>,
}

impl FnDensity {
    /// `support` must be finite; it doubles as the quadrature range.
    pub fn new(
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sampler: impl Fn(&mut dyn RngCore) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        breakpoints: Vec<f64>,
    ) -> Self {
        FnDensity {
            pdf: Box::new(pdf),
            sampler: Box::new(sampler),
            support,
            breakpoints,
        }
    }
}

impl Density for FnDensity {
    fn pdf(&self, x: f64) -> f64 {
        (self.pdf)(x)
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        (self.sampler)(rng)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// Density of `g(X)` for an all-injective `g`: `Σ f_X(x) / |g'(x)|` over preimages.
pub struct PushforwardDensity {
    f: Arc<PiecewiseFunction>,
    base: Arc<dyn Density>,
}

impl PushforwardDensity {
    pub fn new(f: Arc<PiecewiseFunction>, base: Arc<dyn Density>) -> Result<Self> {
        if !f.is_all_injective() {
            return Err(Error::InfiniteLoss);
        }
        Ok(PushforwardDensity { f, base })
    }
}

impl Density for PushforwardDensity {
    fn pdf(&self, y: f64) -> f64 {
        self.f
            .preimage(y)
            .iter()
            .filter_map(Preimage::point)
            .map(|x| {
                let d = self.f.abs_derivative(x).unwrap_or(f64::INFINITY);
                self.base.pdf(x) / d
            })
            .sum()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let x = self.base.sample(rng);
        self.f.eval(x).unwrap_or(f64::NAN)
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        self.f.range_on(lo, hi).unwrap_or((0.0, 0.0))
    }

    fn integration_range(&self) -> (f64, f64) {
        let (lo, hi) = self.base.integration_range();
        self.f.range_on(lo, hi).unwrap_or((0.0, 0.0))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.base.integration_range();
        self.f.image_breakpoints(&self.base.breakpoints(), lo, hi)
    }
}

/// Kernel `φ(a·from + offset, σ²; to)`; the AR(1) kernel when `offset = 0`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianShiftKernel {
    pub a: f64,
    pub sigma: f64,
    pub offset: f64,
}

impl TransitionKernel for GaussianShiftKernel {
    fn pdf(&self, to: f64, from: f64) -> f64 {
        normal_pdf(self.a * from + self.offset, self.sigma, to)
    }

    fn sample(&self, from: f64, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = Normal::new(0.0, self.sigma).expect("sigma > 0").sample(rng);
        self.a * from + self.offset + z
    }

    fn integration_range(&self, from: f64) -> (f64, f64) {
        let m = self.a * from + self.offset;
        let w = GAUSSIAN_TRUNCATION * self.sigma;
        (m - w, m + w)
    }
}

/// Uniform step of half-width `a`, wrapped onto the circle `[-m, m)`.
#[derive(Clone, Copy, Debug)]
pub struct CyclicKernel {
    pub m: f64,
    pub a: f64,
}

impl CyclicKernel {
    /// Maps `x` onto `[-m, m)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let period = 2.0 * self.m;
        let mut r = (x + self.m).rem_euclid(period);
        if r >= period {
            r = 0.0;
        }
        r - self.m
    }

    /// Circular distance `min_k |x - y - 2km|`.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let period = 2.0 * self.m;
        let d = (x - y).rem_euclid(period);
        d.min(period - d)
    }
}

impl TransitionKernel for CyclicKernel {
    fn pdf(&self, to: f64, from: f64) -> f64 {
        if to < -self.m || to >= self.m {
            return 0.0;
        }
        if self.distance(to, from) <= self.a {
            0.5 / self.a
        } else {
            0.0
        }
    }

    fn sample(&self, from: f64, rng: &mut dyn RngCore) -> f64 {
        let step = self.a * (2.0 * rng.random::<f64>() - 1.0);
        self.wrap(from + step)
    }

    fn integration_range(&self, _from: f64) -> (f64, f64) {
        (-self.m, self.m)
    }

    fn breakpoints(&self, at: f64) -> Vec<f64> {
        if self.a >= self.m {
            return vec![-self.m, self.m];
        }
        vec![-self.m, self.m, self.wrap(at - self.a), self.wrap(at + self.a)]
    }
}

/// Block kernel on `[0, 4)`: from `[0,1) ∪ [2,3)` jump uniformly into
/// `[1,2) ∪ [3,4)`, and vice versa.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlockKernel;

impl BlockKernel {
    fn odd_cell(x: f64) -> Option<bool> {
        if !(0.0..4.0).contains(&x) {
            return None;
        }
        Some((x.floor() as i64) % 2 == 1)
    }
}

impl TransitionKernel for BlockKernel {
    fn pdf(&self, to: f64, from: f64) -> f64 {
        match (Self::odd_cell(from), Self::odd_cell(to)) {
            (Some(a), Some(b)) if a != b => 0.5,
            _ => 0.0,
        }
    }

    fn sample(&self, from: f64, rng: &mut dyn RngCore) -> f64 {
        let target_odd = !Self::odd_cell(from).unwrap_or(true);
        let base = if rng.random::<bool>() { 0.0 } else { 2.0 };
        let cell = base + if target_odd { 1.0 } else { 0.0 };
        cell + rng.random::<f64>()
    }

    fn integration_range(&self, _from: f64) -> (f64, f64) {
        (0.0, 4.0)
    }

    fn breakpoints(&self, _at: f64) -> Vec<f64> {
        vec![0.0, 1.0, 2.0, 3.0, 4.0]
    }
}

/// Kernel of an iid process: the marginal, independent of `from`.
pub struct IidKernel(pub Arc<dyn Density>);

impl TransitionKernel for IidKernel {
    fn pdf(&self, to: f64, _from: f64) -> f64 {
        self.0.pdf(to)
    }
    fn sample(&self, _from: f64, rng: &mut dyn RngCore) -> f64 {
        self.0.sample(rng)
    }
    fn integration_range(&self, _from: f64) -> (f64, f64) {
        self.0.integration_range()
    }
    fn breakpoints(&self, _at: f64) -> Vec<f64> {
        self.0.breakpoints()
    }
}

/// Kernel of `Y = g(X)` for a process that is lumpable with respect to `g`:
/// `f(y2 | y1) = Σ_{x2 ∈ g⁻¹[y2]} f(x2 | x̂) / |g'(x2)|` for any `x̂ ∈ g⁻¹[y1]`
/// with positive marginal density.
pub struct LumpedKernel {
    f: Arc<PiecewiseFunction>,
    base: Arc<dyn TransitionKernel>,
    base_marginal: Arc<dyn Density>,
}

impl LumpedKernel {
    fn representative(&self, y: f64) -> Option<f64> {
        self.f
            .preimage(y)
            .iter()
            .filter_map(Preimage::point)
            .find(|&x| self.base_marginal.pdf(x) > 0.0)
    }
}

impl TransitionKernel for LumpedKernel {
    fn pdf(&self, to: f64, from: f64) -> f64 {
        let Some(x1) = self.representative(from) else {
            return 0.0;
        };
        self.f
            .preimage(to)
            .iter()
            .filter_map(Preimage::point)
            .map(|x2| self.base.pdf(x2, x1) / self.f.abs_derivative(x2).unwrap_or(f64::INFINITY))
            .sum()
    }

    fn sample(&self, from: f64, rng: &mut dyn RngCore) -> f64 {
        let x1 = self.representative(from).unwrap_or(from);
        let x2 = self.base.sample(x1, rng);
        self.f.eval(x2).unwrap_or(f64::NAN)
    }

    fn integration_range(&self, from: f64) -> (f64, f64) {
        let x1 = self.representative(from).unwrap_or(from);
        let (lo, hi) = self.base.integration_range(x1);
        self.f.range_on(lo, hi).unwrap_or((0.0, 0.0))
    }

    fn breakpoints(&self, at: f64) -> Vec<f64> {
        let x1 = self.representative(at).unwrap_or(at);
        let (lo, hi) = self.base.integration_range(x1);
        let mut xs = self.base.breakpoints(x1);
        xs.extend(self.base_marginal.breakpoints());
        self.f.image_breakpoints(&xs, lo, hi)
    }
}

/// Closed-form entropies of a process, all in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticEntropies {
    /// `h(X)`
    pub h_marginal: f64,
    /// `h̄(X)`
    pub h_rate: f64,
    /// `I(X1; X2)`
    pub mi_lag1: f64,
}

/// A stationary process: marginal density plus transition kernel.
#[derive(Clone)]
pub struct StationaryProcess {
    name: String,
    marginal: Arc<dyn Density>,
    kernel: Arc<dyn TransitionKernel>,
    iid: bool,
    analytic: Option<AnalyticEntropies>,
}

impl std::fmt::Debug for StationaryProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationaryProcess")
            .field("name", &self.name)
            .field("iid", &self.iid)
            .field("analytic", &self.analytic)
            .finish()
    }
}

/// A sampled path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub length: usize,
}

/// Deterministic RNG for `(seed, stream)`; distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_normalized(d: &dyn Density) -> Result<()> {
    let (lo, hi) = d.integration_range();
    let cfg = QuadratureConfig::default().with_splits(d.breakpoints());
    let total = quad(|x| d.pdf(x), lo, hi, &cfg)?;
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

/// Gaussian AR(1) process `X_n = a X_{n-1} + Z_n`, `Z_n ~ N(0, σ²)`.
pub fn make_ar1(a: f64, sigma: f64) -> Result<StationaryProcess> {
    if !(a > 0.0 && a < 1.0) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadParameter(format!(
            "ar1 needs 0 < a < 1 and sigma > 0, got a = {a}, sigma = {sigma}"
        )));
    }
    let sd_x = sigma / (1.0 - a * a).sqrt();
    let analytic = AnalyticEntropies {
        h_marginal: gaussian_entropy(sd_x),
        h_rate: gaussian_entropy(sigma),
        mi_lag1: -0.5 * (1.0 - a * a).log2(),
    };
    Ok(StationaryProcess {
        name: format!("ar1(a={a}, sigma={sigma})"),
        marginal: Arc::new(Gaussian::new(0.0, sd_x)?),
        kernel: Arc::new(GaussianShiftKernel { a, sigma, offset: 0.0 }),
        iid: false,
        analytic: Some(analytic),
    })
}

/// Cyclic random walk on `[-m, m)` with uniform steps on `[-a, a]`.
pub fn make_cyclic_walk(m: f64, a: f64) -> Result<StationaryProcess> {
    if !(m > 0.0 && m.is_finite() && a > 0.0 && a <= m) {
        return Err(Error::BadParameter(format!(
            "cyclic walk needs 0 < a <= M, got M = {m}, a = {a}"
        )));
    }
    let analytic = AnalyticEntropies {
        h_marginal: (2.0 * m).log2(),
        h_rate: (2.0 * a).log2(),
        mi_lag1: (m / a).log2(),
    };
    Ok(StationaryProcess {
        name: format!("cyclic_walk(M={m}, a={a})"),
        marginal: Arc::new(Uniform::new(-m, m)?),
        kernel: Arc::new(CyclicKernel { m, a }),
        iid: false,
        analytic: Some(analytic),
    })
}

/// Block-kernel process on `[0, 4)` with uniform marginal.
pub fn make_tightness_example() -> StationaryProcess {
    StationaryProcess {
        name: "tightness".into(),
        marginal: Arc::new(Uniform::new(0.0, 4.0).expect("valid")),
        kernel: Arc::new(BlockKernel),
        iid: false,
        analytic: Some(AnalyticEntropies {
            h_marginal: 2.0,
            h_rate: 1.0,
            mi_lag1: 1.0,
        }),
    }
}

/// iid process with the given marginal.
pub fn make_iid(marginal: Arc<dyn Density>) -> Result<StationaryProcess> {
    check_normalized(marginal.as_ref())?;
    let analytic = marginal.entropy().map(|h| AnalyticEntropies {
        h_marginal: h,
        h_rate: h,
        mi_lag1: 0.0,
    });
    Ok(StationaryProcess {
        name: "iid".into(),
        kernel: Arc::new(IidKernel(marginal.clone())),
        marginal,
        iid: true,
        analytic,
    })
}

pub fn iid_gaussian(sigma: f64) -> Result<StationaryProcess> {
    let mut p = make_iid(Arc::new(Gaussian::new(0.0, sigma)?))?;
    p.name = format!("iid_gaussian(sigma={sigma})");
    Ok(p)
}

pub fn iid_uniform(lo: f64, hi: f64) -> Result<StationaryProcess> {
    let mut p = make_iid(Arc::new(Uniform::new(lo, hi)?))?;
    p.name = format!("iid_uniform({lo}, {hi})");
    Ok(p)
}

/// Markov process from an arbitrary marginal and kernel. Stationarity is not
/// enforced; see [`StationaryProcess::stationarity_residual`].
pub fn make_markov(
    name: impl Into<String>,
    marginal: Arc<dyn Density>,
    kernel: Arc<dyn TransitionKernel>,
) -> Result<StationaryProcess> {
    check_normalized(marginal.as_ref())?;
    Ok(StationaryProcess {
        name: name.into(),
        marginal,
        kernel,
        iid: false,
        analytic: None,
    })
}

impl StationaryProcess {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn marginal(&self) -> &Arc<dyn Density> {
        &self.marginal
    }

    pub fn kernel(&self) -> &Arc<dyn TransitionKernel> {
        &self.kernel
    }

    pub fn is_iid(&self) -> bool {
        self.iid
    }

    pub fn analytic(&self) -> Option<&AnalyticEntropies> {
        self.analytic.as_ref()
    }

    pub fn marginal_pdf(&self, x: f64) -> f64 {
        self.marginal.pdf(x)
    }

    pub fn cond_pdf(&self, to: f64, from: f64) -> f64 {
        self.kernel.pdf(to, from)
    }

    /// `X_1` from the marginal, then `X_{k+1}` from the kernel, on stream 0.
    pub fn sample_path(&self, n: usize, seed: u64) -> PathSample {
        self.sample_path_on_stream(n, seed, 0)
    }

    pub fn sample_path_on_stream(&self, n: usize, seed: u64, stream: u64) -> PathSample {
        let mut rng = stream_rng(seed, stream);
        let mut values = Vec::with_capacity(n);
        if n > 0 {
            let mut x = self.marginal.sample(&mut rng);
            values.push(x);
            for _ in 1..n {
                x = if self.iid {
                    self.marginal.sample(&mut rng)
                } else {
                    self.kernel.sample(x, &mut rng)
                };
                values.push(x);
            }
        }
        PathSample { values, seed, length: n }
    }

    /// `max |∫ f(x2|x1) f(x1) dx1 − f(x2)|` over `points` cell midpoints.
    pub fn stationarity_residual(&self, points: usize, cfg: &QuadratureConfig) -> Result<f64> {
        let (lo, hi) = self.marginal.integration_range();
        let mut worst = 0.0_f64;
        for k in 0..points {
            let x2 = lo + (k as f64 + 0.5) * (hi - lo) / points as f64;
            let mut splits = self.marginal.breakpoints();
            splits.extend(self.kernel.breakpoints(x2));
            let c = cfg.clone().with_splits(splits);
            let pushed = quad(|x1| self.kernel.pdf(x2, x1) * self.marginal.pdf(x1), lo, hi, &c)?;
            worst = worst.max((pushed - self.marginal.pdf(x2)).abs());
        }
        Ok(worst)
    }

    /// `max |∫ f(x2|x1) dx2 − 1|` over `points` cell midpoints `x1`.
    pub fn kernel_normalization_residual(&self, points: usize, cfg: &QuadratureConfig) -> Result<f64> {
        let (lo, hi) = self.marginal.integration_range();
        let mut worst = 0.0_f64;
        for k in 0..points {
            let x1 = lo + (k as f64 + 0.5) * (hi - lo) / points as f64;
            let (a, b) = self.kernel.integration_range(x1);
            let c = cfg.clone().with_splits(self.kernel.breakpoints(x1));
            let total = quad(|x2| self.kernel.pdf(x2, x1), a, b, &c)?;
            worst = worst.max((total - 1.0).abs());
        }
        Ok(worst)
    }

    /// The output process `Y = g(X)`.
    ///
    /// For Markov inputs the result is only a Markov process when `X` is
    /// lumpable with respect to `g`; callers must check that first.
    pub fn pushforward(&self, f: Arc<PiecewiseFunction>) -> Result<StationaryProcess> {
        let marginal: Arc<dyn Density> =
            Arc::new(PushforwardDensity::new(f.clone(), self.marginal.clone())?);
        let (kernel, iid): (Arc<dyn TransitionKernel>, bool) = if self.iid {
            (Arc::new(IidKernel(marginal.clone())), true)
        } else {
            (
                Arc::new(LumpedKernel {
                    f: f.clone(),
                    base: self.kernel.clone(),
                    base_marginal: self.marginal.clone(),
                }),
                false,
            )
        };
        Ok(StationaryProcess {
            name: format!("g({})", self.name),
            marginal,
            kernel,
            iid,
            analytic: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn ar1_parameters() {
        let p = make_ar1(0.5, 1.0).unwrap();
        let an = p.analytic().unwrap();
        let var_x: f64 = 1.0 / 0.75;
        assert!((an.h_marginal - gaussian_entropy(var_x.sqrt())).abs() < 1e-12);
        assert!((an.h_marginal - an.h_rate - an.mi_lag1).abs() < 1e-12);
        let p = make_ar1(0.9, 1.0).unwrap();
        assert!((p.analytic().unwrap().mi_lag1 - 1.197_964_3).abs() < 1e-6);
        let tiny = make_ar1(1e-9, 1.0).unwrap();
        assert!(tiny.analytic().unwrap().mi_lag1 < 1e-15);
        assert!(make_ar1(1.0, 1.0).is_err());
        assert!(make_ar1(0.5, 0.0).is_err());
    }

    #[test]
    fn cyclic_kernel_examples() {
        let p = make_cyclic_walk(1.0, 1.0).unwrap();
        for (x2, x1) in [(-0.9, 0.8), (0.3, -0.3), (0.99, -0.99)] {
            assert_eq!(p.cond_pdf(x2, x1), 0.5);
        }
        let p = make_cyclic_walk(3.0, 1.0).unwrap();
        assert_eq!(p.cond_pdf(-2.9, 2.5), 0.5);
        assert_eq!(p.cond_pdf(0.0, 2.5), 0.0);
        assert!(make_cyclic_walk(1.0, 1.5).is_err());
    }

    #[test]
    fn wrap_is_left_closed() {
        let k = CyclicKernel { m: 1.0, a: 0.5 };
        assert_eq!(k.wrap(1.0), -1.0);
        assert_eq!(k.wrap(-1.0), -1.0);
        assert!((k.wrap(1.25) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn builtin_processes_are_stationary() {
        let procs = [
            make_ar1(0.5, 1.0).unwrap(),
            make_ar1(0.9, 2.0).unwrap(),
            make_cyclic_walk(3.0, 1.0).unwrap(),
            make_cyclic_walk(1.0, 0.7).unwrap(),
            make_tightness_example(),
            iid_gaussian(1.0).unwrap(),
            iid_uniform(0.0, 1.0).unwrap(),
        ];
        for p in &procs {
            let r = p.stationarity_residual(64, &cfg()).unwrap();
            assert!(r <= 1e-4, "{}: stationarity residual {r}", p.name());
            let k = p.kernel_normalization_residual(16, &cfg()).unwrap();
            assert!(k <= 1e-6, "{}: kernel residual {k}", p.name());
        }
    }

    #[test]
    fn tightness_entropies() {
        let p = make_tightness_example();
        let an = p.analytic().unwrap();
        assert_eq!(an.h_marginal, 2.0);
        assert_eq!(an.h_rate, 1.0);
    }

    #[test]
    fn iid_examples() {
        let g = iid_gaussian(1.0).unwrap();
        assert_eq!(g.analytic().unwrap().mi_lag1, 0.0);
        let u = iid_uniform(0.0, 1.0).unwrap();
        assert_eq!(u.analytic().unwrap().h_marginal, 0.0);
        assert_eq!(u.stationarity_residual(64, &cfg()).unwrap(), 0.0);
        let bad = FnDensity::new(|_| 0.5, |_| 0.0, (0.0, 1.0), vec![]);
        assert!(matches!(make_iid(Arc::new(bad)), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn paths_are_reproducible() {
        let p = make_cyclic_walk(2.0, 0.5).unwrap();
        let a = p.sample_path(1000, 7);
        let b = p.sample_path(1000, 7);
        assert_eq!(a, b);
        assert_ne!(a.values, p.sample_path(1000, 8).values);
        assert!(a.values.iter().all(|&x| (-2.0..2.0).contains(&x)));
    }

    #[test]
    fn tightness_paths_alternate_blocks() {
        let p = make_tightness_example();
        let path = p.sample_path(100_000, 3);
        for w in path.values.windows(2) {
            let even = |x: f64| (0.0..1.0).contains(&x) || (2.0..3.0).contains(&x);
            assert_ne!(even(w[0]), even(w[1]));
            assert!((0.0..4.0).contains(&w[1]));
        }
    }
}
