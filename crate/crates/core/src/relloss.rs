//! Relative information loss for functions with constant pieces and for
//! dimension-reducing multirate blocks.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::QuadratureConfig;
use crate::pbf::{constant_mass, PiecewiseFunction};
use crate::process::StationaryProcess;

/// Smallest path accepted by [`empirical_constant_frequency`].
pub const MIN_FREQUENCY_SAMPLES: usize = 10_000;

/// Relative loss of a function made of injective and constant pieces: the
/// probability mass the marginal puts on the constant pieces. The same value
/// is both the per-sample relative loss and the relative loss rate.
pub fn relative_loss_rate_constant_pieces(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    constant_mass(f, p.marginal().as_ref(), cfg)
}

/// Fraction of a sampled path that lands in a constant piece.
pub fn empirical_constant_frequency(
    f: &PiecewiseFunction,
    p: &StationaryProcess,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples < MIN_FREQUENCY_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FREQUENCY_SAMPLES,
            got: n_samples,
        });
    }
    let path = p.sample_path(n_samples, seed);
    let mut hits = 0usize;
    for &x in &path.values {
        if f.branch_at(x)?.is_constant() {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_samples as f64)
}

/// Binomial standard error `sqrt(p(1-p)/N)`.
pub fn binomial_standard_error(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Which loss measure is meaningful for a (function, process) pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// No probability on constant pieces: the loss is finite and the
    /// relative loss is zero.
    FiniteLoss,
    /// Positive mass on constant pieces: the loss is infinite and only the
    /// relative loss is informative.
    ConstantPieces { mass: f64 },
}

/// Decides between the absolute and the relative loss pipelines. Exactly one
/// of them applies to any pair.
pub fn classify(f: &PiecewiseFunction, p: &StationaryProcess, cfg: &QuadratureConfig) -> Result<Regime> {
    if !f.has_constant_piece() {
        return Ok(Regime::FiniteLoss);
    }
    let mass = relative_loss_rate_constant_pieces(f, p, cfg)?;
    Ok(if mass > 0.0 {
        Regime::ConstantPieces { mass }
    } else {
        Regime::FiniteLoss
    })
}

/// Dimension bookkeeping for a block of `n` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DimensionProfile {
    pub n: u64,
    pub dim_in: u64,
    pub dim_out: u64,
    pub rel_loss_n: Ratio<u64>,
}

impl DimensionProfile {
    /// An `m`-fold downsampler keeps `⌊n/m⌋` of every `n` input samples.
    pub fn downsampler(m: u64, n: u64) -> Result<Self> {
        check_factor(m)?;
        if n == 0 {
            return Err(Error::BadParameter("block length must be at least 1".into()));
        }
        let dim_out = n / m;
        Ok(DimensionProfile {
            n,
            dim_in: n,
            dim_out,
            rel_loss_n: Ratio::new(n - dim_out, n),
        })
    }
}

fn check_factor(m: u64) -> Result<()> {
    if m == 0 {
        return Err(Error::BadParameter("downsampling factor must be at least 1".into()));
    }
    Ok(())
}

/// Relative loss of an `m`-fold downsampler: `1 − ⌊n/m⌋/n` for a block of
/// `n` samples, or the limit `(m−1)/m`.
pub fn downsampler_relative_loss(m: u64, n: Option<u64>) -> Result<Ratio<u64>> {
    check_factor(m)?;
    match n {
        Some(n) => DimensionProfile::downsampler(m, n).map(|d| d.rel_loss_n),
        None => Ok(Ratio::new(m - 1, m)),
    }
}

/// `num/den` as a float.
pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbf::{magnitude, quantizer, Branch, FunctionTag};
    use crate::process::{iid_gaussian, iid_uniform, make_ar1};

    fn half_constant() -> PiecewiseFunction {
        PiecewiseFunction::new(
            vec![Branch::constant(0.0, 1.0, 0.0), Branch::affine(1.0, 2.0, 1.0, 0.0)],
            FunctionTag::Custom,
        )
        .unwrap()
    }

    #[test]
    fn constant_pieces_examples() {
        let cfg = QuadratureConfig::default();
        let u = iid_uniform(0.0, 1.0).unwrap();
        let q = quantizer(&[0.0, 0.25, 0.5, 1.0]).unwrap();
        assert!((relative_loss_rate_constant_pieces(&q, &u, &cfg).unwrap() - 1.0).abs() < 1e-12);
        let g = iid_gaussian(1.0).unwrap();
        assert_eq!(relative_loss_rate_constant_pieces(&magnitude(), &g, &cfg).unwrap(), 0.0);
        let u2 = iid_uniform(0.0, 2.0).unwrap();
        let v = relative_loss_rate_constant_pieces(&half_constant(), &u2, &cfg).unwrap();
        assert!((v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empirical_frequency_examples() {
        let u2 = iid_uniform(0.0, 2.0).unwrap();
        let n = 1_000_000;
        let v = empirical_constant_frequency(&half_constant(), &u2, n, 7).unwrap();
        assert!((v - 0.5).abs() <= 4.0 * binomial_standard_error(0.5, n), "{v}");
        assert!((v - 0.5).abs() <= 0.002);
        let g = make_ar1(0.5, 1.0).unwrap();
        assert_eq!(empirical_constant_frequency(&magnitude(), &g, 20_000, 1).unwrap(), 0.0);
        let u = iid_uniform(0.0, 1.0).unwrap();
        let q = quantizer(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(empirical_constant_frequency(&q, &u, 20_000, 1).unwrap(), 1.0);
        assert!(matches!(
            empirical_constant_frequency(&q, &u, 9_999, 1),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn downsampler_examples() {
        assert_eq!(downsampler_relative_loss(2, None).unwrap(), Ratio::new(1, 2));
        for n in 1..50 {
            assert_eq!(downsampler_relative_loss(1, Some(n)).unwrap(), Ratio::new(0, 1));
        }
        assert_eq!(downsampler_relative_loss(3, Some(7)).unwrap(), Ratio::new(5, 7));
        assert!(matches!(downsampler_relative_loss(0, None), Err(Error::BadParameter(_))));
        assert!(matches!(downsampler_relative_loss(2, Some(0)), Err(Error::BadParameter(_))));
    }

    #[test]
    fn dimension_profile_invariants() {
        for m in 1..=8 {
            for n in 1..=64 {
                let d = DimensionProfile::downsampler(m, n).unwrap();
                assert!(d.dim_out <= d.dim_in);
                assert_eq!(d.rel_loss_n, Ratio::new(1, 1) - Ratio::new(d.dim_out, d.dim_in));
            }
        }
    }

    #[test]
    fn classification_is_exclusive() {
        let cfg = QuadratureConfig::default();
        let g = iid_gaussian(1.0).unwrap();
        assert_eq!(classify(&magnitude(), &g, &cfg).unwrap(), Regime::FiniteLoss);
        let u2 = iid_uniform(0.0, 2.0).unwrap();
        assert!(matches!(
            classify(&half_constant(), &u2, &cfg).unwrap(),
            Regime::ConstantPieces { mass } if (mass - 0.5).abs() < 1e-9
        ));
        // a constant piece the marginal never visits is harmless
        let f = PiecewiseFunction::new(
            vec![Branch::affine(0.0, 2.0, 1.0, 0.0), Branch::constant(2.0, 3.0, 2.0)],
            FunctionTag::Custom,
        )
        .unwrap();
        assert_eq!(classify(&f, &u2, &cfg).unwrap(), Regime::FiniteLoss);
    }
}
