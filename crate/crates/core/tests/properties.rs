use infoloss::estimate::{default_bins, QuadratureConfig};
use infoloss::lossrate::{bound_prop5, loss_rate_analytic, loss_rv};
use infoloss::lumpability::relative_deviation;
use infoloss::pbf::{magnitude, scale, shift_mod, square, Branch, FunctionTag, PiecewiseFunction, Preimage};
use infoloss::process::{iid_gaussian, make_ar1};
use infoloss::relloss::{downsampler_relative_loss, ratio_to_f64};
use num_rational::Ratio;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Random affine tiling of `[0, n)` with unit cells and non-zero slopes.
fn affine_tiling() -> impl Strategy<Value = PiecewiseFunction> {
    prop::collection::vec((prop_oneof![-3.0..-0.2, 0.2..3.0], -5.0..5.0f64), 1..6).prop_map(|pieces| {
        let branches = pieces
            .iter()
            .enumerate()
            .map(|(k, &(slope, icpt))| Branch::affine(k as f64, k as f64 + 1.0, slope, icpt))
            .collect();
        PiecewiseFunction::new(branches, FunctionTag::Custom).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_preimage_maps_back(f in affine_tiling(), t in 0.0..1.0f64) {
        let (lo, hi) = f.domain();
        let x = lo + t * (hi - lo);
        let y = f.eval(x).unwrap();
        let pre = f.preimage(y);
        prop_assert!(pre.iter().any(|p| p.point().is_some_and(|z| close(z, x, 1e-9))));
        for p in &pre {
            if let Preimage::Point { x: z, .. } = p {
                prop_assert!(close(f.eval(*z).unwrap(), y, 1e-9));
            }
        }
    }

    #[test]
    fn random_tilings_validate(f in affine_tiling()) {
        prop_assert!(f.validate().is_valid());
        let idx: Vec<usize> = f.branches().iter().map(|b| b.index()).collect();
        prop_assert_eq!(idx, (1..=f.branches().len()).collect::<Vec<_>>());
    }

    #[test]
    fn composition_obeys_the_chain_rule(k in prop_oneof![-4.0..-0.25, 0.25..4.0], x in -20.0..20.0f64) {
        let inner = scale(k).unwrap();
        let outer = square();
        let g = PiecewiseFunction::compose(&outer, &inner).unwrap();
        let y = inner.eval(x).unwrap();
        prop_assert!(close(g.eval(x).unwrap(), outer.eval(y).unwrap(), 1e-12));
        let chain = outer.abs_derivative(y).unwrap_or(0.0) * inner.abs_derivative(x).unwrap();
        if x != 0.0 {
            prop_assert!(close(g.abs_derivative(x).unwrap(), chain, 1e-9));
        }
    }

    #[test]
    fn composed_shift_map_agrees_pointwise(x in 0.0..4.0f64) {
        let inner = shift_mod(1.0, 0.0, 4).unwrap();
        let outer = shift_mod(0.5, 0.0, 2).unwrap();
        let g = PiecewiseFunction::compose(&outer, &inner).unwrap();
        let direct = outer.eval(inner.eval(x).unwrap()).unwrap();
        prop_assert!(close(g.eval(x).unwrap(), direct, 1e-12));
        prop_assert_eq!(g.branches().len(), 8);
    }

    #[test]
    fn bijective_maps_lose_nothing(k in prop_oneof![-5.0..-0.1, 0.1..5.0], a in 0.05..0.95f64) {
        let cfg = QuadratureConfig::default();
        let f = scale(k).unwrap();
        let p = make_ar1(a, 1.0).unwrap();
        prop_assert!(loss_rv(&f, &p, &cfg).unwrap().value.abs() <= 1e-9);
        prop_assert!(loss_rate_analytic(&f, &p, &cfg).unwrap().abs() <= 1e-9);
        prop_assert!(bound_prop5(&f, &p, &cfg).unwrap().value.abs() <= 1e-9);
    }

    #[test]
    fn downsampler_converges(m in 1u64..64, n in 1u64..5000) {
        let finite = downsampler_relative_loss(m, Some(n)).unwrap();
        let limit = downsampler_relative_loss(m, None).unwrap();
        let diff = if finite > limit { finite - limit } else { limit - finite };
        prop_assert!(diff <= Ratio::new(1, n));
        let v = ratio_to_f64(finite);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn relative_deviation_is_bounded_and_symmetric(s in 0.0..1e3f64, t in 0.0..1e3f64) {
        let d = relative_deviation(s, t);
        prop_assert_eq!(d, relative_deviation(t, s));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn default_bins_is_the_ceiling_cube_root(n in 1usize..100_000_000) {
        let b = default_bins(n);
        prop_assert!(b.pow(3) >= n);
        prop_assert!(b == 1 || (b - 1).pow(3) < n);
    }
}

#[test]
fn bound_chain_on_builtin_gaussian_processes() {
    let cfg = QuadratureConfig::default();
    let f = magnitude();
    for p in [iid_gaussian(1.0).unwrap(), make_ar1(0.3, 1.0).unwrap(), make_ar1(0.8, 2.0).unwrap()] {
        let rate = loss_rate_analytic(&f, &p, &cfg).unwrap();
        let p5 = bound_prop5(&f, &p, &cfg).unwrap().value;
        let p3 = loss_rv(&f, &p, &cfg).unwrap().value;
        assert!(rate <= p5 + 1e-6, "{}: {rate} > {p5}", p.name());
        assert!(rate <= p3 + 1e-6 && p5 <= p3 + 1e-6);
    }
}
