//! AR(1) process through |x|: how the loss rate falls as the pole grows.
//!
//! Run with `cargo run --release --example ar1_magnitude`.

use infoloss::estimate::{cond_entropy_w_given_x, QuadratureConfig};
use infoloss::lossrate::{loss_rate_analytic, loss_rate_bounds_mc};
use infoloss::pbf::magnitude;
use infoloss::process::make_ar1;

fn main() -> infoloss::Result<()> {
    let cfg = QuadratureConfig::default();
    let f = magnitude();
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "a", "rate", "lower", "upper", "H(W2|X1)");
    for k in 1..=9 {
        let a = k as f64 / 10.0;
        let p = make_ar1(a, 1.0)?;
        let rate = loss_rate_analytic(&f, &p, &cfg)?;
        let s = loss_rate_bounds_mc(&f, &p, 1_000_000, 42, 100, &cfg)?;
        let hw = cond_entropy_w_given_x(&f, &p, &cfg)?;
        println!("{a:>4.1} {rate:>10.4} {:>10.4} {:>10.4} {hw:>10.4}", s.lower, s.upper);
    }
    Ok(())
}
