//! Cyclic random walk on [-M, M) through |x|. The loss rate is a/M and the
//! branch-entropy bound has a closed form in two regimes.

use infoloss::estimate::{cond_entropy_w_given_x, QuadratureConfig};
use infoloss::lossrate::{loss_rate_analytic, loss_rv};
use infoloss::pbf::magnitude;
use infoloss::process::make_cyclic_walk;

fn main() -> infoloss::Result<()> {
    let cfg = QuadratureConfig::default();
    let f = magnitude();
    let m = 1.0;
    println!("{:>5} {:>8} {:>10} {:>10} {:>6}", "a/M", "rate", "H(W2|X1)", "closed", "L");
    for k in 1..=10 {
        let a = k as f64 / 10.0 * m;
        let p = make_cyclic_walk(m, a)?;
        let closed = if m > 2.0 * a {
            a / (m * std::f64::consts::LN_2)
        } else {
            (m - a) / (m * std::f64::consts::LN_2) + (2.0 * a / m).log2()
        };
        println!(
            "{:>5.1} {:>8.4} {:>10.6} {:>10.6} {:>6.2}",
            a / m,
            loss_rate_analytic(&f, &p, &cfg)?,
            cond_entropy_w_given_x(&f, &p, &cfg)?,
            closed,
            loss_rv(&f, &p, &cfg)?.value,
        );
    }
    Ok(())
}
