//! A process on [0, 4) that alternates between [0, 2) and [2, 4), folded onto
//! [0, 2). Every upper bound on the loss rate is attained.

use infoloss::estimate::{cond_diff_entropy_x2_given_x1, cond_entropy_w_given_x, QuadratureConfig};
use infoloss::lossrate::{loss_rate_analytic, loss_rv};
use infoloss::lumpability::{analyze_lumpability, LumpConfig};
use infoloss::pbf::shift_mod;
use infoloss::process::make_tightness_example;

fn main() -> infoloss::Result<()> {
    let cfg = QuadratureConfig::default();
    let p = make_tightness_example();
    let f = shift_mod(2.0, 0.0, 2)?;
    println!("h(X)      = {}", p.analytic().map_or(f64::NAN, |a| a.h_marginal));
    println!("h(X2|X1)  = {}", cond_diff_entropy_x2_given_x1(&p, &cfg)?);
    println!("L         = {}", loss_rv(&f, &p, &cfg)?.value);
    println!("rate      = {}", loss_rate_analytic(&f, &p, &cfg)?);
    println!("H(W2|X1)  = {}", cond_entropy_w_given_x(&f, &p, &cfg)?);
    let r = analyze_lumpability(&f, &p, &LumpConfig::default(), &cfg)?;
    println!("Markov output: {}", r.condition_holds);
    println!("equal per-branch terms: {:?}", r.tightness_a.map(|c| c.holds));
    println!("equal branch probabilities: {:?}", r.tightness_b.map(|c| c.holds));
    Ok(())
}
