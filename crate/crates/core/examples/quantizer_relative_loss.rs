//! Functions with constant pieces destroy a fixed fraction of the
//! information: the probability of landing on a constant piece.

use infoloss::estimate::QuadratureConfig;
use infoloss::lossrate::loss_rv;
use infoloss::pbf::{quantizer, Branch, FunctionTag, PiecewiseFunction};
use infoloss::process::{iid_gaussian, iid_uniform};
use infoloss::relloss::{empirical_constant_frequency, relative_loss_rate_constant_pieces};

fn main() -> infoloss::Result<()> {
    let cfg = QuadratureConfig::default();

    let q = quantizer(&[-50.0, -1.0, 0.0, 1.0, 50.0])?;
    let g = iid_gaussian(1.0)?;
    println!("quantizer on N(0,1): relative loss {}", relative_loss_rate_constant_pieces(&q, &g, &cfg)?);
    println!("absolute loss: {}", loss_rv(&q, &g, &cfg).unwrap_err());

    // clip to zero below 1, keep the rest
    let clip = PiecewiseFunction::new(
        vec![Branch::constant(0.0, 1.0, 0.0), Branch::affine(1.0, 3.0, 1.0, 0.0)],
        FunctionTag::Custom,
    )?;
    let u = iid_uniform(0.0, 3.0)?;
    let exact = relative_loss_rate_constant_pieces(&clip, &u, &cfg)?;
    let freq = empirical_constant_frequency(&clip, &u, 1_000_000, 42)?;
    println!("clip on U[0,3): relative loss {exact:.6}, sampled {freq:.6}");
    Ok(())
}
