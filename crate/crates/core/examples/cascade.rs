//! Loss rates add up along a chain of systems.

use infoloss::estimate::QuadratureConfig;
use infoloss::lossrate::{cascade_loss_rate, CascadeMethod};
use infoloss::pbf::{magnitude, scale, shift_mod};
use infoloss::process::{iid_uniform, make_cyclic_walk};

fn main() -> infoloss::Result<()> {
    let cfg = QuadratureConfig::default();

    let p = make_cyclic_walk(1.0, 0.4)?;
    let r = cascade_loss_rate(&[scale(2.0)?, magnitude(), scale(0.5)?], &p, CascadeMethod::Rate, &cfg)?;
    println!("cyclic walk, 2x -> |x| -> x/2: total {:.6}, stages {:?}", r.total, r.stages);

    let u = iid_uniform(0.0, 4.0)?;
    let stages = [shift_mod(2.0, 0.0, 2)?, shift_mod(1.0, 0.0, 2)?];
    let r = cascade_loss_rate(&stages, &u, CascadeMethod::RandomVariable, &cfg)?;
    println!("uniform [0, 4), fold twice: total {:.6}, stages {:?}, residual {:e}", r.total, r.stages, r.residual);
    Ok(())
}
