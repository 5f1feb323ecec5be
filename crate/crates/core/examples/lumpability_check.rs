//! Is the output of a memoryless system still a Markov process? A grid
//! check of the sufficient condition, with witnesses when it fails.

use std::sync::Arc;

use infoloss::lumpability::{check_lumpable, LumpConfig};
use infoloss::pbf::magnitude;
use infoloss::process::{make_ar1, make_markov, Gaussian, GaussianShiftKernel};

fn main() -> infoloss::Result<()> {
    let cfg = LumpConfig::default();
    let ar1 = make_ar1(0.7, 1.0)?;
    let r = check_lumpable(&magnitude(), &ar1, &cfg);
    println!("AR(1): holds = {}, max deviation {:e}", r.condition_holds, r.max_deviation);

    // a drift breaks the symmetry that |x| relies on
    let (a, sigma, offset) = (0.5, 1.0, 0.5);
    let drift = make_markov(
        "ar1 with drift",
        Arc::new(Gaussian::new(offset / (1.0 - a), sigma / (1.0f64 - a * a).sqrt())?),
        Arc::new(GaussianShiftKernel { a, sigma, offset }),
    )?;
    let r = check_lumpable(&magnitude(), &drift, &cfg);
    println!("with drift: holds = {}, max deviation {:.3}", r.condition_holds, r.max_deviation);
    if let Some(w) = r.witnesses.first() {
        println!("  e.g. y1 = {:.3}, y2 = {:.3}: x = {:.3} vs x' = {:.3}", w.y1, w.y2, w.x, w.x_prime);
    }
    Ok(())
}
