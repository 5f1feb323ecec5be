//! Relative information loss of an M-fold downsampler, exact as a fraction.

use infoloss::relloss::{downsampler_relative_loss, DimensionProfile};

fn main() -> infoloss::Result<()> {
    for m in [1, 2, 3, 4] {
        let limit = downsampler_relative_loss(m, None)?;
        let blocks: Vec<String> = [1, 2, 5, 7, 10, 100]
            .iter()
            .map(|&n| DimensionProfile::downsampler(m, n).map(|d| format!("n={n}: {}", d.rel_loss_n)))
            .collect::<Result<_, _>>()?;
        println!("M = {m}: limit {limit}; {}", blocks.join(", "));
    }
    Ok(())
}
