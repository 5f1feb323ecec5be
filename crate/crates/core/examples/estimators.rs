//! The histogram and quadrature estimators on cases with known answers.

use infoloss::estimate::{diff_entropy_hist, mutual_information_hist, quad, QuadratureConfig};
use infoloss::process::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> infoloss::Result<()> {
    let n = 1_000_000;
    let mut rng = stream_rng(1, 0);
    for rho in [0.3f64, 0.6, 0.9] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                (x, rho * x + (1.0 - rho * rho).sqrt() * z)
            })
            .unzip();
        let est = mutual_information_hist(&xs, &ys, 100)?;
        println!("rho {rho}: MI {est:.4} bits, exact {:.4}", -0.5 * (1.0 - rho * rho).log2());
    }
    let us: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>()).collect();
    println!("h(U[0,4)) = {:.4} bits, exact 2", diff_entropy_hist(&us, 100)?);

    let v = quad(|x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 }, 0.0, 1.0, &QuadratureConfig::default())?;
    println!("integral of -x log2 x over [0,1] = {v:.12}, exact {:.12}", 0.25 / std::f64::consts::LN_2);
    Ok(())
}
