//! Plug-in histogram estimators of differential entropy and mutual information.

use crate::error::{Error, Result};

/// Minimum sample count accepted by the histogram estimators.
pub const MIN_SAMPLES: usize = 1_000;

/// Default bin count `⌈N^{1/3}⌉`.
pub fn default_bins(n: usize) -> usize {
    let mut b = (n as f64).cbrt().round() as usize;
    while b.pow(3) < n {
        b += 1;
    }
    while b > 1 && (b - 1).pow(3) >= n {
        b -= 1;
    }
    b.max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram1D {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram1D {
    /// `bins` equal-width cells over `[min, max]` of the data.
    pub fn equal_width(samples: &[f64], bins: usize) -> Result<Self> {
        let (lo, hi) = finite_bounds(samples)?;
        let bins = bins.max(1);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let mut edges: Vec<f64> = (0..=bins)
            .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
            .collect();
        edges[bins] = hi.next_up();
        Ok(Self::from_edges(samples, edges))
    }

    /// Cells with (approximately) equal occupancy, from empirical quantiles.
    pub fn quantile(samples: &[f64], bins: usize) -> Result<Self> {
        Ok(Self::from_edges(samples, quantile_edges(samples, bins)?))
    }

    /// Counts `samples` into `[edges[k], edges[k+1])`; values outside are dropped.
    pub fn from_edges(samples: &[f64], edges: Vec<f64>) -> Self {
        let mut counts = vec![0u64; edges.len().saturating_sub(1)];
        let mut total = 0;
        for &x in samples {
            if let Some(k) = bin_of(&edges, x) {
                counts[k] += 1;
                total += 1;
            }
        }
        Histogram1D { edges, counts, total }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `-Σ p_i log2(p_i / Δ_i)` over occupied cells.
    pub fn differential_entropy(&self) -> f64 {
        let n = self.total as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .filter(|(&c, _)| c > 0)
            .map(|(&c, w)| {
                let p = c as f64 / n;
                -p * (p / (w[1] - w[0])).log2()
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram2D {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
    /// Row-major, `x` index outer.
    counts: Vec<u64>,
    total: u64,
}

impl Histogram2D {
    pub fn from_pairs(xs: &[f64], ys: &[f64], x_edges: Vec<f64>, y_edges: Vec<f64>) -> Self {
        let nx = x_edges.len() - 1;
        let ny = y_edges.len() - 1;
        let mut counts = vec![0u64; nx * ny];
        let mut total = 0;
        for (&x, &y) in xs.iter().zip(ys) {
            if let (Some(i), Some(j)) = (bin_of(&x_edges, x), bin_of(&y_edges, y)) {
                counts[i * ny + j] += 1;
                total += 1;
            }
        }
        Histogram2D {
            x_edges,
            y_edges,
            counts,
            total,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_edges.len() - 1, self.y_edges.len() - 1)
    }

    /// Plug-in mutual information of the cell occupancies, in bits.
    pub fn mutual_information(&self) -> f64 {
        let (nx, ny) = self.shape();
        let n = self.total as f64;
        let rows: Vec<&[u64]> = self.counts.chunks(ny).collect();
        let px: Vec<f64> = rows.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let py: Vec<f64> = (0..ny).map(|j| rows.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
        debug_assert_eq!(px.len(), nx);
        let mut mi = 0.0;
        for (row, &pi) in rows.iter().zip(&px) {
            for (&c, &pj) in row.iter().zip(&py) {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (c * n / (pi * pj)).log2();
                }
            }
        }
        mi
    }
}

fn finite_bounds(samples: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in samples.iter().filter(|x| x.is_finite()) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo > hi {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok((lo, hi))
}

fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(x >= edges[0] && x < last) {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Strictly increasing edges at the empirical `k/bins` quantiles; ties
/// collapse cells, so fewer than `bins` cells may result.
pub fn quantile_edges(samples: &[f64], bins: usize) -> Result<Vec<f64>> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    if sorted.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let bins = bins.max(1);
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(sorted[0]);
    for k in 1..bins {
        edges.push(sorted[k * n / bins]);
    }
    edges.push(sorted[n - 1].next_up());
    edges.dedup();
    if edges.len() < 2 {
        edges.push(edges[0].next_up());
    }
    Ok(edges)
}

fn check_count(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    Ok(())
}

/// Plug-in differential entropy (bits) with `bins` equal-width cells.
pub fn diff_entropy_hist(samples: &[f64], bins: usize) -> Result<f64> {
    check_count(samples.len())?;
    Ok(Histogram1D::equal_width(samples, bins)?.differential_entropy())
}

/// Plug-in mutual information (bits) on a `bins × bins` grid with
/// marginal-quantile edges.
pub fn mutual_information_hist(xs: &[f64], ys: &[f64], bins: usize) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::BadParameter(format!(
            "paired samples differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    check_count(xs.len())?;
    let xe = quantile_edges(xs, bins)?;
    let ye = quantile_edges(ys, bins)?;
    Ok(Histogram2D::from_pairs(xs, ys, xe, ye).mutual_information())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{gaussian_entropy, stream_rng};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn uniforms(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
    }

    #[test]
    fn default_bin_rule() {
        assert_eq!(default_bins(1_000_000), 100);
        assert_eq!(default_bins(1_000_001), 101);
        assert_eq!(default_bins(1000), 10);
        assert_eq!(default_bins(9), 3);
        assert_eq!(default_bins(1), 1);
    }

    #[test]
    fn entropy_of_gaussian() {
        let n = 1_000_000;
        let h = diff_entropy_hist(&normals(n, 1), default_bins(n)).unwrap();
        assert!((h - gaussian_entropy(1.0)).abs() < 0.02, "h = {h}");
    }

    #[test]
    fn entropy_of_uniforms() {
        let n = 1_000_000;
        let h = diff_entropy_hist(&uniforms(n, 0.0, 1.0, 2), 100).unwrap();
        assert!(h.abs() < 0.02, "h = {h}");
        let h = diff_entropy_hist(&uniforms(n, 0.0, 4.0, 3), 100).unwrap();
        assert!((h - 2.0).abs() < 0.02, "h = {h}");
    }

    #[test]
    fn mi_of_independent_pairs() {
        let n = 1_000_000;
        let mi = mutual_information_hist(&normals(n, 4), &normals(n, 5), 100).unwrap();
        assert!(mi.abs() < 0.02, "mi = {mi}");
        assert!(mi >= -0.005);
    }

    #[test]
    fn mi_of_identical_uniform_quantized_values() {
        // Y = X on 4 equiprobable values gives exactly 2 bits with 4 bins
        let xs: Vec<f64> = (0..4000).map(|k| (k % 4) as f64).collect();
        let mi = mutual_information_hist(&xs, &xs, 4).unwrap();
        assert!((mi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let xs = vec![0.0; 999];
        assert!(matches!(diff_entropy_hist(&xs, 10), Err(Error::TooFewSamples { .. })));
        assert!(matches!(
            mutual_information_hist(&xs, &xs, 10),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn histogram_counts_sum_to_total() {
        let xs = uniforms(5000, -1.0, 1.0, 9);
        let h = Histogram1D::quantile(&xs, 17).unwrap();
        assert_eq!(h.counts().iter().sum::<u64>(), h.total());
        assert_eq!(h.total(), 5000);
        assert!(h.edges().windows(2).all(|w| w[0] < w[1]));
    }
}
