use crate::{Error, Result};

/// Right-continuous empirical CDF of sorted samples at `x`.
pub fn empirical_cdf(samples_sorted: &[f64], x: f64) -> f64 {
    samples_sorted.partition_point(|&s| s <= x) as f64 / samples_sorted.len() as f64
}

/// `int |F_emp - F_ref| dx` by the trapezoid rule on `grid`.
///
/// `grid` must be increasing; the integral is truncated to its range.
pub fn wasserstein1_1d(samples_sorted: &[f64], cdf: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    if samples_sorted.is_empty() {
        return Err(Error::invalid("samples", "empty"));
    }
    if samples_sorted.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("samples", "must be sorted ascending"));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("grid", "needs at least two strictly increasing points"));
    }
    let gap = |x: f64| (empirical_cdf(samples_sorted, x) - cdf(x)).abs();
    let mut prev = gap(grid[0]);
    let mut total = 0.0;
    for w in grid.windows(2) {
        let next = gap(w[1]);
        total += 0.5 * (prev + next) * (w[1] - w[0]);
        prev = next;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamKey};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn grid(a: f64, b: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect()
    }

    #[test]
    fn identical_cdfs() {
        let s = [0.0, 1.0, 2.0];
        let d = wasserstein1_1d(&s, |x| empirical_cdf(&s, x), &grid(-1.0, 3.0, 400)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn unit_shift_of_point_mass() {
        let g = grid(-1.0, 2.0, 3000);
        let d = wasserstein1_1d(&[0.0], |x| if x >= 1.0 { 1.0 } else { 0.0 }, &g).unwrap();
        assert!((d - 1.0).abs() <= 1e-3, "{d}");
    }

    #[test]
    fn gaussian_samples_against_exact_cdf() {
        let mut rng = StreamKey::new(8).stream(Purpose::Sampling, 0, 0);
        let mut s: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        s.sort_by(f64::total_cmp);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let d = wasserstein1_1d(&s, |x| normal.cdf(x), &grid(-8.0, 8.0, 16_000)).unwrap();
        assert!(d <= 0.01, "{d}");
    }

    #[test]
    fn rejects_unsorted() {
        assert!(wasserstein1_1d(&[1.0, 0.0], |_| 0.5, &[0.0, 1.0]).is_err());
    }
}
