use super::descriptive::{describe, quantile};
use super::special::normal_pdf;
use super::StatsError;

/// Silverman's rule: 0.9 · min(σ̂, IQR / 1.34) · n^(−1/5). Falls back to σ̂
/// when the interquartile range is zero.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, StatsError> {
    let d = describe(samples)?;
    if !(d.std > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let iqr = quantile(samples, 0.75) - quantile(samples, 0.25);
    let spread = if iqr > 0.0 { d.std.min(iqr / 1.34) } else { d.std };
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// Gaussian kernel density of `samples` evaluated at each grid point.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>, StatsError> {
    let h = silverman_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h);
    Ok(grid
        .iter()
        .map(|&x| samples.iter().map(|&s| normal_pdf((x - s) / h)).sum::<f64>() * norm)
        .collect())
}

/// `points` evenly spaced values covering every sample with a margin of
/// four bandwidths.
pub fn kde_grid(samples: &[&[f64]], points: usize) -> Result<Vec<f64>, StatsError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut h_max: f64 = 0.0;
    for s in samples {
        h_max = h_max.max(silverman_bandwidth(s)?);
        for &v in *s {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let (a, b) = (lo - 4.0 * h_max, hi + 4.0 * h_max);
    Ok((0..points).map(|i| a + (b - a) * i as f64 / (points - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr_free::normal_sample;

    /// Box-Muller draws, kept local to avoid an extra dependency.
    mod rand_distr_free {
        use rand::Rng;
        pub fn normal_sample<R: Rng>(rng: &mut R, n: usize, mu: f64, sigma: f64) -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    mu + sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        }
    }

    fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2).zip(y.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0).sum()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn single_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = normal_sample(&mut rng, 100, 0.0, 1.0);
        let grid = linspace(-8.0, 8.0, 2001);
        let d = kde(&s, &grid).unwrap();
        assert!((trapezoid(&grid, &d) - 1.0).abs() < 1e-3);
        let peak = grid[d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert!(peak.abs() < 0.5, "peak at {peak}");
        assert!(d.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn symmetric_sample_gives_symmetric_density() {
        let s = [-3.0, -1.0, -0.5, 0.5, 1.0, 3.0];
        let grid = linspace(-5.0, 5.0, 101);
        let d = kde(&s, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((d[i] - d[grid.len() - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn bimodal_sample_has_two_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = normal_sample(&mut rng, 50, -5.0, 1.0);
        s.extend(normal_sample(&mut rng, 50, 5.0, 1.0));
        let grid = linspace(-12.0, 12.0, 1201);
        let d = kde(&s, &grid).unwrap();
        let modes = d.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count();
        assert_eq!(modes, 2);
    }

    #[test]
    fn bandwidth_rules() {
        assert_eq!(silverman_bandwidth(&[2.0, 2.0, 2.0]), Err(StatsError::ZeroVariance));
        // IQR of (0, 0, 0, 0, 10) is 0, so σ̂ is used.
        let s = [0.0, 0.0, 0.0, 0.0, 10.0];
        let sd = describe(&s).unwrap().std;
        assert!((silverman_bandwidth(&s).unwrap() - 0.9 * sd * 5f64.powf(-0.2)).abs() < 1e-12);
    }
}
