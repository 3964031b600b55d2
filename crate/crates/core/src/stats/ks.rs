//! One-sample Kolmogorov-Smirnov machinery for distribution checks.

use statrs::function::erf::erf;

/// Sup-norm distance between the empirical CDF of `sample` and `cdf`.
///
/// Sorts a copy; the caller keeps its data. NaNs in the sample would poison
/// the sort, so they are debug-asserted away.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(sample.iter().all(|x| !x.is_nan()));
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Asymptotic 1% critical value for the one-sample statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        // Phi(1) from Abramowitz & Stegun. The erf behind this is a rational
        // approximation good to ~1e-11, plenty for distribution tests that
        // resolve ~1e-3.
        let phi1 = normal_cdf(1.0, 0.0, 1.0);
        assert!(
            (phi1 - 0.841_344_746_068_542_9).abs() < 1e-9,
            "Phi(1) = {phi1:.18}, delta = {:e}",
            phi1 - 0.841_344_746_068_542_9
        );
        assert!((normal_cdf(3.0, 1.0, 2.0) - normal_cdf(1.0, 0.0, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // sample at the (i + 1/2)/n quantiles of the uniform: D = 1/(2n)
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_wrong_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..5000).map(|_| normal.sample(&mut rng)).collect();
        let d_good = ks_statistic(&xs, |x| normal_cdf(x, 0.0, 1.0));
        let d_bad = ks_statistic(&xs, |x| normal_cdf(x, 0.0, 1.3));
        assert!(d_good < ks_critical_1pct(xs.len()), "d_good = {d_good}");
        assert!(d_bad > ks_critical_1pct(xs.len()), "d_bad = {d_bad}");
    }
}
