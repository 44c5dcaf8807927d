//! Sample statistics used by the Monte Carlo checks.

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    (m, (variance(xs) / n).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Relative size of summation rounding below which a standard error is treated as zero.
pub const ROUNDING_FLOOR: f64 = 1e-12;

/// `|diff| / se`, with `se` floored at rounding level relative to `scale`.
///
/// Averaging identical values leaves a standard error made of rounding noise;
/// without the floor that noise turns an exact agreement into a huge z.
pub fn z_score(diff: f64, se: f64, scale: f64) -> f64 {
    let se = se.max(ROUNDING_FLOOR * scale.abs());
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Median (mean of the two central order statistics for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample variance together with its standard error `sqrt(Var[(X-m)²]/n)`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let (v, se) = mean_se(&sq);
    let n = xs.len() as f64;
    (v * n / (n - 1.0), se)
}

/// Sample covariance together with the standard error of the product mean.
pub fn covariance_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(xs), mean(ys));
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let (c, se) = mean_se(&prods);
    let n = xs.len() as f64;
    (c * n / (n - 1.0), se)
}

/// Pearson correlation; its standard error under independence is `1/√n`.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let c = covariance(xs, ys);
    let (vx, vy) = (variance(xs), variance(ys));
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    c / (vx * vy).sqrt()
}

/// Standard error of a sample correlation `r` at sample size `n`.
pub fn correlation_se(r: f64, n: usize) -> f64 {
    ((1.0 - r * r).max(0.0) / (n as f64 - 2.0).max(1.0)).sqrt()
}

/// Sample skewness and excess kurtosis (population-moment estimators).
pub fn skew_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Jarque–Bera statistic; asymptotically χ² with two degrees of freedom.
pub fn jarque_bera(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (s, k) = skew_kurtosis(xs);
    n / 6.0 * (s * s + 0.25 * k * k)
}

/// 1% critical value of χ²₂.
pub const JARQUE_BERA_CRIT_1PCT: f64 = 9.210_340_371_976_184;

/// Kolmogorov–Smirnov statistic of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    #[test]
    fn z_score_ignores_rounding_noise() {
        assert_eq!(super::z_score(1e-16, 1e-17, 1.0), 1e-4);
        assert_eq!(super::z_score(0.3, 0.1, 1.0), 2.9999999999999996);
        assert_eq!(super::z_score(0.0, 0.0, 0.0), 0.0);
        assert!(super::z_score(1.0, 0.0, 0.0).is_infinite());
    }

    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(mean(&xs), 2.5);
        assert_abs_diff_eq!(variance(&xs), 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(correlation(&xs, &[2.0, 4.0, 6.0, 8.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(correlation(&xs, &[8.0, 6.0, 4.0, 2.0]), -1.0, epsilon = 1e-15);
        let (s, _) = skew_kurtosis(&xs);
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_of_uniform_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic(&xs, |x| x) <= 0.0005 + 1e-12);
    }
}
