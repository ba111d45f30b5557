//! Summary statistics used by the experiments.

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: f64::NAN, n };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Sorts a copy ascending; NaNs last.
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Empirical quantile of a sorted sample (linear interpolation).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Default number of upper order statistics for the Hill estimator.
pub fn hill_k(n: usize) -> usize {
    ((n as f64).powf(0.6).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Hill estimate of the tail index `alpha` in `P(X > x) ~ x^{-alpha}` from the
/// `k` largest observations, with its asymptotic standard error `alpha/sqrt(k)`.
pub fn hill_estimator(xs: &[f64], k: usize) -> (f64, f64) {
    let v = sorted(xs);
    let n = v.len();
    assert!(k >= 1 && k < n, "need 1 <= k < n");
    let threshold = v[n - 1 - k].ln();
    let mean_excess = v[n - k..].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    let alpha = 1.0 / mean_excess;
    (alpha, alpha / (k as f64).sqrt())
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov distance to a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Half-width of the Dvoretzky-Kiefer-Wolfowitz band for `m` samples at level
/// `alpha`.
pub fn dkw_epsilon(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LineFit { slope, intercept, slope_se }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn mean_and_quantiles() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let s = sorted(&[3.0, 1.0, 2.0]);
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert_eq!(quantile(&s, 0.25), 1.5);
    }

    #[test]
    fn hill_on_pareto() {
        let mut r = rng::stream(1, 1);
        let xs: Vec<f64> = (0..200_000).map(|_| rng::open01(&mut r).powf(-2.0)).collect();
        let (a, se) = hill_estimator(&xs, hill_k(xs.len()));
        assert!((a - 0.5).abs() < 4.0 * se, "{a} +- {se}");
    }

    #[test]
    fn ks_distances() {
        let mut r = rng::stream(2, 1);
        let a: Vec<f64> = (0..5000).map(|_| rng::open01(&mut r)).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng::open01(&mut r)).collect();
        assert!(ks_two_sample(&a, &b) < ks_critical(5000, 5000, 0.001));
        assert!(ks_one_sample(&a, |x| x) < 1.95 / (5000f64).sqrt());
        let c: Vec<f64> = b.iter().map(|x| x * 0.8).collect();
        assert!(ks_two_sample(&a, &c) > 0.15);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15);
    }
}
