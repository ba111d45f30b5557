//! Constants of the limit law: Kesten, Iglehart, Feller, the meander moment
//! and the resulting scale parameters.
//!
//! For Beta laws the Kesten constant has the closed form
//! `C_K = 1 / ((alpha - beta) B(beta, alpha - beta))`; the perpetuity
//! `R = sum_{k>=0} rho_0 ... rho_k` then satisfies `P(R > t) = C_K t^{-kappa} (1 + o(1))`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::env_model::{log_rho, EnvironmentLaw, OmegaSampler};
use crate::rng;
use crate::special::{digamma, ln_beta};
use crate::stats::{hill_estimator, hill_k, mean_se, sorted};
use crate::{Error, Result};

/// Largest number of steps allowed in one simulated excursion.
pub const EXCURSION_STEP_CAP: u64 = 100_000_000;
/// Perpetuity terms are added until the relative increment drops below this.
pub const SERIES_REL_TOL: f64 = 1e-12;
/// Maximal number of perpetuity terms.
pub const SERIES_MAX_TERMS: usize = 100_000;

const CHUNK: usize = 10_000;

/// `C_K` for Beta(alpha, beta) with `0 < alpha - beta < 1`.
pub fn kesten_constant_beta(alpha: f64, beta: f64) -> Result<f64> {
    let kappa = alpha - beta;
    if !(kappa > 0.0 && kappa < 1.0 && beta > 0.0) {
        return Err(Error::Regime(format!("alpha - beta = {kappa} is not in (0, 1)")));
    }
    Ok(1.0 / (kappa * ln_beta(beta, kappa).exp()))
}

/// Statistics of one ladder excursion `0 -> e_1` of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionSample {
    /// `e_1`.
    pub length: u64,
    /// `V(e_1) <= 0`.
    pub end_value: f64,
    /// `max_{0 <= k <= e_1} V(k)`.
    pub height: f64,
}

pub fn simulate_excursion<R: Rng + ?Sized>(sampler: &OmegaSampler, rng: &mut R) -> Result<ExcursionSample> {
    let mut v = 0.0f64;
    let mut top = 0.0f64;
    let mut k = 0u64;
    loop {
        v += log_rho(sampler.sample(rng));
        k += 1;
        if v <= 0.0 {
            return Ok(ExcursionSample { length: k, end_value: v, height: top });
        }
        top = top.max(v);
        if k >= EXCURSION_STEP_CAP {
            return Err(Error::BudgetExhausted(format!("excursion longer than {EXCURSION_STEP_CAP} steps")));
        }
    }
}

/// `count` independent excursions, reproducible for any thread count.
pub fn simulate_excursions(law: &EnvironmentLaw, count: usize, seed: u64) -> Result<Vec<ExcursionSample>> {
    let sampler = law.sampler();
    let key = rng::derive_seed(&[seed, rng::tag("excursions")]);
    let chunks: Vec<Result<Vec<ExcursionSample>>> = (0..count.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(key, c as u64);
            let m = CHUNK.min(count - c * CHUNK);
            (0..m).map(|_| simulate_excursion(&sampler, &mut r)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IglehartEstimate {
    pub kappa: f64,
    /// `E[rho^kappa ln rho]`.
    pub moment: f64,
    pub mean_ladder: f64,
    pub mean_ladder_se: f64,
    /// `E[e^{kappa V(e_1)}]`.
    pub mean_exp_end: f64,
    pub mean_exp_end_se: f64,
    pub c_i: f64,
    pub c_i_se: f64,
    pub c_f: f64,
    pub c_f_se: f64,
    /// Excursion heights, in simulation order.
    pub heights: Vec<f64>,
}

/// `C_I = (1 - E[e^{kappa V(e_1)}])^2 / (kappa E[rho^kappa ln rho] E[e_1])`
/// from simulated excursions, with delta-method standard errors, and
/// `C_F = C_I / (1 - E[e^{kappa V(e_1)}])`.
pub fn iglehart_estimate(law: &EnvironmentLaw, kappa: f64, moment: f64, n_excursions: usize, seed: u64) -> Result<IglehartEstimate> {
    if n_excursions < 2 {
        return Err(Error::Domain("need at least two excursions".into()));
    }
    let ex = simulate_excursions(law, n_excursions, seed)?;
    let lens: Vec<f64> = ex.iter().map(|e| e.length as f64).collect();
    let ends: Vec<f64> = ex.iter().map(|e| (kappa * e.end_value).exp()).collect();
    let l = mean_se(&lens);
    let a = mean_se(&ends);
    let n = ex.len() as f64;
    let cov = lens.iter().zip(&ends).map(|(x, y)| (x - l.mean) * (y - a.mean)).sum::<f64>() / (n - 1.0) / n;
    let one_minus = 1.0 - a.mean;
    let c_i = one_minus * one_minus / (kappa * moment * l.mean);
    let c_f = c_i / one_minus;
    // gradients with respect to (A, L)
    let (gi_a, gi_l) = (-2.0 * one_minus / (kappa * moment * l.mean), -c_i / l.mean);
    let (gf_a, gf_l) = (-1.0 / (kappa * moment * l.mean), -c_f / l.mean);
    let var = |ga: f64, gl: f64| ga * ga * a.se * a.se + gl * gl * l.se * l.se + 2.0 * ga * gl * cov;
    Ok(IglehartEstimate {
        kappa,
        moment,
        mean_ladder: l.mean,
        mean_ladder_se: l.se,
        mean_exp_end: a.mean,
        mean_exp_end_se: a.se,
        c_i,
        c_i_se: var(gi_a, gi_l).max(0.0).sqrt(),
        c_f,
        c_f_se: var(gf_a, gf_l).max(0.0).sqrt(),
        heights: ex.iter().map(|e| e.height).collect(),
    })
}

/// `e^{kappa h} P(H >= h)` with its binomial standard error at each `h`.
pub fn height_tail_census(heights: &[f64], kappa: f64, grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let v = sorted(heights);
    let n = v.len() as f64;
    grid.iter()
        .map(|&h| {
            let below = v.partition_point(|&x| x < h);
            let p = (v.len() - below) as f64 / n;
            let scale = (kappa * h).exp();
            (h, scale * p, scale * (p * (1.0 - p) / n).sqrt())
        })
        .collect()
}

/// Monte Carlo estimate of `q = P(H >= h)` for one excursion, with its
/// standard error.
pub fn height_probability(law: &EnvironmentLaw, h: f64, n_excursions: usize, seed: u64) -> Result<(f64, f64)> {
    let sampler = law.sampler();
    let key = rng::derive_seed(&[seed, rng::tag("height-probability")]);
    let counts: Vec<Result<u64>> = (0..n_excursions.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(key, c as u64);
            let m = CHUNK.min(n_excursions - c * CHUNK);
            let mut hits = 0;
            for _ in 0..m {
                hits += (simulate_excursion(&sampler, &mut r)?.height >= h) as u64;
            }
            Ok(hits)
        })
        .collect();
    let mut hits = 0u64;
    for c in counts {
        hits += c?;
    }
    let n = n_excursions as f64;
    let q = hits as f64 / n;
    Ok((q, (q * (1.0 - q) / n).sqrt()))
}

/// `q = P(H >= h)` by importance sampling under the law tilted by
/// `rho^kappa`, where the potential drifts upwards: `q = E_tilt[e^{-kappa V(T)}; V(T) >= h]`
/// with `T` the exit time of `(0, h)`.
pub fn height_probability_tilted(law: &EnvironmentLaw, kappa: f64, h: f64, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("height {h} must be positive")));
    }
    if n_samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let sampler = law.tilted(kappa)?.sampler();
    let key = rng::derive_seed(&[seed, rng::tag("tilted-height")]);
    let weights: Vec<f64> = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(key, c as u64);
            let m = CHUNK.min(n_samples - c * CHUNK);
            let sampler = &sampler;
            (0..m)
                .map(move |_| {
                    let mut v = 0.0f64;
                    loop {
                        v += log_rho(sampler.sample(&mut r));
                        if v <= 0.0 {
                            return 0.0;
                        }
                        if v >= h {
                            return (-kappa * v).exp();
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let m = mean_se(&weights);
    Ok((m.mean, m.se))
}

/// `sup_{k >= 0} V(k)`, stopping once `V` is `margin` below its running
/// maximum.
pub fn simulate_supremum<R: Rng + ?Sized>(sampler: &OmegaSampler, rng: &mut R, margin: f64) -> f64 {
    let mut v = 0.0f64;
    let mut top = 0.0f64;
    while v > top - margin {
        v += log_rho(sampler.sample(rng));
        top = top.max(v);
    }
    top
}

/// Estimated power tail of a positive sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    /// Mean of `x^kappa P(R > x)` over the fit window.
    pub constant: f64,
    /// Poisson-bootstrap standard error of `constant`.
    pub constant_se: f64,
    /// Hill estimate of the tail index.
    pub index: f64,
    pub index_se: f64,
    /// Number of order statistics used by the Hill estimator.
    pub hill_k: usize,
    /// Fit window `[x_lo, x_hi]`.
    pub window: (f64, f64),
    /// Number of perpetuities that hit the term cap.
    pub truncated: usize,
}

/// One draw of the perpetuity `R = sum_{k>=0} rho_0 ... rho_k`; the flag is
/// set when the term cap is hit.
pub fn sample_perpetuity<R: Rng + ?Sized>(sampler: &OmegaSampler, rng: &mut R) -> (f64, bool) {
    let mut prod = 1.0f64;
    let mut sum = 0.0f64;
    for _ in 0..SERIES_MAX_TERMS {
        prod *= crate::env_model::rho(sampler.sample(rng));
        sum += prod;
        if prod < SERIES_REL_TOL * sum {
            return (sum, false);
        }
    }
    (sum, true)
}

/// Simulate `n_series` perpetuities and fit their tail.
///
/// The constant is the average of `x^kappa P(R > x)` over 64 log-spaced
/// points from the 99.9th percentile up to the largest `x` with at least 200
/// exceedances.
pub fn kesten_tail_estimate(law: &EnvironmentLaw, kappa: f64, n_series: usize, seed: u64) -> Result<TailEstimate> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Regime(format!("kappa = {kappa} is not in (0, 1)")));
    }
    if n_series < 200_000 {
        return Err(Error::Domain(format!("{n_series} series are too few for a tail window")));
    }
    let sampler = law.sampler();
    let key = rng::derive_seed(&[seed, rng::tag("perpetuity")]);
    let chunks: Vec<(Vec<f64>, usize)> = (0..n_series.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(key, c as u64);
            let m = CHUNK.min(n_series - c * CHUNK);
            let mut trunc = 0;
            let v = (0..m)
                .map(|_| {
                    let (x, t) = sample_perpetuity(&sampler, &mut r);
                    trunc += t as usize;
                    x
                })
                .collect();
            (v, trunc)
        })
        .collect();
    let truncated = chunks.iter().map(|c| c.1).sum();
    let mut all: Vec<f64> = chunks.into_iter().flat_map(|c| c.0).collect();
    let (index, index_se) = hill_estimator(&all, hill_k(all.len()));
    all.sort_by(|a, b| a.total_cmp(b));
    let n = all.len();
    let x_lo = all[((n as f64) * 0.999) as usize];
    let x_hi = all[n - 201];
    if !(x_hi > x_lo) {
        return Err(Error::Domain("empty tail window".into()));
    }
    const GRID: usize = 64;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| (x_lo.ln() + (x_hi / x_lo).ln() * i as f64 / (GRID - 1) as f64).exp())
        .collect();
    // tail values above x_lo and the index of the first tail value above each grid point
    let first = all.partition_point(|&x| x <= x_lo);
    let tail = &all[first..];
    let pos: Vec<usize> = grid.iter().map(|&x| tail.partition_point(|&y| y <= x)).collect();
    let estimate = |weights: Option<&[f64]>| -> f64 {
        let suffix: Vec<f64> = match weights {
            None => (0..=tail.len()).map(|i| (tail.len() - i) as f64).collect(),
            Some(w) => {
                let mut s = vec![0.0; tail.len() + 1];
                for i in (0..tail.len()).rev() {
                    s[i] = s[i + 1] + w[i];
                }
                s
            }
        };
        grid.iter().zip(&pos).map(|(&x, &p)| x.powf(kappa) * suffix[p] / n as f64).sum::<f64>() / GRID as f64
    };
    let constant = estimate(None);
    let mut br = rng::stream(key, u64::MAX);
    let pois = Poisson::new(1.0).unwrap();
    let boots: Vec<f64> = (0..200)
        .map(|_| {
            let w: Vec<f64> = (0..tail.len()).map(|_| pois.sample(&mut br)).collect();
            estimate(Some(&w))
        })
        .collect();
    Ok(TailEstimate {
        constant,
        constant_se: mean_se(&boots).se * (boots.len() as f64).sqrt(),
        index,
        index_se,
        hill_k: hill_k(n),
        window: (x_lo, x_hi),
        truncated,
    })
}

/// `C_F = C_I / (1 - E[e^{kappa V(e_1)}])`.
pub fn feller_constant(c_i: f64, mean_exp_end: f64) -> f64 {
    c_i / (1.0 - mean_exp_end)
}

/// `E[M^kappa] = C_K / C_F`.
pub fn meander_moment(c_k: f64, c_f: f64) -> Result<f64> {
    if !(c_k > 0.0 && c_f > 0.0) {
        return Err(Error::Domain("constants must be positive".into()));
    }
    Ok(c_k / c_f)
}

/// `C_U = C_I E[M^kappa]`.
pub fn c_u(c_i: f64, meander: f64) -> f64 {
    c_i * meander
}

/// Scale parameters of the limit laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLawParams {
    pub kappa: f64,
    pub c_k: f64,
    pub moment: f64,
    /// `Lambda* = 2^kappa (pi kappa^2 / sin(pi kappa)) C_K^2 E[rho^kappa ln rho]`:
    /// `tau(n) / n^{1/kappa}` has Laplace transform `exp(-Lambda* lambda^kappa)`.
    pub lambda_scale: f64,
    /// `Lambda*^{1/kappa}`: `tau(n) / n^{1/kappa} -> tau_prefactor * S`.
    pub tau_prefactor: f64,
    /// `1 / Lambda*`: `X_n / n^kappa -> x_scale * S^{-kappa}`.
    pub x_scale: f64,
}

pub fn limit_scale(kappa: f64, c_k: f64, moment: f64) -> Result<LimitLawParams> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Regime(format!("kappa = {kappa} is not in (0, 1)")));
    }
    if !(c_k > 0.0 && moment > 0.0) {
        return Err(Error::Domain("C_K and the moment must be positive".into()));
    }
    let inner = PI * kappa * kappa / (PI * kappa).sin() * c_k * c_k * moment;
    let lambda_scale = 2f64.powf(kappa) * inner;
    Ok(LimitLawParams {
        kappa,
        c_k,
        moment,
        lambda_scale,
        tau_prefactor: 2.0 * inner.powf(1.0 / kappa),
        x_scale: 1.0 / lambda_scale,
    })
}

/// `Lambda*` for Beta(alpha, beta) written directly in the parameters:
/// `2^kappa (pi / sin(pi kappa)) (psi(alpha) - psi(beta)) / B(beta, kappa)^2`.
pub fn beta_law_scale(alpha: f64, beta: f64) -> Result<f64> {
    let kappa = alpha - beta;
    if !(kappa > 0.0 && kappa < 1.0 && beta > 0.0) {
        return Err(Error::Regime(format!("alpha - beta = {kappa} is not in (0, 1)")));
    }
    Ok(2f64.powf(kappa) * PI / (PI * kappa).sin() * (digamma(alpha) - digamma(beta))
        / (2.0 * ln_beta(beta, kappa)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{kappa_solve, moment_rho_log};
    use proptest::prelude::*;

    fn beta(a: f64, b: f64) -> EnvironmentLaw {
        EnvironmentLaw::beta(a, b).unwrap()
    }

    #[test]
    fn kesten_closed_form_values() {
        // 40-digit reference values of 1 / ((a - b) B(b, a - b))
        assert!((kesten_constant_beta(1.5, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((kesten_constant_beta(2.0, 1.5).unwrap() - 1.273_239_544_735_162_7).abs() < 1e-13);
        assert!((kesten_constant_beta(1.2, 1.1).unwrap() - 1.014_474_548_779_262_9).abs() < 1e-9);
        assert!(kesten_constant_beta(1.0, 1.5).is_err());
    }

    #[test]
    fn perpetuity_tail_beta_1_5() {
        // For Beta(1.5, 1), P(R > t) = (1 + t)^{-1/2}.
        let law = beta(1.5, 1.0);
        let s = law.sampler();
        let mut r = rng::stream(3, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_perpetuity(&s, &mut r).0).collect();
        let d = crate::stats::ks_one_sample(&xs, |t| 1.0 - (1.0 + t).powf(-0.5));
        assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn kesten_estimate_on_reference_law() {
        let law = beta(2.0, 1.5);
        let t = kesten_tail_estimate(&law, 0.5, 1_000_000, 5).unwrap();
        let exact = kesten_constant_beta(2.0, 1.5).unwrap();
        assert!((t.constant - exact).abs() < 0.1 * exact, "{} vs {exact}", t.constant);
        assert!((t.index - 0.5).abs() < 4.0 * t.index_se + 0.02, "{} +- {}", t.index, t.index_se);
        assert!(t.constant_se > 0.0 && t.window.0 < t.window.1);
    }

    #[test]
    fn iglehart_and_feller_agree_with_direct_tails() {
        let law = beta(1.5, 1.0);
        let k = 0.5;
        let m = moment_rho_log(&law, k).unwrap();
        let est = iglehart_estimate(&law, k, m, 400_000, 11).unwrap();
        let census = height_tail_census(&est.heights, k, &[4.0, 5.0, 6.0]);
        for (h, v, se) in census {
            assert!((v - est.c_i).abs() < 0.15 * est.c_i + 3.0 * se, "h={h}: {v} vs {}", est.c_i);
        }
        // supremum of V over the whole half line
        let s = law.sampler();
        let mut r = rng::stream(12, 0);
        let sups: Vec<f64> = (0..200_000).map(|_| simulate_supremum(&s, &mut r, 40.0)).collect();
        for h in [3.0, 4.0, 5.0] {
            let p = sups.iter().filter(|&&x| x >= h).count() as f64 / sups.len() as f64;
            let v = (k * h).exp() * p;
            assert!((v - est.c_f).abs() < 0.15 * est.c_f, "h={h}: {v} vs {}", est.c_f);
        }
        assert!((est.mean_ladder - 2.30).abs() < 0.03, "{}", est.mean_ladder);
    }

    #[test]
    fn scale_forms_agree() {
        let law = beta(1.5, 1.0);
        let k = kappa_solve(&law, 1e-12).unwrap().kappa;
        let m = moment_rho_log(&law, k).unwrap();
        let ck = kesten_constant_beta(1.5, 1.0).unwrap();
        let p = limit_scale(k, ck, m).unwrap();
        assert!((p.lambda_scale - 0.681_655_578_008_004_4).abs() < 1e-12);
        assert!((p.x_scale * p.lambda_scale - 1.0).abs() < 1e-12);
        assert!((p.tau_prefactor - p.lambda_scale.powf(1.0 / k)).abs() < 1e-12 * p.tau_prefactor);
        assert!((beta_law_scale(1.5, 1.0).unwrap() - p.lambda_scale).abs() < 1e-12);
        assert!(limit_scale(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tilted_height_probability_matches_direct() {
        let law = beta(1.5, 1.0);
        let (q_mc, se_mc) = height_probability(&law, 3.0, 400_000, 2).unwrap();
        let (q_is, se_is) = height_probability_tilted(&law, 0.5, 3.0, 100_000, 2).unwrap();
        assert!((q_mc - q_is).abs() < 4.0 * (se_mc * se_mc + se_is * se_is).sqrt(), "{q_mc} vs {q_is}");
        assert!(se_is < 0.01 * q_is);
        assert!(height_probability_tilted(&law, 0.5, 0.0, 10, 0).is_err());
    }

    #[test]
    fn meander_relations() {
        assert_eq!(meander_moment(2.0, 2.0).unwrap(), 1.0);
        let (ci, cf, ck) = (0.27, 0.61, 1.0);
        let m = meander_moment(ck, cf).unwrap();
        assert!((c_u(ci, m) * cf - ci * ck).abs() < 1e-15);
        assert!(meander_moment(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn corollary_form_matches_general_form(b in 0.2f64..5.0, k in 0.05f64..0.95) {
            let a = b + k;
            let law = beta(a, b);
            let m = moment_rho_log(&law, k).unwrap();
            let ck = kesten_constant_beta(a, b).unwrap();
            let p = limit_scale(k, ck, m).unwrap();
            let c = beta_law_scale(a, b).unwrap();
            prop_assert!((p.lambda_scale - c).abs() <= 1e-12 * c.max(1.0), "{} vs {}", p.lambda_scale, c);
        }
    }
}
