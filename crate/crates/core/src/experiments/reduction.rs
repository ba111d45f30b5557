//! Reduction of `tau(e_n)` to single-valley crossings, and the growth of
//! crossing times with the height of the potential.

use super::census::Window;
use super::{fmt, law_constants, par_replicas, replica_key, ExperimentConfig, ExperimentKind, Report, Table};
use crate::constants::{height_probability_tilted, simulate_excursions};
use crate::env_model::LazyEnvironment;
use crate::potential::{detect_deep_valleys, first_ascent, ValleyThresholds};
use crate::quenched::{quenched_log_laplace, quenched_mean_crossing_time};
use crate::stats::{fit_line, mean_se, LineFit, MeanSe};
use crate::{Error, Result};

/// Largest `n` for which both sides of the bracket are computed.
pub const REDUCTION_MAX_N: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRow {
    pub n: u64,
    pub lambda: f64,
    pub environments: usize,
    /// `E[exp(-lambda_n tau(e_n))]`.
    pub total: MeanSe,
    /// `E[E^{b_1}_{|a_1} exp(-lambda_n tau(d_1))]` for the first deep valley.
    pub single: MeanSe,
    pub k_upper: u64,
    pub k_lower: u64,
    /// `single^k_upper` and `single^k_lower`.
    pub lower: f64,
    pub upper: f64,
    pub lower_se: f64,
    pub upper_se: f64,
    pub widenings: usize,
}

impl ReductionRow {
    /// Whether `total` lies in `[lower, upper]` widened by three combined
    /// standard errors on each side.
    pub fn contained(&self) -> bool {
        let lo = (self.total.se.powi(2) + self.lower_se.powi(2)).sqrt();
        let hi = (self.total.se.powi(2) + self.upper_se.powi(2)).sqrt();
        self.total.mean >= self.lower - 3.0 * lo && self.total.mean <= self.upper + 3.0 * hi
    }

    /// Distance from `total` to the nearer end of the unwidened bracket,
    /// negative outside.
    pub fn margin(&self) -> f64 {
        (self.total.mean - self.lower).min(self.upper - self.total.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionStudy {
    pub q_n: Vec<f64>,
    pub rows: Vec<ReductionRow>,
}

fn bracket_exponents(n: u64, q_n: f64, epsilon: f64) -> (u64, u64) {
    let nq = n as f64 * q_n;
    let spread = (n as f64).powf(-epsilon / 4.0);
    ((nq * (1.0 + spread)).ceil() as u64, (nq * (1.0 - spread)).floor().max(0.0) as u64)
}

/// Exact quenched transforms of `tau(e_n)` from 0 and of the crossing of the
/// first deep valley from its bottom (reflected at its left end), averaged
/// over environments.
pub fn reduction_study(cfg: &ExperimentConfig) -> Result<ReductionStudy> {
    let constants = law_constants(&cfg.law, cfg.kesten_series, cfg.master_seed)?;
    let kappa = constants.kappa.kappa;
    if let Some(&n) = cfg.n_values.iter().find(|&&n| n > REDUCTION_MAX_N) {
        return Err(Error::Config(format!("n = {n} is above {REDUCTION_MAX_N} for the reduction check")));
    }
    let lengths: Vec<f64> = simulate_excursions(&cfg.law, cfg.mc_samples, replica_key(cfg.master_seed, "reduction-ladder", 0, 0))?
        .iter()
        .map(|e| e.length as f64)
        .collect();
    let mean_ladder = mean_se(&lengths).mean;
    let mut rows = Vec::new();
    let mut qs = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let thr = ValleyThresholds::new(n, cfg.epsilon, kappa)?;
        let (q_n, _) = height_probability_tilted(&cfg.law, kappa, thr.height, cfg.mc_samples, replica_key(cfg.master_seed, "reduction-q", n, 0))?;
        qs.push(q_n);
        let (k_upper, k_lower) = bracket_exponents(n, q_n, cfg.epsilon);
        let s: Vec<f64> = cfg.lambda_grid.iter().map(|l| l / (n as f64).powf(1.0 / kappa)).collect();
        let hi = (1.25 * mean_ladder * n as f64) as i64 + 10_000;
        let reps = par_replicas(cfg.replicas_for(i), |r| {
            let env = LazyEnvironment::new(&cfg.law, replica_key(cfg.master_seed, "reduction", n, r));
            let mut w = Window::new(env, -2000, hi);
            let (e_n, valley) = w.retry(|path| {
                let scan = detect_deep_valleys(path, &thr)?;
                let first = scan.valleys.first().copied().or(scan.next).ok_or(Error::WindowExhausted {
                    side: crate::Side::Right,
                    site: path.end() + 1,
                })?;
                Ok((scan.e_n, first))
            })?;
            let total: Vec<f64> = quenched_log_laplace(&mut w.env, 0, e_n, None, &s)?.into_iter().map(f64::exp).collect();
            let single: Vec<f64> =
                quenched_log_laplace(&mut w.env, valley.b, valley.d, Some(valley.a), &s)?.into_iter().map(f64::exp).collect();
            Ok((total, single, w.widenings))
        })?;
        let widenings = reps.iter().map(|r| r.2).sum();
        for (j, &lambda) in cfg.lambda_grid.iter().enumerate() {
            let total = mean_se(&reps.iter().map(|r| r.0[j]).collect::<Vec<_>>());
            let single = mean_se(&reps.iter().map(|r| r.1[j]).collect::<Vec<_>>());
            let pow_se = |k: u64| if k == 0 { 0.0 } else { k as f64 * single.mean.powi(k as i32 - 1) * single.se };
            rows.push(ReductionRow {
                n,
                lambda,
                environments: reps.len(),
                total,
                single,
                k_upper,
                k_lower,
                lower: single.mean.powi(k_upper as i32),
                upper: single.mean.powi(k_lower as i32),
                lower_se: pow_se(k_upper),
                upper_se: pow_se(k_lower),
                widenings,
            });
        }
    }
    Ok(ReductionStudy { q_n: qs, rows })
}

impl ReductionStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new(ExperimentKind::Reduction);
        let mut t = Table::new(
            "reduction",
            &[
                "n", "lambda", "environments", "total", "total_se", "single", "single_se", "k_upper", "k_lower", "lower",
                "upper", "margin", "contained", "widenings",
            ],
        );
        for row in &self.rows {
            t.push([
                row.n.to_string(),
                fmt(row.lambda),
                row.environments.to_string(),
                fmt(row.total.mean),
                fmt(row.total.se),
                fmt(row.single.mean),
                fmt(row.single.se),
                row.k_upper.to_string(),
                row.k_lower.to_string(),
                fmt(row.lower),
                fmt(row.upper),
                fmt(row.margin()),
                row.contained().to_string(),
                row.widenings.to_string(),
            ]);
        }
        r.note("all_contained", self.rows.iter().all(|x| x.contained()));
        r.tables = vec![t];
        r
    }
}

pub fn verify_reduction(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(reduction_study(cfg)?.report())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingRow {
    pub h: f64,
    /// `E[E_{|0} tau(T_up(h) - 1)]` over environments.
    pub mean_time: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingStudy {
    pub rows: Vec<CrossingRow>,
    /// Least-squares fit of `ln mean_time` against `h`.
    pub fit: LineFit,
}

/// Exact quenched mean of the time the walk reflected at 0 needs to reach
/// `T_up(h) - 1`, averaged over environments. The same environments are used
/// for every `h`.
pub fn crossing_study(cfg: &ExperimentConfig) -> Result<CrossingStudy> {
    if cfg.h_grid.len() < 2 {
        return Err(Error::Config("h_grid needs at least two heights".into()));
    }
    law_constants(&cfg.law, cfg.kesten_series, cfg.master_seed)?;
    let top = *cfg.h_grid.last().unwrap();
    let reps = par_replicas(cfg.replicas_for(0), |r| {
        let env = LazyEnvironment::new(&cfg.law, replica_key(cfg.master_seed, "crossing", 0, r));
        let mut w = Window::new(env, 0, 1000);
        w.retry(|path| first_ascent(path, top))?;
        let path = w.path();
        cfg.h_grid
            .iter()
            .map(|&h| {
                let t = first_ascent(&path, h)?;
                quenched_mean_crossing_time(&mut w.env, 0, t - 1, Some(0))
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<CrossingRow> = cfg
        .h_grid
        .iter()
        .enumerate()
        .map(|(j, &h)| CrossingRow { h, mean_time: mean_se(&reps.iter().map(|r| r[j]).collect::<Vec<_>>()) })
        .collect();
    let fit = fit_line(&cfg.h_grid, &rows.iter().map(|r| r.mean_time.mean.ln()).collect::<Vec<_>>());
    Ok(CrossingStudy { rows, fit })
}

impl CrossingStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new(ExperimentKind::Crossing);
        r.note("slope", self.fit.slope);
        r.note("slope_se", self.fit.slope_se);
        r.note("intercept", self.fit.intercept);
        let mut t = Table::new("crossing", &["h", "mean_time", "se", "log_mean_time"]);
        for row in &self.rows {
            t.push([fmt(row.h), fmt(row.mean_time.mean), fmt(row.mean_time.se), fmt(row.mean_time.mean.ln())]);
        }
        r.tables = vec![t];
        r
    }
}

pub fn verify_crossing_bound(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(crossing_study(cfg)?.report())
}
