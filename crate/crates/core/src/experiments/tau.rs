//! Hitting times `tau(n)` and positions `X_n` against their stable limits.

use super::{fmt, fmt_opt, law_constants, par_replicas, replica_key, ExperimentConfig, ExperimentKind, LawConstants, Report, Table};
use crate::env_model::LazyEnvironment;
use crate::quenched::{quenched_log_laplace, sample_crossing_time, simulate_walk, StopRule, WalkOptions};
use crate::stable::{predicted_position_samples, predicted_tau_cdf};
use crate::stats::{hill_estimator, hill_k, ks_critical, ks_two_sample, mean_se, quantile, sorted};
use crate::{rng, Result};

/// Empirical `E[exp(-lambda tau(n) / n^{1/kappa})]` next to its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceCell {
    pub lambda: f64,
    pub mean: f64,
    pub se: f64,
    /// `exp(-Lambda* lambda^kappa)`.
    pub predicted: f64,
}

impl LaplaceCell {
    pub fn gap(&self) -> f64 {
        (self.mean - self.predicted).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauRow {
    pub n: u64,
    pub replicas: usize,
    /// Replicas whose sampled `tau(n)` passed the step cap; they are left out
    /// of the tail statistics.
    pub truncated: usize,
    /// Averages of the exact quenched transforms over environments.
    pub laplace: Vec<LaplaceCell>,
    /// `(k, index, se)` of the Hill estimator with the default `k`.
    pub hill: Option<(usize, f64, f64)>,
    /// Hill index at `k/2` and `2k`.
    pub hill_sweep: Vec<(usize, f64)>,
    /// KS distance of `tau(n) / n^{1/kappa}` to the predicted limit.
    pub ks: Option<f64>,
    pub ks_critical: f64,
    pub median_scaled: Option<f64>,
    pub predicted_median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauStudy {
    pub constants: LawConstants,
    pub rows: Vec<TauRow>,
}

struct TauReplica {
    laplace: Vec<f64>,
    tau: Option<Option<u64>>,
}

/// For every `n`: exact quenched Laplace transforms of `tau(n)` averaged over
/// environments, and (with `sample_tau`) one exact draw of `tau(n)` per
/// environment for the tail index and the KS distance.
pub fn tau_study(cfg: &ExperimentConfig) -> Result<TauStudy> {
    let constants = law_constants(&cfg.law, cfg.kesten_series, cfg.master_seed)?;
    let k = constants.kappa.kappa;
    let p = constants.params;
    let mut rows = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let replicas = cfg.replicas_for(i);
        let scale = (n as f64).powf(1.0 / k);
        let s: Vec<f64> = cfg.lambda_grid.iter().map(|l| l / scale).collect();
        let reps = par_replicas(replicas, |r| {
            let seed = replica_key(cfg.master_seed, "tau", n, r);
            let mut env = LazyEnvironment::new(&cfg.law, seed);
            let laplace = quenched_log_laplace(&mut env, 0, n as i64, None, &s)?.into_iter().map(f64::exp).collect();
            let tau = cfg.sample_tau.then(|| {
                let mut g = rng::stream(rng::derive_seed(&[seed, rng::tag("walk")]), 0);
                sample_crossing_time(&mut env, 0, n as i64, None, &mut g, cfg.step_cap)
            });
            Ok(TauReplica { laplace, tau })
        })?;
        let laplace = cfg
            .lambda_grid
            .iter()
            .enumerate()
            .map(|(j, &lambda)| {
                let v: Vec<f64> = reps.iter().map(|r| r.laplace[j]).collect();
                let m = mean_se(&v);
                LaplaceCell { lambda, mean: m.mean, se: m.se, predicted: (-p.lambda_scale * lambda.powf(k)).exp() }
            })
            .collect();
        let taus: Vec<f64> = reps.iter().filter_map(|r| r.tau.flatten()).map(|t| t as f64 / scale).collect();
        let truncated = reps.iter().filter(|r| matches!(r.tau, Some(None))).count();
        let mc = cfg.mc_samples;
        let predicted = predicted_tau_cdf(&p, &[], mc, replica_key(cfg.master_seed, "predicted-tau", n, 0))?;
        let mut row = TauRow {
            n,
            replicas,
            truncated,
            laplace,
            hill: None,
            hill_sweep: Vec::new(),
            ks: None,
            ks_critical: ks_critical(taus.len().max(1), mc, 0.05),
            median_scaled: None,
            predicted_median: predicted.median(),
        };
        if taus.len() >= 10 {
            let kk = hill_k(taus.len());
            let (a, se) = hill_estimator(&taus, kk);
            row.hill = Some((kk, a, se));
            row.hill_sweep = [kk / 2, (2 * kk).min(taus.len() - 1)]
                .into_iter()
                .filter(|&j| j >= 1)
                .map(|j| (j, hill_estimator(&taus, j).0))
                .collect();
            row.ks = Some(ks_two_sample(&taus, &predicted.samples));
            row.median_scaled = Some(quantile(&sorted(&taus), 0.5));
        }
        rows.push(row);
    }
    Ok(TauStudy { constants, rows })
}

fn constants_notes(r: &mut Report, c: &LawConstants) {
    r.note("kappa", c.kappa.kappa);
    r.note("moment", c.moment);
    r.note("c_k", c.c_k);
    r.note("c_k_method", c.c_k_method);
    if let Some(se) = c.c_k_se {
        r.note("c_k_se", se);
    }
    r.note("lambda_scale", c.params.lambda_scale);
    r.note("tau_prefactor", c.params.tau_prefactor);
    r.note("x_scale", c.params.x_scale);
}

impl TauStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new(ExperimentKind::Tau);
        constants_notes(&mut r, &self.constants);
        let mut lap = Table::new("laplace", &["n", "lambda", "replicas", "mean", "se", "predicted", "gap"]);
        let mut tail = Table::new(
            "tail",
            &[
                "n", "replicas", "truncated", "hill_k", "hill_index", "hill_se", "hill_half_k", "hill_double_k", "ks",
                "ks_critical", "median_scaled", "predicted_median",
            ],
        );
        for row in &self.rows {
            for c in &row.laplace {
                lap.push([row.n.to_string(), fmt(c.lambda), row.replicas.to_string(), fmt(c.mean), fmt(c.se), fmt(c.predicted), fmt(c.gap())]);
            }
            let sweep = |i: usize| fmt_opt(row.hill_sweep.get(i).map(|s| s.1));
            tail.push([
                row.n.to_string(),
                row.replicas.to_string(),
                row.truncated.to_string(),
                row.hill.map(|h| h.0.to_string()).unwrap_or_default(),
                fmt_opt(row.hill.map(|h| h.1)),
                fmt_opt(row.hill.map(|h| h.2)),
                sweep(0),
                sweep(1),
                fmt_opt(row.ks),
                fmt(row.ks_critical),
                fmt_opt(row.median_scaled),
                fmt(row.predicted_median),
            ]);
        }
        r.tables = vec![lap, tail];
        r
    }
}

pub fn run_tau_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(tau_study(cfg)?.report())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionRow {
    pub n: u64,
    pub replicas: usize,
    pub truncated: usize,
    pub median_scaled: f64,
    pub ks: f64,
    pub ks_critical: f64,
    /// Level `m ~ n^kappa` used for the hitting-time half of the duality check.
    pub tau_level: u64,
    /// `median(tau(m) / m^{1/kappa})^kappa * median(X_n / n^kappa)`; tends to
    /// `median(S)^kappa Lambda* * median(S)^{-kappa} / Lambda* = 1`.
    pub duality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionStudy {
    pub constants: LawConstants,
    pub rows: Vec<PositionRow>,
}

/// `X_n / n^kappa` against `x_scale S^{-kappa}`, plus the product of the
/// fitted hitting-time and position scales.
pub fn position_study(cfg: &ExperimentConfig) -> Result<PositionStudy> {
    let constants = law_constants(&cfg.law, cfg.kesten_series, cfg.master_seed)?;
    let k = constants.kappa.kappa;
    let mut rows = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let replicas = cfg.replicas_for(i);
        let m = ((n as f64).powf(k).round() as u64).max(2);
        let reps = par_replicas(replicas, |r| {
            let seed = replica_key(cfg.master_seed, "position", n, r);
            let mut env = LazyEnvironment::new(&cfg.law, seed);
            let opts = WalkOptions {
                start: 0,
                reflect_at: None,
                stop: StopRule::Steps(n),
                step_cap: cfg.step_cap.max(n),
                record_trace: false,
                fast_path: false,
            };
            let walk = simulate_walk(&mut env, &opts, seed);
            let mut g = rng::stream(rng::derive_seed(&[seed, rng::tag("duality")]), 0);
            let tau = sample_crossing_time(&mut env, 0, m as i64, None, &mut g, cfg.step_cap);
            Ok((walk.endpoint, tau))
        })?;
        let xs: Vec<f64> = reps.iter().map(|r| r.0 as f64 / (n as f64).powf(k)).collect();
        let taus: Vec<f64> = reps.iter().filter_map(|r| r.1).map(|t| t as f64 / (m as f64).powf(1.0 / k)).collect();
        let truncated = replicas - taus.len();
        let limit = predicted_position_samples(&constants.params, cfg.mc_samples, replica_key(cfg.master_seed, "predicted-x", n, 0))?;
        let median_scaled = quantile(&sorted(&xs), 0.5);
        let tau_median = if taus.is_empty() { f64::NAN } else { quantile(&sorted(&taus), 0.5) };
        rows.push(PositionRow {
            n,
            replicas,
            truncated,
            median_scaled,
            ks: ks_two_sample(&xs, &limit),
            ks_critical: ks_critical(replicas, cfg.mc_samples, 0.05),
            tau_level: m,
            duality: tau_median.powf(k) * median_scaled,
        });
    }
    Ok(PositionStudy { constants, rows })
}

impl PositionStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new(ExperimentKind::Position);
        constants_notes(&mut r, &self.constants);
        let mut t = Table::new(
            "position",
            &["n", "replicas", "truncated", "median_scaled", "ks", "ks_critical", "tau_level", "duality"],
        );
        for row in &self.rows {
            t.push([
                row.n.to_string(),
                row.replicas.to_string(),
                row.truncated.to_string(),
                fmt(row.median_scaled),
                fmt(row.ks),
                fmt(row.ks_critical),
                row.tau_level.to_string(),
                fmt(row.duality),
            ]);
        }
        r.tables = vec![t];
        r
    }
}

pub fn run_position_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(position_study(cfg)?.report())
}
