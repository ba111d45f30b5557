//! Monte Carlo experiments, their reports and run manifests.
//!
//! Every replica draws from its own stream keyed by the master seed, the
//! experiment and the replica index. Replicas run in parallel and are
//! collected in index order before any reduction, so reports do not depend
//! on the number of worker threads.

mod census;
pub mod config;
mod output;
mod reduction;
mod table;
mod tau;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use census::{run_valley_census, valley_census, CensusEnvironment, CensusRow, CensusStudy};
pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{manifest_text, svg_plot, write_report, Report, Table, SCHEMA_VERSION};
pub use reduction::{
    crossing_study, reduction_study, verify_crossing_bound, verify_reduction, CrossingRow, CrossingStudy,
    ReductionRow, ReductionStudy,
};
pub use table::{constants_table, ConstantRow, ConstantsOptions};
pub use tau::{
    position_study, run_position_experiment, run_tau_experiment, tau_study, LaplaceCell, PositionRow,
    PositionStudy, TauRow, TauStudy,
};

use crate::constants::{kesten_constant_beta, kesten_tail_estimate, limit_scale, LimitLawParams};
use crate::env_model::{kappa_solve, moment_rho_log, EnvironmentLaw, KappaResult, DEFAULT_KAPPA_TOL};
use crate::{rng, Error, Result};

/// Run `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Seed of replica `r` at level `n` of an experiment.
pub fn replica_key(master: u64, experiment: &str, n: u64, r: usize) -> u64 {
    rng::derive_seed(&[master, rng::tag(experiment), n, r as u64])
}

/// `f(0), ..., f(count - 1)` in parallel, returned in index order.
fn par_replicas<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

/// Constants of the limit law for one environment law.
#[derive(Debug, Clone, PartialEq)]
pub struct LawConstants {
    pub kappa: KappaResult,
    pub moment: f64,
    pub c_k: f64,
    /// Standard error of `c_k` when it was estimated.
    pub c_k_se: Option<f64>,
    pub c_k_method: &'static str,
    pub params: LimitLawParams,
}

/// `kappa`, `E[rho^kappa ln rho]` and `C_K` (closed form for Beta laws, tail
/// fit of `kesten_series` perpetuities otherwise).
pub fn law_constants(law: &EnvironmentLaw, kesten_series: usize, seed: u64) -> Result<LawConstants> {
    let kappa = kappa_solve(law, DEFAULT_KAPPA_TOL)?;
    let k = kappa.kappa;
    let moment = moment_rho_log(law, k)?;
    let (c_k, c_k_se, c_k_method) = match *law {
        EnvironmentLaw::Beta { alpha, beta } => (kesten_constant_beta(alpha, beta)?, None, "closed form"),
        EnvironmentLaw::Discrete { .. } => {
            let t = kesten_tail_estimate(law, k, kesten_series, seed)?;
            (t.constant, Some(t.constant_se), "perpetuity tail fit")
        }
    };
    let params = limit_scale(k, c_k, moment)?;
    Ok(LawConstants { kappa, moment, c_k, c_k_se, c_k_method, params })
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match kind {
        ExperimentKind::Tau => run_tau_experiment(cfg),
        ExperimentKind::Position => run_position_experiment(cfg),
        ExperimentKind::Census => run_valley_census(cfg),
        ExperimentKind::Reduction => verify_reduction(cfg),
        ExperimentKind::Crossing => verify_crossing_bound(cfg),
    }
}

/// Run an experiment on `workers` threads and write its report to `dir`.
pub fn run_and_write(kind: ExperimentKind, cfg: &ExperimentConfig, dir: &Path, workers: usize) -> Result<(Report, Vec<PathBuf>)> {
    let report = with_workers(workers, || run_experiment(kind, cfg))??;
    let files = write_report(dir, cfg, &report)?;
    Ok((report, files))
}

/// Re-run the experiment recorded in a manifest and write the report to `dir`.
pub fn regenerate(manifest: &Path, dir: &Path, workers: usize) -> Result<(Report, Vec<PathBuf>)> {
    let text = fs::read_to_string(manifest)?;
    let (kind, cfg) = ExperimentConfig::parse(&text)?;
    let kind = kind.ok_or_else(|| Error::Config(format!("{} names no experiment", manifest.display())))?;
    run_and_write(kind, &cfg, dir, workers)
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}
