//! Valley census over many environments.

use super::{fmt, law_constants, par_replicas, replica_key, ExperimentConfig, ExperimentKind, LawConstants, Report, Table};
use crate::constants::{height_probability_tilted, height_tail_census, simulate_excursions};
use crate::env_model::LazyEnvironment;
use crate::potential::{
    check_good_environment, detect_deep_valleys, detect_star_valleys, valleys_coincide, DeepValleyScan,
    GoodEnvironment, GoodEventParams, PotentialPath, StarValleyScan, ValleyThresholds,
};
use crate::stats::mean_se;
use crate::{Error, Result, Side};

const MAX_WIDENINGS: usize = 24;

/// A lazily sampled environment seen through a window that grows on demand.
pub(super) struct Window {
    pub env: LazyEnvironment,
    pub lo: i64,
    pub hi: i64,
    pub widenings: usize,
}

impl Window {
    pub fn new(env: LazyEnvironment, lo: i64, hi: i64) -> Self {
        Window { env, lo, hi, widenings: 0 }
    }

    pub fn path(&mut self) -> PotentialPath {
        PotentialPath::from_lazy(&mut self.env, self.lo, self.hi)
    }

    /// Run `f` on the window's potential, doubling the side it runs out on.
    pub fn retry<T>(&mut self, mut f: impl FnMut(&PotentialPath) -> Result<T>) -> Result<T> {
        loop {
            let path = self.path();
            match f(&path) {
                Err(Error::WindowExhausted { side, .. }) if self.widenings < MAX_WIDENINGS => {
                    self.widenings += 1;
                    match side {
                        Side::Left => self.lo -= (-self.lo).max(1000),
                        Side::Right => self.hi += self.hi.max(1000),
                    }
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusEnvironment {
    pub k_n: usize,
    pub k_star: usize,
    pub coincide: bool,
    pub events: GoodEnvironment,
    pub e_n: i64,
    pub widenings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    pub n: u64,
    pub thresholds: ValleyThresholds,
    /// Importance-sampled probability that one excursion is high.
    pub q_n: f64,
    pub q_n_se: f64,
    pub environments: Vec<CensusEnvironment>,
}

impl CensusRow {
    fn freq(&self, f: impl Fn(&CensusEnvironment) -> bool) -> f64 {
        self.environments.iter().filter(|e| f(e)).count() as f64 / self.environments.len() as f64
    }

    pub fn mean_k(&self) -> f64 {
        let v: Vec<f64> = self.environments.iter().map(|e| e.k_n as f64).collect();
        mean_se(&v).mean
    }

    /// Mean of `K_n / (n q_n)`.
    pub fn k_ratio(&self) -> f64 {
        self.mean_k() / (self.n as f64 * self.q_n)
    }

    pub fn coincidence(&self) -> f64 {
        self.freq(|e| e.coincide)
    }

    /// Frequencies of A1..A5 and of the joint event.
    pub fn event_freqs(&self) -> [f64; 6] {
        [
            self.freq(|e| e.events.a1),
            self.freq(|e| e.events.a2),
            self.freq(|e| e.events.a3),
            self.freq(|e| e.events.a4),
            self.freq(|e| e.events.a5),
            self.freq(|e| e.events.joint()),
        ]
    }

    pub fn widenings(&self) -> usize {
        self.environments.iter().map(|e| e.widenings).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensusStudy {
    pub constants: LawConstants,
    pub mean_ladder: f64,
    pub params: Vec<GoodEventParams>,
    /// `(h, e^{kappa h} P(H >= h), se)` from independent excursions.
    pub height_tail: Vec<(f64, f64, f64)>,
    pub rows: Vec<CensusRow>,
}

/// Deep and shift-and-search valleys, their agreement and the
/// good-environment events on `replicas` environments per `n`.
pub fn valley_census(cfg: &ExperimentConfig) -> Result<CensusStudy> {
    let constants = law_constants(&cfg.law, cfg.kesten_series, cfg.master_seed)?;
    let kappa = constants.kappa.kappa;
    let excursions = simulate_excursions(&cfg.law, cfg.mc_samples, replica_key(cfg.master_seed, "census-ladder", 0, 0))?;
    let lengths: Vec<f64> = excursions.iter().map(|e| e.length as f64).collect();
    let mean_ladder = mean_se(&lengths).mean;
    let heights: Vec<f64> = excursions.iter().map(|e| e.height).collect();
    let grid: Vec<f64> = (1..=8).map(f64::from).collect();
    let height_tail = height_tail_census(&heights, kappa, &grid);
    let mut rows = Vec::new();
    let mut all_params = Vec::new();
    for (i, &n) in cfg.n_values.iter().enumerate() {
        let thr = ValleyThresholds::new(n, cfg.epsilon, kappa)?;
        let (q_n, q_n_se) = height_probability_tilted(
            &cfg.law,
            kappa,
            thr.height,
            cfg.mc_samples,
            replica_key(cfg.master_seed, "census-q", n, 0),
        )?;
        let params = GoodEventParams::defaults(mean_ladder, kappa, cfg.epsilon, q_n);
        let hi = (1.25 * mean_ladder * n as f64) as i64 + 10_000;
        let environments = par_replicas(cfg.replicas_for(i), |r| {
            let env = LazyEnvironment::new(&cfg.law, replica_key(cfg.master_seed, "census", n, r));
            let mut w = Window::new(env, -2000, hi);
            let (deep, star, events) = w.retry(|path| {
                let deep: DeepValleyScan = detect_deep_valleys(path, &thr)?;
                let star: StarValleyScan = detect_star_valleys(path, &thr, deep.e_n)?;
                let events = check_good_environment(path, &deep, &params)?;
                Ok((deep, star, events))
            })?;
            Ok(CensusEnvironment {
                k_n: deep.k_n,
                k_star: star.k_n,
                coincide: valleys_coincide(&deep, &star),
                events,
                e_n: deep.e_n,
                widenings: w.widenings,
            })
        })?;
        rows.push(CensusRow { n, thresholds: thr, q_n, q_n_se, environments });
        all_params.push(params);
    }
    Ok(CensusStudy { constants, mean_ladder, params: all_params, height_tail, rows })
}

impl CensusStudy {
    pub fn report(&self) -> Report {
        let mut r = Report::new(ExperimentKind::Census);
        r.note("kappa", self.constants.kappa.kappa);
        r.note("mean_ladder", self.mean_ladder);
        let mut t = Table::new(
            "census",
            &[
                "n", "environments", "height", "depth", "q_n", "q_n_se", "mean_k", "k_ratio", "coincidence", "a1", "a2",
                "a3", "a4", "a5", "joint", "c_prime", "c_double_prime", "delta", "widenings",
            ],
        );
        for (row, p) in self.rows.iter().zip(&self.params) {
            let f = row.event_freqs();
            let mut cells = vec![
                row.n.to_string(),
                row.environments.len().to_string(),
                fmt(row.thresholds.height),
                fmt(row.thresholds.depth),
                fmt(row.q_n),
                fmt(row.q_n_se),
                fmt(row.mean_k()),
                fmt(row.k_ratio()),
                fmt(row.coincidence()),
            ];
            cells.extend(f.iter().map(|&x| fmt(x)));
            cells.extend([fmt(p.c_prime), fmt(p.c_double_prime), fmt(p.delta), row.widenings().to_string()]);
            t.push(cells);
        }
        let mut h = Table::new("height_tail", &["h", "scaled_tail", "se"]);
        for &(x, v, se) in &self.height_tail {
            h.push([fmt(x), fmt(v), fmt(se)]);
        }
        let mut e = Table::new("environments", &["n", "replica", "k_n", "k_star", "coincide", "a1", "a2", "a3", "a4", "a5", "e_n"]);
        for row in &self.rows {
            for (i, x) in row.environments.iter().enumerate() {
                let ev = x.events;
                e.push([
                    row.n.to_string(),
                    i.to_string(),
                    x.k_n.to_string(),
                    x.k_star.to_string(),
                    x.coincide.to_string(),
                    ev.a1.to_string(),
                    ev.a2.to_string(),
                    ev.a3.to_string(),
                    ev.a4.to_string(),
                    ev.a5.to_string(),
                    x.e_n.to_string(),
                ]);
            }
        }
        r.tables = vec![t, h, e];
        r
    }
}

pub fn run_valley_census(cfg: &ExperimentConfig) -> Result<Report> {
    Ok(valley_census(cfg)?.report())
}
