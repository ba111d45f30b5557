//! Walk simulation and exact quenched transforms of hitting times.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::env_model::{log_rho, LazyEnvironment};
use crate::rng::{self, open01};
use crate::{Error, Result};

/// The left boundary of an unreflected computation is placed where the
/// probability of reaching it is below `e^{-LEFT_TAIL_LOG_BOUND}`.
pub const LEFT_TAIL_LOG_BOUND: f64 = 40.0;

/// Sites searched to the left before giving up on the boundary.
const MAX_LEFT_SEARCH: i64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Stop at the first visit to the site (0 steps if it is the start).
    HitSite(i64),
    /// Stop after this many steps.
    Steps(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOptions {
    pub start: i64,
    pub reflect_at: Option<i64>,
    pub stop: StopRule,
    /// Runs longer than this are truncated.
    pub step_cap: u64,
    pub record_trace: bool,
    /// Sample hitting times through edge-crossing counts instead of steps.
    /// Only used for `HitSite` targets to the right of the start without a
    /// trace.
    pub fast_path: bool,
}

impl WalkOptions {
    pub fn hit(start: i64, target: i64) -> Self {
        WalkOptions {
            start,
            reflect_at: None,
            stop: StopRule::HitSite(target),
            step_cap: 10_000_000_000,
            record_trace: false,
            fast_path: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub steps: u64,
    pub endpoint: i64,
    /// Whether the step cap was reached before the stop rule.
    pub truncated: bool,
    pub trace: Option<Vec<i64>>,
}

/// Run the walk in `env` until the stop rule or the step cap.
pub fn simulate_walk(env: &mut LazyEnvironment, opts: &WalkOptions, seed: u64) -> WalkOutcome {
    let mut r = rng::stream(rng::derive_seed(&[seed, rng::tag("walk")]), 0);
    if let (StopRule::HitSite(target), true, false) = (opts.stop, opts.fast_path, opts.record_trace) {
        if target > opts.start && opts.reflect_at.is_none_or(|y| y <= opts.start) {
            return match sample_crossing_time(env, opts.start, target, opts.reflect_at, &mut r, opts.step_cap) {
                Some(t) => WalkOutcome { steps: t, endpoint: target, truncated: false, trace: None },
                None => WalkOutcome { steps: opts.step_cap, endpoint: target, truncated: true, trace: None },
            };
        }
    }
    let mut x = opts.start;
    let mut steps = 0u64;
    let mut trace = opts.record_trace.then(|| vec![x]);
    let limit = match opts.stop {
        StopRule::Steps(k) => k.min(opts.step_cap),
        StopRule::HitSite(_) => opts.step_cap,
    };
    let target = match opts.stop {
        StopRule::HitSite(t) => Some(t),
        StopRule::Steps(_) => None,
    };
    if target == Some(x) {
        return WalkOutcome { steps: 0, endpoint: x, truncated: false, trace };
    }
    while steps < limit {
        let w = if opts.reflect_at == Some(x) { 1.0 } else { env.omega(x) };
        if open01(&mut r) < w {
            x += 1;
        } else {
            x -= 1;
        }
        steps += 1;
        if let Some(t) = trace.as_mut() {
            t.push(x);
        }
        if target == Some(x) {
            return WalkOutcome { steps, endpoint: x, truncated: false, trace };
        }
    }
    let truncated = target.is_some() || matches!(opts.stop, StopRule::Steps(k) if k > opts.step_cap);
    WalkOutcome { steps, endpoint: x, truncated, trace }
}

/// Number of failures before the `r`-th success in Bernoulli(`w`) trials.
fn negative_binomial<R: Rng + ?Sized>(rng: &mut R, r: u64, w: f64) -> u64 {
    if r == 0 || w >= 1.0 {
        return 0;
    }
    if r <= 16 {
        let ln_q = (-w).ln_1p();
        let mut total = 0u64;
        for _ in 0..r {
            total += (open01(rng).ln() / ln_q).floor() as u64;
        }
        return total;
    }
    let scale = (1.0 - w) / w;
    let lambda = Gamma::new(r as f64, scale).expect("positive shape").sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(u64::MAX)
}

/// Exact sample of `tau(target)` from `start < target`, built from the
/// numbers of crossings of each edge. Returns `None` once the total passes
/// `cap`.
pub fn sample_crossing_time(
    env: &mut LazyEnvironment,
    start: i64,
    target: i64,
    reflect_at: Option<i64>,
    rng: &mut ChaCha8Rng,
    cap: u64,
) -> Option<u64> {
    assert!(start < target, "crossing time needs start < target");
    // `down` is the number of steps x+1 -> x across the current edge (x, x+1).
    let mut down = 0u64;
    let mut tau = 0u64;
    let mut x = target - 1;
    loop {
        let up = down + u64::from(x >= start);
        if up == 0 {
            break;
        }
        tau = tau.saturating_add(up).saturating_add(down);
        if tau > cap {
            return None;
        }
        let w = if reflect_at == Some(x) { 1.0 } else { env.omega(x) };
        down = negative_binomial(rng, up, w);
        x -= 1;
    }
    Some(tau)
}

/// Left boundary for exact computations from `start` to `target` without
/// reflection; returns the omegas on `[left, target - 1]` and `left`.
fn omegas_with_boundary(
    env: &mut LazyEnvironment,
    start: i64,
    target: i64,
    reflect_at: Option<i64>,
) -> Result<(Vec<f64>, i64)> {
    if let Some(y) = reflect_at {
        if y > start {
            return Err(Error::Domain(format!("reflection at {y} right of the start {start}")));
        }
        let w: Vec<f64> = (y..target).map(|x| env.omega(x)).collect();
        return Ok((w, y));
    }
    let mut v = 0.0f64;
    let mut top = 0.0f64;
    for x in start + 1..target {
        v += log_rho(env.omega(x));
        top = top.max(v);
    }
    let need = top + LEFT_TAIL_LOG_BOUND + ((target - start) as f64).ln();
    let mut left = start;
    let mut vl = 0.0;
    while vl < need {
        vl -= log_rho(env.omega(left));
        left -= 1;
        if start - left > MAX_LEFT_SEARCH {
            return Err(Error::BudgetExhausted(format!(
                "no left boundary within {MAX_LEFT_SEARCH} sites of {start}"
            )));
        }
    }
    let w: Vec<f64> = (left..target).map(|x| env.omega(x)).collect();
    Ok((w, left))
}

/// `ln E^start[e^{-s tau(target)}]` for the walk on the sites covered by
/// `omegas` (`omegas[0]` is treated as reflecting), one value per `s`.
///
/// With `psi_x = 1 - E^x[e^{-s tau(x+1)}]` and `u = 1 - e^{-s}`,
/// `psi_x = (w u + (1-w) t) / (w + (1-w) t)` where `t = u + psi_{x-1} - u psi_{x-1}`,
/// a recursion with no cancellation.
pub fn chain_log_laplace(omegas: &[f64], start_index: usize, s: &[f64]) -> Vec<f64> {
    s.iter()
        .map(|&s| {
            let u = -(-s).exp_m1();
            let mut psi = u;
            let mut acc = if start_index == 0 { (-psi).ln_1p() } else { 0.0 };
            for (i, &w) in omegas.iter().enumerate().skip(1) {
                let t = u + psi - u * psi;
                let l = 1.0 - w;
                psi = (w * u + l * t) / (w + l * t);
                if i >= start_index {
                    acc += (-psi).ln_1p();
                }
            }
            acc
        })
        .collect()
}

/// Exact quenched `ln E^start[e^{-s tau(target)}]` for each `s`.
pub fn quenched_log_laplace(
    env: &mut LazyEnvironment,
    start: i64,
    target: i64,
    reflect_at: Option<i64>,
    s: &[f64],
) -> Result<Vec<f64>> {
    if target <= start {
        return Err(Error::Domain(format!("need start < target, got {start}, {target}")));
    }
    let (w, left) = omegas_with_boundary(env, start, target, reflect_at)?;
    Ok(chain_log_laplace(&w, (start - left) as usize, s))
}

/// Exact quenched `E^start[tau(target)]`: `sum_x t_x` with
/// `t_x = 1/w_x + rho_x t_{x-1}` and `t = 1` at the boundary.
pub fn quenched_mean_crossing_time(
    env: &mut LazyEnvironment,
    start: i64,
    target: i64,
    reflect_at: Option<i64>,
) -> Result<f64> {
    if target < start {
        return Err(Error::Domain(format!("need start <= target, got {start}, {target}")));
    }
    if target == start {
        return Ok(0.0);
    }
    let (w, left) = omegas_with_boundary(env, start, target, reflect_at)?;
    let first = (start - left) as usize;
    let mut t = 1.0;
    let mut total = if first == 0 { 1.0 } else { 0.0 };
    for (i, &w) in w.iter().enumerate().skip(1) {
        t = 1.0 / w + (1.0 - w) / w * t;
        if i >= first {
            total += t;
        }
    }
    Ok(total)
}
