//! Positive stable laws with Laplace transform `exp(-lambda^kappa)` and the
//! inverse of the stable subordinator.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::constants::LimitLawParams;
use crate::rng;
use crate::stats::dkw_epsilon;
use crate::{Error, Result};

const CHUNK: usize = 10_000;

/// `scale * S` where `E[exp(-lambda S)] = exp(-lambda^kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpec {
    pub kappa: f64,
    pub scale: f64,
}

impl StableSpec {
    pub fn new(kappa: f64, scale: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Regime(format!("stable index {kappa} is not in (0, 1)")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("scale {scale} must be positive")));
        }
        Ok(Self { kappa, scale })
    }

    pub fn unit(kappa: f64) -> Result<Self> {
        Self::new(kappa, 1.0)
    }

    /// `exp(-(scale lambda)^kappa)`.
    pub fn laplace(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("Laplace argument {lambda} is negative")));
        }
        Ok((-(self.scale * lambda).powf(self.kappa)).exp())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.scale * unit_stable(self.kappa, rng)
    }
}

/// Kanter's representation: `(A(U) / E)^{(1-kappa)/kappa}` with `U` uniform
/// on `(0, pi)`, `E` standard exponential and
/// `A(u) = sin(kappa u)^{kappa/(1-kappa)} sin((1-kappa) u) / sin(u)^{1/(1-kappa)}`.
pub fn unit_stable<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    let u = PI * rng::open01(rng);
    let e = -rng::open01(rng).ln();
    let log_a = kappa / (1.0 - kappa) * (kappa * u).sin().ln() + ((1.0 - kappa) * u).sin().ln()
        - u.sin().ln() / (1.0 - kappa);
    ((1.0 - kappa) / kappa * (log_a - e.ln())).exp()
}

/// `n` i.i.d. samples of `spec`; identical for any thread count.
pub fn sample_positive_stable(spec: &StableSpec, n: usize, seed: u64) -> Vec<f64> {
    let key = rng::derive_seed(&[seed, rng::tag("stable")]);
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(key, c as u64);
            let m = CHUNK.min(n - c * CHUNK);
            (0..m).map(move |_| spec.sample(&mut r)).collect::<Vec<_>>()
        })
        .collect()
}

/// Monte Carlo distribution function on a grid with its DKW half width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    /// 95% Dvoretzky-Kiefer-Wolfowitz half width.
    pub band: f64,
    /// Sorted samples behind `cdf`.
    pub samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>, grid: &[f64]) -> Self {
        samples.sort_by(|a, b| a.total_cmp(b));
        let n = samples.len() as f64;
        let cdf = grid.iter().map(|&x| samples.partition_point(|&s| s <= x) as f64 / n).collect();
        Self { grid: grid.to_vec(), cdf, band: dkw_epsilon(samples.len(), 0.05), samples }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    pub fn median(&self) -> f64 {
        crate::stats::quantile(&self.samples, 0.5)
    }
}

/// Distribution of `tau_prefactor * S` by Monte Carlo with `mc` samples.
pub fn predicted_tau_cdf(params: &LimitLawParams, grid: &[f64], mc: usize, seed: u64) -> Result<EmpiricalCdf> {
    if mc == 0 {
        return Err(Error::Domain("no Monte Carlo samples requested".into()));
    }
    let spec = StableSpec::new(params.kappa, params.tau_prefactor)?;
    Ok(EmpiricalCdf::from_samples(sample_positive_stable(&spec, mc, seed), grid))
}

/// Samples of `x_scale * S^{-kappa}`, the limit of `X_n / n^kappa`.
pub fn predicted_position_samples(params: &LimitLawParams, mc: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = StableSpec::unit(params.kappa)?;
    Ok(sample_positive_stable(&spec, mc, seed).into_iter().map(|s| params.x_scale * s.powf(-params.kappa)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    pub times: Vec<f64>,
    pub dt: f64,
    /// `Y` at `dt, 2 dt, ...`, up to the first value above the last time.
    pub y_values: Vec<f64>,
    /// `x_scale * Z(t)` at each requested time.
    pub z_values: Vec<f64>,
    /// Number of `dt` steps behind each `z_values` entry.
    pub z_steps: Vec<usize>,
    /// Set when some `Z(t)` spans fewer than 10 steps.
    pub coarse: bool,
}

/// Simulate `Y` on the lattice `dt N` with increments `dt^{1/kappa} S` and
/// read off `Z(t) = inf{s : Y_s > t}` (first lattice passage).
pub fn inverse_subordinator_path(kappa: f64, x_scale: f64, times: &[f64], dt: f64, seed: u64) -> Result<SubordinatorPath> {
    let spec = StableSpec::unit(kappa)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step {dt} must be positive")));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be nonnegative and increasing".into()));
    }
    let mut r = rng::stream(rng::derive_seed(&[seed, rng::tag("subordinator")]), 0);
    let inc = dt.powf(1.0 / kappa);
    let t_max = times.last().copied().unwrap_or(0.0);
    let mut y_values = Vec::new();
    let mut y = 0.0;
    while y <= t_max {
        y += inc * spec.sample(&mut r);
        y_values.push(y);
    }
    let z_steps: Vec<usize> = times.iter().map(|&t| if t == 0.0 { 0 } else { y_values.partition_point(|&v| v <= t) + 1 }).collect();
    let coarse = z_steps.iter().zip(times).any(|(&k, &t)| t > 0.0 && k < 10);
    Ok(SubordinatorPath {
        times: times.to_vec(),
        dt,
        z_values: z_steps.iter().map(|&k| x_scale * dt * k as f64).collect(),
        y_values,
        z_steps,
        coarse,
    })
}
