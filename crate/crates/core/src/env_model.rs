//! Environment laws, environment sampling and the exponent `kappa`.
//!
//! An environment is a sequence `omega_x` in `(0, 1)` of right-step
//! probabilities, i.i.d. over sites `x` in `Z`. With `rho = (1 - omega) / omega`
//! and `Lambda(t) = ln E[rho^t]`, the walk is transient to the right and
//! sub-ballistic when `E[ln rho] < 0` and the positive root `kappa` of
//! `Lambda` lies in `(0, 1)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::rng::{self, open01};
use crate::special::{digamma, ln_beta, log_sum_exp};
use crate::{Error, Result};

/// Sites per independently keyed random block.
pub const BLOCK: i64 = 1024;

/// Largest `|Lambda(t)|` accepted as a root.
pub const DEFAULT_KAPPA_TOL: f64 = 1e-12;

/// Value reported by [`rate_function`] when the supremum is infinite.
pub const RATE_INFINITE: f64 = 1e308;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentLaw {
    /// `omega ~ Beta(alpha, beta)`.
    Beta { alpha: f64, beta: f64 },
    /// Finitely many atoms `(omega, probability)`.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl EnvironmentLaw {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(EnvironmentLaw::Beta { alpha, beta })
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidLaw("discrete law has no atoms".into()));
        }
        let mut total = 0.0;
        for &(w, p) in &atoms {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::InvalidLaw(format!("atom omega = {w} is outside (0, 1)")));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidLaw(format!("atom probability {p} is outside (0, 1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLaw(format!("atom probabilities sum to {total}, not 1")));
        }
        Ok(EnvironmentLaw::Discrete { atoms })
    }

    /// Open interval of `t` on which `E[rho^t]` is finite.
    pub fn moment_domain(&self) -> (f64, f64) {
        match *self {
            EnvironmentLaw::Beta { alpha, beta } => (-beta, alpha),
            EnvironmentLaw::Discrete { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `E[ln rho]`, i.e. `Lambda'(0)`.
    pub fn mean_log_rho(&self) -> f64 {
        lambda_derivative(self, 0.0)
    }

    /// The law reweighted by `rho^t / E[rho^t]`. For Beta laws this is
    /// Beta(alpha - t, beta + t).
    pub fn tilted(&self, t: f64) -> Result<Self> {
        let (lo, hi) = self.moment_domain();
        if !(t > lo && t < hi) {
            return Err(Error::DivergentMoment { t, limit: if t >= hi { hi } else { lo } });
        }
        match *self {
            EnvironmentLaw::Beta { alpha, beta } => EnvironmentLaw::beta(alpha - t, beta + t),
            EnvironmentLaw::Discrete { ref atoms } => {
                let logs: Vec<f64> = atoms.iter().map(|&(w, p)| p.ln() + t * log_rho(w)).collect();
                let norm = crate::special::log_sum_exp(logs.iter().copied());
                let atoms = atoms.iter().zip(&logs).map(|(&(w, _), l)| (w, (l - norm).exp())).collect();
                EnvironmentLaw::discrete(atoms)
            }
        }
    }

    pub fn sampler(&self) -> OmegaSampler {
        match *self {
            EnvironmentLaw::Beta { alpha, beta } if beta == 1.0 => OmegaSampler::PowerUpper(1.0 / alpha),
            EnvironmentLaw::Beta { alpha, beta } if alpha == 1.0 => OmegaSampler::PowerLower(1.0 / beta),
            EnvironmentLaw::Beta { alpha, beta } => {
                OmegaSampler::Beta(rand_distr::Beta::new(alpha, beta).expect("validated parameters"))
            }
            EnvironmentLaw::Discrete { ref atoms } => {
                let mut acc = 0.0;
                let cdf = atoms
                    .iter()
                    .map(|&(w, p)| {
                        acc += p;
                        (w, acc)
                    })
                    .collect();
                OmegaSampler::Atoms(cdf)
            }
        }
    }
}

impl fmt::Display for EnvironmentLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvironmentLaw::Beta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
            EnvironmentLaw::Discrete { atoms } => {
                f.write_str("discrete:")?;
                for (i, (w, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{w}@{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for EnvironmentLaw {
    type Err = Error;

    /// `beta:A,B` or `discrete:w1@p1;w2@p2;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::InvalidLaw(format!("cannot parse law '{s}': {why}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("'{t}' is not a number")));
        if let Some(rest) = s.strip_prefix("beta:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(bad("expected beta:A,B"));
            }
            EnvironmentLaw::beta(num(parts[0])?, num(parts[1])?)
        } else if let Some(rest) = s.strip_prefix("discrete:") {
            let mut atoms = Vec::new();
            for item in rest.split(';').filter(|t| !t.trim().is_empty()) {
                let (w, p) = item.split_once('@').ok_or_else(|| bad("expected omega@probability"))?;
                atoms.push((num(w)?, num(p)?));
            }
            EnvironmentLaw::discrete(atoms)
        } else {
            Err(bad("expected 'beta:' or 'discrete:' prefix"))
        }
    }
}

/// Prepared sampler for single-site values of `omega`.
#[derive(Debug, Clone)]
pub enum OmegaSampler {
    /// `U^(1/alpha)`, the Beta(alpha, 1) law.
    PowerUpper(f64),
    /// `1 - U^(1/beta)`, the Beta(1, beta) law.
    PowerLower(f64),
    Beta(rand_distr::Beta<f64>),
    /// `(omega, cumulative probability)`.
    Atoms(Vec<(f64, f64)>),
}

impl OmegaSampler {
    /// One draw, strictly inside `(0, 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let w = match self {
                OmegaSampler::PowerUpper(e) => open01(rng).powf(*e),
                OmegaSampler::PowerLower(e) => 1.0 - open01(rng).powf(*e),
                OmegaSampler::Beta(d) => d.sample(rng),
                OmegaSampler::Atoms(cdf) => {
                    let u = open01(rng);
                    cdf.iter().find(|&&(_, c)| u <= c).unwrap_or(cdf.last().unwrap()).0
                }
            };
            if w > 0.0 && w < 1.0 {
                return w;
            }
        }
    }
}

/// `(1 - omega) / omega`.
#[inline]
pub fn rho(omega: f64) -> f64 {
    (1.0 - omega) / omega
}

/// `ln rho`, computed as `ln(1 - omega) - ln(omega)`.
#[inline]
pub fn log_rho(omega: f64) -> f64 {
    (-omega).ln_1p() - omega.ln()
}

fn block_rng(seed: u64, block: i64) -> ChaCha8Rng {
    rng::stream(rng::derive_seed(&[seed, rng::tag("environment")]), block as u64)
}

fn fill_block(sampler: &OmegaSampler, seed: u64, block: i64) -> Vec<f64> {
    let mut r = block_rng(seed, block);
    (0..BLOCK).map(|_| sampler.sample(&mut r)).collect()
}

/// A finite window `omega_offset, ..., omega_{offset + len - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSlice {
    pub offset: i64,
    pub omegas: Vec<f64>,
    pub seed: u64,
}

impl EnvironmentSlice {
    /// Slice from explicit values, e.g. a fixture.
    pub fn from_values(offset: i64, omegas: Vec<f64>) -> Result<Self> {
        if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
            return Err(Error::Domain(format!("omega = {w} is outside (0, 1)")));
        }
        Ok(EnvironmentSlice { offset, omegas, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Last site, inclusive.
    pub fn end(&self) -> i64 {
        self.offset + self.omegas.len() as i64 - 1
    }

    pub fn omega(&self, x: i64) -> f64 {
        self.omegas[(x - self.offset) as usize]
    }
}

/// Sample `omega_x` for `lo <= x <= hi`. The value at a site depends only on
/// `(seed, x)`.
pub fn sample_environment(law: &EnvironmentLaw, lo: i64, hi: i64, seed: u64) -> Result<EnvironmentSlice> {
    if lo > hi {
        return Err(Error::Domain(format!("empty site range [{lo}, {hi}]")));
    }
    let mut env = LazyEnvironment::new(law, seed);
    env.ensure(lo, hi);
    Ok(env.slice(lo, hi))
}

/// An environment on all of `Z`, generated block by block on demand.
#[derive(Debug, Clone)]
pub struct LazyEnvironment {
    sampler: OmegaSampler,
    seed: u64,
    /// `right[i] = omega_i` for `i >= 0`.
    right: Vec<f64>,
    /// `left[i] = omega_{-1-i}`.
    left: Vec<f64>,
}

impl LazyEnvironment {
    pub fn new(law: &EnvironmentLaw, seed: u64) -> Self {
        LazyEnvironment { sampler: law.sampler(), seed, right: Vec::new(), left: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Make sure sites `lo..=hi` are materialised.
    pub fn ensure(&mut self, lo: i64, hi: i64) {
        while (self.right.len() as i64) <= hi {
            let b = self.right.len() as i64 / BLOCK;
            let vals = fill_block(&self.sampler, self.seed, b);
            self.right.extend_from_slice(&vals);
        }
        while -(self.left.len() as i64) > lo {
            let b = -(self.left.len() as i64) / BLOCK - 1;
            let vals = fill_block(&self.sampler, self.seed, b);
            self.left.extend(vals.iter().rev());
        }
    }

    #[inline]
    pub fn omega(&mut self, x: i64) -> f64 {
        if x >= 0 {
            if x as usize >= self.right.len() {
                self.ensure(x, x);
            }
            self.right[x as usize]
        } else {
            let i = (-1 - x) as usize;
            if i >= self.left.len() {
                self.ensure(x, x);
            }
            self.left[i]
        }
    }

    /// Materialised range, inclusive.
    pub fn range(&self) -> (i64, i64) {
        (-(self.left.len() as i64), self.right.len() as i64 - 1)
    }

    pub fn slice(&mut self, lo: i64, hi: i64) -> EnvironmentSlice {
        self.ensure(lo, hi);
        let omegas = (lo..=hi).map(|x| self.omega(x)).collect();
        EnvironmentSlice { offset: lo, omegas, seed: self.seed }
    }
}

/// `Lambda(t) = ln E[rho^t]`.
pub fn lambda_fn(law: &EnvironmentLaw, t: f64) -> Result<f64> {
    match *law {
        EnvironmentLaw::Beta { alpha, beta } => {
            if t >= alpha || t <= -beta {
                return Err(Error::DivergentMoment { t, limit: if t > 0.0 { alpha } else { -beta } });
            }
            Ok(ln_beta(alpha - t, beta + t) - ln_beta(alpha, beta))
        }
        EnvironmentLaw::Discrete { ref atoms } => {
            Ok(log_sum_exp(atoms.iter().map(|&(w, p)| p.ln() + t * log_rho(w))))
        }
    }
}

/// `Lambda'(t) = E[rho^t ln rho] / E[rho^t]`. Returns `NaN` outside the domain.
pub fn lambda_derivative(law: &EnvironmentLaw, t: f64) -> f64 {
    match *law {
        EnvironmentLaw::Beta { alpha, beta } => {
            if t >= alpha || t <= -beta {
                return f64::NAN;
            }
            digamma(beta + t) - digamma(alpha - t)
        }
        EnvironmentLaw::Discrete { ref atoms } => {
            let logs: Vec<f64> = atoms.iter().map(|&(w, p)| p.ln() + t * log_rho(w)).collect();
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut num = 0.0;
            let mut den = 0.0;
            for (l, &(w, _)) in logs.iter().zip(atoms) {
                let e = (l - m).exp();
                num += e * log_rho(w);
                den += e;
            }
            num / den
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMethod {
    /// `kappa = alpha - beta` for Beta laws.
    ClosedForm,
    /// Bisection on the exact `Lambda`.
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    pub kappa: f64,
    /// `|Lambda(kappa)|`.
    pub residual: f64,
    pub method: KappaMethod,
}

fn check_transient(law: &EnvironmentLaw) -> Result<()> {
    let m = law.mean_log_rho();
    if !(m < 0.0) {
        return Err(Error::NoRootInUnitInterval(format!(
            "E[ln rho] = {m} is not negative, the walk is not transient to the right"
        )));
    }
    Ok(())
}

/// Solve `E[rho^kappa] = 1` for `kappa` in `(0, 1)`.
///
/// Beta laws use the closed form `alpha - beta`; other laws bisect on
/// `Lambda` over `[1e-6, min(1 - 1e-6, t_max - 1e-6)]`.
pub fn kappa_solve(law: &EnvironmentLaw, tol: f64) -> Result<KappaResult> {
    check_transient(law)?;
    match *law {
        EnvironmentLaw::Beta { alpha, beta } => {
            let kappa = alpha - beta;
            if !(kappa > 0.0 && kappa < 1.0) {
                return Err(Error::NoRootInUnitInterval(format!(
                    "alpha - beta = {kappa} is not in (0, 1)"
                )));
            }
            let residual = lambda_fn(law, kappa)?.abs();
            Ok(KappaResult { kappa, residual, method: KappaMethod::ClosedForm })
        }
        EnvironmentLaw::Discrete { .. } => kappa_bisection(law, tol),
    }
}

/// Bisection on `Lambda` regardless of the law family.
pub fn kappa_bisection(law: &EnvironmentLaw, tol: f64) -> Result<KappaResult> {
    check_transient(law)?;
    let (_, t_max) = law.moment_domain();
    let mut lo = 1e-6;
    let mut hi = (1.0 - 1e-6f64).min(t_max - 1e-6);
    if hi <= lo {
        return Err(Error::NoRootInUnitInterval("empty bracket".into()));
    }
    let f_lo = lambda_fn(law, lo)?;
    let f_hi = lambda_fn(law, hi)?;
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoRootInUnitInterval(format!(
            "Lambda({lo}) = {f_lo}, Lambda({hi}) = {f_hi} do not bracket a root"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda_fn(law, mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (kappa, residual) = {
        let a = lambda_fn(law, lo)?.abs();
        let b = lambda_fn(law, hi)?.abs();
        if a <= b { (lo, a) } else { (hi, b) }
    };
    if residual > tol.max(1e-15) && (hi - lo) > 1e-15 {
        return Err(Error::NoRootInUnitInterval(format!("bisection stalled with residual {residual}")));
    }
    Ok(KappaResult { kappa, residual, method: KappaMethod::Bisection })
}

/// `E[rho^t ln rho]`. Negative values are rejected; at `t = kappa` the
/// moment is positive for every non-degenerate law.
pub fn moment_rho_log(law: &EnvironmentLaw, t: f64) -> Result<f64> {
    let v = match *law {
        EnvironmentLaw::Beta { .. } => lambda_fn(law, t)?.exp() * lambda_derivative(law, t),
        EnvironmentLaw::Discrete { ref atoms } => {
            atoms.iter().map(|&(w, p)| p * rho(w).powf(t) * log_rho(w)).sum()
        }
    };
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("E[rho^{t} ln rho] = {v} is negative, t is not kappa")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateStatus {
    Finite,
    /// `x` below `E[ln rho]`; the value is 0 by convention.
    BelowMean,
    /// The supremum is `+inf`; the value is [`RATE_INFINITE`].
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub value: f64,
    pub status: RateStatus,
}

/// `I(x) = sup_{t >= 0} (t x - Lambda(t))`.
pub fn rate_function(law: &EnvironmentLaw, x: f64) -> Result<RateValue> {
    let m = law.mean_log_rho();
    if x < m {
        return Ok(RateValue { value: 0.0, status: RateStatus::BelowMean });
    }
    if x == m {
        return Ok(RateValue { value: 0.0, status: RateStatus::Finite });
    }
    let (mut lo, mut hi) = match *law {
        EnvironmentLaw::Beta { alpha, .. } => {
            // Lambda' blows up at alpha, so the root lies strictly inside.
            let mut hi = alpha * (1.0 - 1e-15);
            while !(lambda_derivative(law, hi) > x) {
                hi = alpha - (alpha - hi) * 0.5;
            }
            (0.0, hi)
        }
        EnvironmentLaw::Discrete { ref atoms } => {
            let (w_max, p_max) = atoms
                .iter()
                .map(|&(w, p)| (log_rho(w), p))
                .fold((f64::NEG_INFINITY, 0.0), |acc, (l, p)| {
                    if l > acc.0 { (l, p) } else if l == acc.0 { (l, acc.1 + p) } else { acc }
                });
            if x > w_max {
                return Ok(RateValue { value: RATE_INFINITE, status: RateStatus::Infinite });
            }
            if x == w_max {
                return Ok(RateValue { value: -p_max.ln(), status: RateStatus::Finite });
            }
            let mut hi = 1.0;
            while lambda_derivative(law, hi) < x {
                hi *= 2.0;
            }
            (0.0, hi)
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda_derivative(law, mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = [lo, hi]
        .iter()
        .map(|&t| t * x - lambda_fn(law, t).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(RateValue { value, status: RateStatus::Finite })
}
