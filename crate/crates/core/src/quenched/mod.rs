//! Exact quenched quantities for the walk on a finite chain.
//!
//! All sums are taken in the log domain relative to their largest term.
//! Reflection at a site `y` means `omega_y = 1`.

use std::path::Path;

use crate::env_model::{log_rho, EnvironmentSlice};
use crate::special::log_add_exp;
use crate::{Error, Result};

mod oracle;
mod walk;

pub use oracle::{linear_solve_oracle, Functional};
pub use walk::{
    chain_log_laplace, quenched_log_laplace, quenched_mean_crossing_time, sample_crossing_time,
    simulate_walk, StopRule, WalkOptions, WalkOutcome, LEFT_TAIL_LOG_BOUND,
};

/// Environment restricted to the sites `left..=right`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedChain {
    left: i64,
    omegas: Vec<f64>,
    reflect_at: Option<i64>,
}

impl QuenchedChain {
    pub fn new(left: i64, omegas: Vec<f64>, reflect_at: Option<i64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::Domain("a chain needs at least two sites".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
            return Err(Error::Domain(format!("omega = {w} is outside (0, 1)")));
        }
        let right = left + omegas.len() as i64 - 1;
        if let Some(y) = reflect_at {
            if y < left || y > right {
                return Err(Error::Domain(format!("reflection site {y} outside [{left}, {right}]")));
            }
        }
        Ok(QuenchedChain { left, omegas, reflect_at })
    }

    pub fn from_slice(env: &EnvironmentSlice, reflect_at: Option<i64>) -> Result<Self> {
        QuenchedChain::new(env.offset, env.omegas.clone(), reflect_at)
    }

    /// Fixture with one `site omega` pair per line, sites consecutive.
    pub fn read_fixture(path: impl AsRef<Path>, reflect_at: Option<i64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut left = None;
        let mut omegas = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Domain(format!("line {}: expected 'site omega'", i + 1));
            let mut it = line.split_whitespace();
            let site: i64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let w: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let expected = left.unwrap_or(site) + omegas.len() as i64;
            if site != expected {
                return Err(Error::Domain(format!("line {}: site {site} should be {expected}", i + 1)));
            }
            left.get_or_insert(site);
            omegas.push(w);
        }
        QuenchedChain::new(left.unwrap_or(0), omegas, reflect_at)
    }

    pub fn left(&self) -> i64 {
        self.left
    }

    pub fn right(&self) -> i64 {
        self.left + self.omegas.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn reflect_at(&self) -> Option<i64> {
        self.reflect_at
    }

    /// Raw environment value, ignoring reflection.
    pub fn raw_omega(&self, x: i64) -> f64 {
        self.omegas[(x - self.left) as usize]
    }

    /// Right-step probability, 1 at the reflection site.
    pub fn omega(&self, x: i64) -> f64 {
        if self.reflect_at == Some(x) {
            1.0
        } else {
            self.raw_omega(x)
        }
    }

    /// `ln rho_x` with reflection, `-inf` at the reflection site.
    pub fn log_rho(&self, x: i64) -> f64 {
        if self.reflect_at == Some(x) {
            f64::NEG_INFINITY
        } else {
            log_rho(self.raw_omega(x))
        }
    }

    /// `V(x) - V(from)` from the raw environment for `x >= from`.
    pub fn potential_from(&self, from: i64, to: i64) -> Vec<f64> {
        let mut v = Vec::with_capacity((to - from + 1) as usize);
        let mut acc = 0.0;
        v.push(0.0);
        for x in from + 1..=to {
            acc += log_rho(self.raw_omega(x));
            v.push(acc);
        }
        v
    }

    fn check(&self, sites: &[i64]) -> Result<()> {
        for &x in sites {
            if x < self.left || x > self.right() {
                return Err(Error::Domain(format!("site {x} outside [{}, {}]", self.left, self.right())));
            }
        }
        Ok(())
    }
}

/// `ln sum_{k in [from, to)} e^{v[k - base]}`, accumulated left to right.
fn prefix_lse(v: &[f64]) -> Vec<f64> {
    // out[i] = ln sum_{k < i} e^{v[k]}
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut acc = f64::NEG_INFINITY;
    out.push(acc);
    for &x in v {
        acc = log_add_exp(acc, x);
        out.push(acc);
    }
    out
}

fn suffix_lse(v: &[f64]) -> Vec<f64> {
    // out[i] = ln sum_{k >= i} e^{v[k]}
    let mut out = vec![f64::NEG_INFINITY; v.len() + 1];
    for i in (0..v.len()).rev() {
        out[i] = log_add_exp(out[i + 1], v[i]);
    }
    out
}

/// Probability that the walk started at `x` reaches `r` before `l`:
/// `sum_{k=l}^{x-1} e^{V(k)} / sum_{k=l}^{r-1} e^{V(k)}`.
pub fn exit_prob(chain: &QuenchedChain, x: i64, l: i64, r: i64) -> Result<f64> {
    chain.check(&[x, l, r])?;
    if !(l < r && l <= x && x <= r) {
        return Err(Error::Domain(format!("need l <= x <= r and l < r, got {l}, {x}, {r}")));
    }
    let mut w = Vec::with_capacity((r - l) as usize);
    let mut acc = 0.0;
    w.push(acc);
    for k in l + 1..r {
        acc += chain.log_rho(k);
        w.push(acc);
    }
    let pre = prefix_lse(&w);
    Ok((pre[(x - l) as usize] - pre[(r - l) as usize]).exp())
}

/// Probability that one excursion from `b` reaches `d` before returning to
/// `b`: `omega_b e^{V(b)} / sum_{x=b}^{d-1} e^{V(x)}`.
pub fn escape_prob(chain: &QuenchedChain, b: i64, d: i64) -> Result<f64> {
    chain.check(&[b, d])?;
    if b >= d {
        return Err(Error::Domain(format!("need b < d, got {b}, {d}")));
    }
    Ok(chain.omega(b) * exit_prob(chain, b + 1, b, d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HKind {
    /// Conditioned to return to `b` before `d`.
    Failure,
    /// Conditioned to reach `d` before returning to `b`.
    Success,
}

/// Doob transform of the walk on `[b, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HTransform {
    pub kind: HKind,
    pub b: i64,
    pub d: i64,
    /// Transformed `omega_x` for `b <= x <= d`; entries at `b` and `d` are the
    /// raw values.
    pub omegas: Vec<f64>,
    /// Transformed potential for `b <= x <= d`, with the same value as `V` at
    /// `b`. Infinite where a transformed `rho` is 0 or infinite.
    pub potential: Vec<f64>,
    /// Raw potential `V(x)` for `b <= x <= d`.
    pub base: Vec<f64>,
    /// `ln` of the harmonic function at `b..=d`.
    pub log_harmonic: Vec<f64>,
    /// Largest residual of the harmonic equation.
    pub harmonic_residual: f64,
}

impl HTransform {
    pub fn potential_at(&self, x: i64) -> f64 {
        self.potential[(x - self.b) as usize]
    }

    pub fn base_at(&self, x: i64) -> f64 {
        self.base[(x - self.b) as usize]
    }

    pub fn omega_at(&self, x: i64) -> f64 {
        self.omegas[(x - self.b) as usize]
    }
}

/// Transform with `h(x) = P^x(tau(b) < tau(d))` (failure) or
/// `g(x) = P^x(tau(d) < tau(b))` (success).
pub fn h_transform(chain: &QuenchedChain, b: i64, d: i64, kind: HKind) -> Result<HTransform> {
    chain.check(&[b, d])?;
    if d <= b {
        return Err(Error::Domain(format!("need b < d, got b = {b}, d = {d}")));
    }
    if let Some(y) = chain.reflect_at {
        if y > b && y < d {
            return Err(Error::Domain(format!("reflection at {y} inside ({b}, {d})")));
        }
    }
    let len = (d - b + 1) as usize;
    let base: Vec<f64> = {
        let rel = chain.potential_from(b, d);
        rel.into_iter().collect()
    };
    // V on [b, d-1] in the sums
    let terms = &base[..len - 1];
    let pre = prefix_lse(terms); // pre[i] = ln sum_{k=b}^{b+i-1}
    let suf = suffix_lse(terms); // suf[i] = ln sum_{k=b+i}^{d-1}
    let total = pre[len - 1];
    let idx = |x: i64| (x - b) as usize;

    let mut omegas = vec![0.0; len];
    omegas[0] = chain.omega(b);
    omegas[len - 1] = chain.omega(d);
    let mut potential = vec![0.0; len];
    potential[0] = base[0];
    let mut log_harmonic = vec![0.0; len];

    match kind {
        HKind::Failure => {
            for x in b..=d {
                log_harmonic[idx(x)] = suf[idx(x)] - total;
            }
            // ln rho_hat_x = ln rho_x + ln h(x-1) - ln h(x+1), the correction
            // is a difference of monotone suffix sums, hence >= 0.
            let mut extra = 0.0;
            for x in b + 1..=d {
                let corr = if x == d { f64::INFINITY } else { suf[idx(x - 1)] - suf[idx(x + 1)] };
                extra += corr;
                potential[idx(x)] = base[idx(x)] + extra;
                if x < d {
                    let lr = log_rho(chain.raw_omega(x)) + corr;
                    omegas[idx(x)] = 1.0 / (1.0 + lr.exp());
                }
            }
        }
        HKind::Success => {
            // g(x) = pre(x) / total, with g(d + 1) = g(d) = 1.
            for x in b..=d {
                log_harmonic[idx(x)] = pre[idx(x)] - total;
            }
            let pre_at = |x: i64| if x >= d { total } else { pre[idx(x)] };
            potential[0] = f64::INFINITY;
            let mut removed = 0.0;
            for x in b + 1..=d {
                let corr = pre_at(x + 1) - pre_at(x - 1);
                if x > b + 1 {
                    removed += corr;
                }
                potential[idx(x)] = base[idx(x)] - removed;
                if x < d {
                    let lr = log_rho(chain.raw_omega(x)) - corr;
                    omegas[idx(x)] = 1.0 / (1.0 + lr.exp());
                }
            }
        }
    }

    let mut residual = 0.0f64;
    for x in b + 1..d {
        let h = |y: i64| log_harmonic[idx(y)].exp();
        let w = chain.raw_omega(x);
        residual = residual.max((h(x) - w * h(x + 1) - (1.0 - w) * h(x - 1)).abs());
    }
    if residual > 1e-12 {
        return Err(Error::Singular(format!("harmonic residual {residual:e}")));
    }
    Ok(HTransform { kind, b, d, omegas, potential, base, log_harmonic, harmonic_residual: residual })
}

/// Moments of one attempt to cross the valley `[a, d]` from its bottom `b`,
/// for the walk reflected at `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptMoments {
    /// Probability that an excursion from `b` returns to `b` before `d`.
    pub p_fail: f64,
    /// `1 - p_fail`.
    pub escape: f64,
    /// Mean duration of a failed excursion.
    pub mean_f: f64,
    /// Second moment of the duration of a failed excursion.
    pub second_f: f64,
    /// Mean duration of the successful excursion.
    pub mean_g: f64,
    /// `1 + 2 sum_{b < i <= j <= d} e^{Vbar(j) - Vbar(i)}`, an upper bound on `mean_g`.
    pub mean_g_bound: f64,
    /// `sum_{x=a+1}^{d-1} e^{-(Vhat(x) - Vhat(b))}`.
    pub m1_hat: f64,
    /// `sum_{x=b}^{d-1} e^{V(x) - V(c)}`.
    pub m2: f64,
    /// First maximiser of `V` on `[b, d - 1]`.
    pub c: i64,
}

/// Failure and success moments of the excursion decomposition
/// `tau(d) = F_1 + ... + F_N + G`.
pub fn attempt_moments(chain: &QuenchedChain, a: i64, b: i64, d: i64) -> Result<AttemptMoments> {
    chain.check(&[a, b, d])?;
    if !(a < b && b < d) {
        return Err(Error::Domain(format!("need a < b < d, got {a}, {b}, {d}")));
    }
    if let Some(y) = chain.reflect_at {
        if y > a && y < d {
            return Err(Error::Domain(format!("reflection at {y} inside ({a}, {d})")));
        }
    }
    let fail = h_transform(chain, b, d, HKind::Failure)?;
    let succ = h_transform(chain, b, d, HKind::Success)?;
    // V relative to V(a) on [a, d], shifted so that V(b) matches the transforms.
    let raw = chain.potential_from(a, d);
    let shift = fail.base_at(b) - raw[(b - a) as usize];
    let v = |x: i64| raw[(x - a) as usize] + shift;
    let vh = |x: i64| if x <= b { v(x) } else { fail.potential_at(x) };
    let vb = v(b);

    let w_b = chain.omega(b);
    let h_next = fail.log_harmonic[1].exp();
    let escape = w_b * succ.log_harmonic[1].exp();
    let p_fail = (1.0 - w_b) + w_b * h_next;

    // Left excursions: first step b -> b - 1, reflected at a.
    // A[i] = sum_{m=i+1}^{b-1} e^{V(m) - V(i)},  B[i] = sum_{j=a}^{i-1} e^{V(b-1) - V(j)}.
    let nl = (b - a) as usize;
    let mut big_a = vec![0.0; nl];
    for i in (a..b - 1).rev() {
        let k = (i - a) as usize;
        big_a[k] = (v(i + 1) - v(i)).exp() * (1.0 + big_a[k + 1]);
    }
    let mut left_mean = 0.0; // sum_{i=a}^{b-1} e^{-(V(i) - V(b))}
    let mut r_minus = 0.0;
    let mut big_b = 0.0;
    for i in a..b {
        let k = (i - a) as usize;
        let e_i = (v(b - 1) - v(i)).exp();
        r_minus += (1.0 + 2.0 * big_a[k]) * (e_i + 2.0 * big_b);
        big_b += e_i;
        left_mean += (vb - v(i)).exp();
    }

    // Right excursions under the failure transform, first step b -> b + 1.
    // F[i] = e^{-(Vhat(i-1) - Vhat(b))} is the mean number of steps i-1 -> i.
    let f_mean = |i: i64| (-(vh(i - 1) - vb)).exp();
    let mut right_mean = 0.0;
    // suffix[i - b] = sum_{j=i+1}^{d-1} F[j]
    let mut suffix = vec![0.0; (d - b + 1) as usize];
    for i in (b + 1..d - 1).rev() {
        let k = (i - b) as usize;
        suffix[k] = suffix[k + 1] + f_mean(i + 1);
    }
    let mut r_plus = 0.0;
    let mut a_plus = 0.0; // sum_{j=b}^{i-2} e^{Vhat(j) - Vhat(i-1)}
    for i in b + 1..d {
        if i >= b + 2 {
            a_plus = (vh(i - 2) - vh(i - 1)).exp() * (1.0 + a_plus);
        }
        let fi = f_mean(i);
        right_mean += fi;
        r_plus += (1.0 + 2.0 * a_plus) * (fi + 2.0 * suffix[(i - b) as usize]);
    }

    let mean_f = 2.0 * w_b / p_fail * (left_mean + h_next * right_mean);
    let second_f = 4.0 / p_fail * ((1.0 - w_b) * r_minus + w_b * h_next * r_plus);

    // Success: walk from b + 1 under the success transform, which never
    // steps back to b.
    let mut mean_g = 1.0;
    let mut t = 0.0;
    for x in b + 1..d {
        let wb = succ.omega_at(x);
        t = 1.0 / wb + (1.0 - wb) / wb * t;
        mean_g += t;
    }
    let vbar = |x: i64| succ.potential_at(x);
    let mut c_sum = 1.0; // sum_{j=i}^{d} e^{Vbar(j) - Vbar(i)}, starting at i = d
    let mut bound = c_sum;
    for i in (b + 1..d).rev() {
        c_sum = 1.0 + (vbar(i + 1) - vbar(i)).exp() * c_sum;
        bound += c_sum;
    }
    let mean_g_bound = 1.0 + 2.0 * bound;

    let mut m1_hat = 0.0;
    for x in a + 1..d {
        m1_hat += (-(vh(x) - vb)).exp();
    }
    let mut c = b;
    for x in b..d {
        if v(x) > v(c) {
            c = x;
        }
    }
    let m2 = (b..d).map(|x| (v(x) - v(c)).exp()).sum();

    let out = AttemptMoments { p_fail, escape, mean_f, second_f, mean_g, mean_g_bound, m1_hat, m2, c };
    if [out.mean_f, out.second_f, out.mean_g, out.mean_g_bound, out.m1_hat]
        .iter()
        .any(|z| !z.is_finite())
    {
        return Err(Error::Domain("attempt moments overflow".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
