//! Direct solution of first-step equations on a finite chain.
//!
//! Each quantity solves `u(x) = omega_x u(x+1) + (1 - omega_x) u(x-1) + f(x)`
//! at transient sites with prescribed values at absorbing sites. Elimination
//! runs left to right and keeps both `c_x` and `1 - c_x` so that every pivot
//! is a sum of nonnegative terms; this keeps small probabilities accurate to
//! full relative precision.

use super::QuenchedChain;
use crate::{Error, Result};

/// Quantity computed by [`linear_solve_oracle`], as a function of the
/// starting site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    /// Probability of being absorbed at the given site.
    HitProb(i64),
    /// Expected absorption time.
    ExpectedTime,
    /// Second moment of the absorption time.
    SecondMomentTime,
    /// Expected absorption time given absorption at the given site.
    ConditionedTime(i64),
    /// Second moment of the absorption time given absorption at the given site.
    ConditionedSecondMoment(i64),
}

/// Solve for `functional` at every site of `chain` (indexed from
/// `chain.left()`). The right end must be absorbing; the left end must be
/// absorbing or reflecting.
pub fn linear_solve_oracle(chain: &QuenchedChain, absorbing: &[i64], functional: Functional) -> Result<Vec<f64>> {
    let lo = chain.left();
    let hi = chain.right();
    let mut is_abs = vec![false; chain.len()];
    for &x in absorbing {
        if x < lo || x > hi {
            return Err(Error::Domain(format!("absorbing site {x} outside [{lo}, {hi}]")));
        }
        is_abs[(x - lo) as usize] = true;
    }
    if !is_abs[chain.len() - 1] {
        return Err(Error::Singular("right end of the chain is not absorbing".into()));
    }
    if !is_abs[0] && chain.omega(lo) < 1.0 {
        return Err(Error::Singular("left end of the chain is neither absorbing nor reflecting".into()));
    }
    let zeros = vec![0.0; chain.len()];
    let hit = |t: i64| -> Result<Vec<f64>> {
        if !absorbing.contains(&t) {
            return Err(Error::Domain(format!("target {t} is not absorbing")));
        }
        let bv: Vec<f64> = (lo..=hi).map(|x| if x == t { 1.0 } else { 0.0 }).collect();
        Ok(solve(chain, &is_abs, &bv, &zeros))
    };
    let ones: Vec<f64> = vec![1.0; chain.len()];
    match functional {
        Functional::HitProb(t) => hit(t),
        Functional::ExpectedTime => Ok(solve(chain, &is_abs, &zeros, &ones)),
        Functional::SecondMomentTime => {
            let m1 = solve(chain, &is_abs, &zeros, &ones);
            let f: Vec<f64> = m1.iter().map(|m| 2.0 * m - 1.0).collect();
            Ok(solve(chain, &is_abs, &zeros, &f))
        }
        Functional::ConditionedTime(t) => {
            let u = hit(t)?;
            let w = solve(chain, &is_abs, &zeros, &u);
            Ok(w.iter().zip(&u).map(|(w, u)| w / u).collect())
        }
        Functional::ConditionedSecondMoment(t) => {
            let u = hit(t)?;
            let w = solve(chain, &is_abs, &zeros, &u);
            let f: Vec<f64> = w.iter().zip(&u).map(|(w, u)| 2.0 * w - u).collect();
            let z = solve(chain, &is_abs, &zeros, &f);
            Ok(z.iter().zip(&u).map(|(z, u)| z / u).collect())
        }
    }
}

/// `u = boundary` on absorbing sites, `u = P u + f` elsewhere.
fn solve(chain: &QuenchedChain, is_abs: &[bool], boundary: &[f64], f: &[f64]) -> Vec<f64> {
    let n = chain.len();
    let lo = chain.left();
    let mut c = vec![0.0; n];
    let mut s = vec![1.0; n];
    let mut g = vec![0.0; n];
    for i in 0..n {
        if is_abs[i] {
            c[i] = 0.0;
            s[i] = 1.0;
            g[i] = boundary[i];
            continue;
        }
        let w = chain.omega(lo + i as i64);
        let l = 1.0 - w;
        if i == 0 || l == 0.0 {
            // forced right step
            c[i] = 1.0;
            s[i] = 0.0;
            g[i] = f[i];
            continue;
        }
        let p = w + l * s[i - 1];
        c[i] = w / p;
        s[i] = l * s[i - 1] / p;
        g[i] = (f[i] + l * g[i - 1]) / p;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = g[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = c[i] * u[i + 1] + g[i];
    }
    u
}
