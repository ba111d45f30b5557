//! Reference computations shared by the acceptance run: random test chains
//! and linear-solve oracle values for crossing attempts.

use rwre::env_model::{sample_environment, EnvironmentLaw};
use rwre::quenched::{linear_solve_oracle, Functional, QuenchedChain};
use rwre::rng;

/// Integer in `[lo, hi]` from a uniform `u` in `(0, 1)`.
pub fn uniform_int(u: f64, lo: i64, hi: i64) -> i64 {
    (lo + (u * (hi - lo + 1) as f64).floor() as i64).min(hi)
}

/// Relative error of `a` against the reference `b`.
pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Chain on `[0, len]`, `3 <= len <= 50`, with Beta(1.5, 1) sites, reflected
/// at 0. Returns `(chain, a = 0, b, d = len)` with a random bottom `b`.
pub fn test_chain(seed: u64) -> (QuenchedChain, i64, i64, i64) {
    let law = EnvironmentLaw::beta(1.5, 1.0).unwrap();
    let mut r = rng::stream(seed, 99);
    let len = uniform_int(rng::open01(&mut r), 3, 50);
    let env = sample_environment(&law, 0, len, seed).unwrap();
    let chain = QuenchedChain::from_slice(&env, Some(0)).unwrap();
    let b = uniform_int(rng::open01(&mut r), 1, len - 1);
    (chain, 0, b, len)
}

/// `(P(fail), E[F | fail], E[F^2 | fail])` for an excursion from `b` that
/// returns to `b` before hitting `d`, from the absorbed linear systems.
pub fn oracle_failure(chain: &QuenchedChain, b: i64, d: i64) -> (f64, f64, f64) {
    let u = linear_solve_oracle(chain, &[b, d], Functional::HitProb(b)).unwrap();
    let w = linear_solve_oracle(chain, &[b, d], Functional::ConditionedTime(b)).unwrap();
    let z = linear_solve_oracle(chain, &[b, d], Functional::ConditionedSecondMoment(b)).unwrap();
    let i = |x: i64| (x - chain.left()) as usize;
    let wb = chain.omega(b);
    let p = (1.0 - wb) + wb * u[i(b + 1)];
    let left = if b > chain.left() { (1.0 - wb, w[i(b - 1)], z[i(b - 1)]) } else { (0.0, 0.0, 0.0) };
    let right = (wb * u[i(b + 1)], w[i(b + 1)], z[i(b + 1)]);
    let sides = [left, right];
    let m1 = sides.iter().filter(|t| t.0 > 0.0).map(|t| t.0 * (1.0 + t.1)).sum::<f64>() / p;
    let m2 = sides.iter().filter(|t| t.0 > 0.0).map(|t| t.0 * (1.0 + 2.0 * t.1 + t.2)).sum::<f64>() / p;
    (p, m1, m2)
}

/// `E[G]`, the length of a successful excursion from `b` to `d`.
pub fn oracle_success(chain: &QuenchedChain, b: i64, d: i64) -> f64 {
    if d == b + 1 {
        return 1.0;
    }
    let w = linear_solve_oracle(chain, &[b, d], Functional::ConditionedTime(d)).unwrap();
    1.0 + w[(b + 1 - chain.left()) as usize]
}
