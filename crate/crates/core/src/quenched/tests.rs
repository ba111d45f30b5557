use rand::Rng;
use super::*;
use crate::env_model::{sample_environment, EnvironmentLaw, LazyEnvironment};
use crate::rng;
use proptest::prelude::*;

fn flat(len: usize, reflect_at: Option<i64>) -> QuenchedChain {
    QuenchedChain::new(0, vec![0.5; len], reflect_at).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random chain on `[0, len]` from Beta(1.5, 1), reflected at 0, with a
/// random bottom `b` and right end `d = len`.
fn random_chain(seed: u64) -> (QuenchedChain, i64, i64, i64) {
    let law = EnvironmentLaw::beta(1.5, 1.0).unwrap();
    let mut r = rng::stream(seed, 99);
    let len = r.random_range(3..=50i64);
    let env = sample_environment(&law, 0, len, seed).unwrap();
    let chain = QuenchedChain::from_slice(&env, Some(0)).unwrap();
    let b = r.random_range(1..len);
    (chain, 0, b, len)
}

#[test]
fn flat_examples() {
    let c = flat(11, None);
    assert!((exit_prob(&c, 3, 0, 10).unwrap() - 0.3).abs() < 1e-15);
    assert!((escape_prob(&flat(3, None), 0, 2).unwrap() - 0.25).abs() < 1e-15);
    let c = flat(3, Some(0));
    let m = attempt_moments(&c, 0, 1, 2).unwrap();
    assert!((m.mean_f - 2.0).abs() < 1e-14);
    assert!((m.second_f - 4.0).abs() < 1e-14);
    assert!((m.p_fail - 0.5).abs() < 1e-15);
    assert_eq!(m.mean_g, 1.0);
    assert!(exit_prob(&c, 5, 0, 2).is_err());
}

#[test]
fn oracle_gamblers_ruin() {
    let len = 21;
    let c = flat(len, None);
    let t = linear_solve_oracle(&c, &[0, 20], Functional::ExpectedTime).unwrap();
    for x in 0..=20 {
        assert!((t[x] - (x * (20 - x)) as f64).abs() < 1e-9);
    }
    let u = linear_solve_oracle(&c, &[0, 20], Functional::HitProb(20)).unwrap();
    for x in 0..=20 {
        assert!((u[x] - x as f64 / 20.0).abs() < 1e-15);
    }
    // right end must absorb
    assert!(matches!(linear_solve_oracle(&c, &[0], Functional::ExpectedTime), Err(Error::Singular(_))));
    assert!(matches!(linear_solve_oracle(&c, &[20], Functional::ExpectedTime), Err(Error::Singular(_))));
    // reflecting left end
    let c = flat(len, Some(0));
    let t = linear_solve_oracle(&c, &[20], Functional::ExpectedTime).unwrap();
    // reflected symmetric walk: E^0 tau(L) = L^2
    assert!((t[0] - 400.0).abs() < 1e-9);
}

#[test]
fn oracle_second_moment_gamblers_ruin() {
    // reflected symmetric walk from 0 to 2: P(tau = 2k) = 2^{-k}
    let c = flat(3, Some(0));
    let m2 = linear_solve_oracle(&c, &[2], Functional::SecondMomentTime).unwrap();
    let exact: f64 = (1..200).map(|k| (2.0 * k as f64).powi(2) * 0.5f64.powi(k)).sum();
    assert!((m2[0] - exact).abs() < 1e-9);
}

/// Oracle value of the mean and second moment of a failed excursion from `b`.
fn oracle_failure(chain: &QuenchedChain, b: i64, d: i64) -> (f64, f64, f64) {
    let u = linear_solve_oracle(chain, &[b, d], Functional::HitProb(b)).unwrap();
    let w = linear_solve_oracle(chain, &[b, d], Functional::ConditionedTime(b)).unwrap();
    let z = linear_solve_oracle(chain, &[b, d], Functional::ConditionedSecondMoment(b)).unwrap();
    let i = |x: i64| (x - chain.left()) as usize;
    let wb = chain.omega(b);
    let p = (1.0 - wb) + wb * u[i(b + 1)];
    let left = if b > chain.left() { (1.0 - wb, w[i(b - 1)], z[i(b - 1)]) } else { (0.0, 0.0, 0.0) };
    let right = (wb * u[i(b + 1)], w[i(b + 1)], z[i(b + 1)]);
    let m1 = [left, right].iter().filter(|t| t.0 > 0.0).map(|t| t.0 * (1.0 + t.1)).sum::<f64>() / p;
    let m2 = [left, right]
        .iter()
        .filter(|t| t.0 > 0.0)
        .map(|t| t.0 * (1.0 + 2.0 * t.1 + t.2))
        .sum::<f64>()
        / p;
    (p, m1, m2)
}

fn oracle_success(chain: &QuenchedChain, b: i64, d: i64) -> f64 {
    if d == b + 1 {
        return 1.0;
    }
    let w = linear_solve_oracle(chain, &[b, d], Functional::ConditionedTime(d)).unwrap();
    1.0 + w[(b + 1 - chain.left()) as usize]
}

#[test]
fn formulas_match_oracle_on_random_chains() {
    for seed in 0..100 {
        let (chain, a, b, d) = random_chain(seed);
        // exit probabilities from every start between two random sites
        let mut r = rng::stream(seed, 7);
        let l = r.random_range(0..d);
        let rr = r.random_range(l + 1..=d);
        let sub = QuenchedChain::new(l, (l..=rr).map(|x| chain.raw_omega(x)).collect(), None).unwrap();
        let u = linear_solve_oracle(&sub, &[l, rr], Functional::HitProb(rr)).unwrap();
        for x in l..=rr {
            let f = exit_prob(&chain, x, l, rr).unwrap();
            let o = u[(x - l) as usize];
            assert!(f == o || rel(f, o) < 1e-9, "seed {seed} x {x}: {f} vs {o}");
        }

        let m = attempt_moments(&chain, a, b, d).unwrap();
        let (p, m1, m2) = oracle_failure(&chain, b, d);
        assert!(rel(m.p_fail, p) < 1e-9, "seed {seed}: p {} vs {p}", m.p_fail);
        assert!(rel(m.mean_f, m1) < 1e-9, "seed {seed}: mean_f {} vs {m1}", m.mean_f);
        assert!(rel(m.second_f, m2) < 1e-9, "seed {seed}: second_f {} vs {m2}", m.second_f);
        let esc = escape_prob(&chain, b, d).unwrap();
        assert!(rel(esc, 1.0 - p) < 1e-9 && rel(m.escape, esc) < 1e-12);
        let g = oracle_success(&chain, b, d);
        assert!(rel(m.mean_g, g) < 1e-9, "seed {seed}: mean_g {} vs {g}", m.mean_g);
        assert!(m.mean_g <= m.mean_g_bound);
        assert!(m.m1_hat >= 1.0 && m.m2 >= 1.0);

        // tau(d) from b = N failures + one success, N geometric
        let t = linear_solve_oracle(&chain, &[d], Functional::ExpectedTime).unwrap();
        let direct = t[(b - a) as usize];
        let decomposed = m.p_fail / (1.0 - m.p_fail) * m.mean_f + g;
        assert!(rel(decomposed, direct) < 1e-9, "seed {seed}: {decomposed} vs {direct}");
    }
}

#[test]
fn transforms_order_the_potential() {
    for seed in 0..100 {
        let (chain, _, b, d) = random_chain(seed);
        if d - b < 2 {
            continue;
        }
        let fail = h_transform(&chain, b, d, HKind::Failure).unwrap();
        let succ = h_transform(&chain, b, d, HKind::Success).unwrap();
        let v = |x: i64| fail.base_at(x);
        let mut c = b;
        for x in b..d {
            if v(x) > v(c) {
                c = x;
            }
        }
        for x in b..=c {
            for y in x + 1..=c {
                let lhs = fail.potential_at(y) - fail.potential_at(x);
                assert!(lhs >= v(y) - v(x), "seed {seed} ({x},{y}): {lhs} < {}", v(y) - v(x));
            }
        }
        for x in c..=d {
            for y in x + 1..=d {
                let lhs = succ.potential_at(y) - succ.potential_at(x);
                assert!(lhs <= v(y) - v(x), "seed {seed} ({x},{y}): {lhs} > {}", v(y) - v(x));
            }
        }
        for x in b + 2..d - 1 {
            let w = fail.omega_at(x);
            assert!(w > 0.0 && w < 1.0);
            let w = succ.omega_at(x);
            assert!(w > 0.0 && w < 1.0);
        }
        assert!(fail.harmonic_residual <= 1e-12 && succ.harmonic_residual <= 1e-12);
    }
}

#[test]
fn attempt_rejects_bad_order() {
    let c = flat(10, Some(0));
    assert!(attempt_moments(&c, 3, 2, 5).is_err());
    assert!(attempt_moments(&c, 0, 5, 5).is_err());
    assert!(attempt_moments(&c, 0, 5, 20).is_err());
}

#[test]
fn fixture_round_trip() {
    let dir = std::env::temp_dir().join(format!("rwre-chain-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("chain.txt");
    std::fs::write(&f, "# site omega\n-1 0.4\n0 0.7\n1 0.55\n").unwrap();
    let c = QuenchedChain::read_fixture(&f, None).unwrap();
    assert_eq!((c.left(), c.right()), (-1, 1));
    assert_eq!(c.raw_omega(0), 0.7);
    std::fs::write(&f, "0 0.4\n2 0.7\n").unwrap();
    assert!(QuenchedChain::read_fixture(&f, None).is_err());
}

proptest! {
    #[test]
    fn exit_prob_is_monotone(ws in proptest::collection::vec(0.05f64..0.95, 3..40)) {
        let n = ws.len() as i64 - 1;
        let c = QuenchedChain::new(0, ws, None).unwrap();
        let mut prev = 0.0;
        for x in 0..=n {
            let p = exit_prob(&c, x, 0, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p >= prev);
            prev = p;
        }
        prop_assert_eq!(exit_prob(&c, 0, 0, n).unwrap(), 0.0);
        prop_assert_eq!(exit_prob(&c, n, 0, n).unwrap(), 1.0);
    }

    #[test]
    fn laplace_is_monotone_and_bounded(seed in 0u64..200, n in 2i64..200) {
        let law = EnvironmentLaw::beta(1.5, 1.0).unwrap();
        let mut env = LazyEnvironment::new(&law, seed);
        let s = [1e-6, 1e-4, 1e-2, 1.0];
        let l = quenched_log_laplace(&mut env, 0, n, None, &s).unwrap();
        for w in l.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        // tau(n) >= n
        prop_assert!(l[3] <= -(n as f64) + 1e-9);
        prop_assert!(l[0] <= 0.0);
    }
}

/// Environment with drift to the right, for Monte Carlo checks.
fn mc_env(seed: u64) -> LazyEnvironment {
    LazyEnvironment::new(&EnvironmentLaw::beta(3.0, 1.0).unwrap(), seed)
}

#[test]
fn walk_hits_match_exit_formula() {
    let mut env = mc_env(5);
    let chain = QuenchedChain::from_slice(&env.slice(-5, 15), None).unwrap();
    let p = exit_prob(&chain, 3, -5, 15).unwrap();
    let reps = 20_000;
    let mut hits = 0;
    for k in 0..reps {
        // stop at whichever boundary is hit first
        let mut x = 3i64;
        let mut r = rng::stream(11, k);
        while x > -5 && x < 15 {
            x += if rng::open01(&mut r) < env.omega(x) { 1 } else { -1 };
        }
        hits += (x == 15) as u32;
    }
    let est = hits as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((est - p).abs() < 5.0 * se + 1e-12, "{est} vs {p}");
}

#[test]
fn fast_and_step_samplers_agree() {
    let mut env = mc_env(2);
    let reps = 4000u64;
    let mut step = Vec::new();
    let mut fast = Vec::new();
    for k in 0..reps {
        let mut o = WalkOptions::hit(0, 30);
        o.reflect_at = Some(-3);
        step.push(simulate_walk(&mut env, &o, k).steps as f64);
        o.fast_path = true;
        fast.push(simulate_walk(&mut env, &o, k + 1_000_000).steps as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let exact = quenched_mean_crossing_time(&mut env, 0, 30, Some(-3)).unwrap();
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let se = (var(&step) / reps as f64).sqrt();
    assert!((mean(&step) - exact).abs() < 5.0 * se, "step {} vs {exact}", mean(&step));
    assert!((mean(&fast) - exact).abs() < 5.0 * se, "fast {} vs {exact}", mean(&fast));
    let crit = 1.95 * (2.0 / reps as f64).sqrt();
    assert!(crate::stats::ks_two_sample(&step, &fast) < crit);
}

#[test]
fn laplace_matches_sampled_times() {
    let mut env = mc_env(3);
    let s = [0.01, 0.05];
    let exact = quenched_log_laplace(&mut env, 0, 25, None, &s).unwrap();
    let mut r = rng::stream(4, 0);
    let reps = 20_000;
    let mut acc = [0.0; 2];
    for _ in 0..reps {
        let t = sample_crossing_time(&mut env, 0, 25, None, &mut r, u64::MAX).unwrap() as f64;
        for (a, s) in acc.iter_mut().zip(&s) {
            *a += (-s * t).exp();
        }
    }
    for i in 0..2 {
        let est = acc[i] / reps as f64;
        let e = exact[i].exp();
        assert!((est - e).abs() < 5.0 * (e * (1.0 - e) / reps as f64).sqrt(), "{est} vs {e}");
    }
}

#[test]
fn mean_time_matches_oracle() {
    let mut env = mc_env(8);
    let chain = QuenchedChain::from_slice(&env.slice(-4, 20), Some(-4)).unwrap();
    let t = linear_solve_oracle(&chain, &[20], Functional::ExpectedTime).unwrap();
    let q = quenched_mean_crossing_time(&mut env, 0, 20, Some(-4)).unwrap();
    assert!(rel(q, t[4]) < 1e-10);
    // Laplace derivative at 0 is the mean
    let s = 1e-7;
    let l = quenched_log_laplace(&mut env, 0, 20, Some(-4), &[s]).unwrap()[0];
    assert!(rel(-l / s, q) < 1e-4);
}

#[test]
fn walk_respects_cap_and_steps() {
    let mut env = mc_env(1);
    let mut o = WalkOptions::hit(0, 1_000_000);
    o.step_cap = 100;
    let out = simulate_walk(&mut env, &o, 1);
    assert!(out.truncated && out.steps == 100);
    o.stop = StopRule::Steps(50);
    o.record_trace = true;
    let out = simulate_walk(&mut env, &o, 1);
    assert!(!out.truncated && out.steps == 50);
    let tr = out.trace.unwrap();
    assert_eq!(tr.len(), 51);
    assert!(tr.windows(2).all(|w| (w[1] - w[0]).abs() == 1));
    let a = simulate_walk(&mut env, &WalkOptions::hit(0, 40), 9);
    let b = simulate_walk(&mut env, &WalkOptions::hit(0, 40), 9);
    assert_eq!(a, b);
    assert_eq!(simulate_walk(&mut env, &WalkOptions::hit(3, 3), 9).steps, 0);
}
