//! The potential `V`, ladder epochs, excursions and deep valleys.
//!
//! `V(0) = 0`, `V(x) - V(x - 1) = ln rho_x`. Ladder epochs are the successive
//! weak descending records of `V` on the nonnegative sites, and the excursion
//! between two consecutive ladder epochs has height
//! `max_{e_i <= k <= e_{i+1}} V(k) - V(e_i)`.

use std::path::Path;

use crate::env_model::{log_rho, EnvironmentSlice, LazyEnvironment};
use crate::{Error, Result, Side};

/// `V` on the sites `offset, ..., offset + len - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPath {
    offset: i64,
    values: Vec<f64>,
}

impl PotentialPath {
    pub fn from_values(offset: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empty potential path".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("potential values must be finite".into()));
        }
        Ok(PotentialPath { offset, values })
    }

    /// One value per line starting at site 0; blank lines and `#` comments
    /// are skipped.
    pub fn read_values(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse::<f64>().map_err(|_| {
                Error::Domain(format!("line {}: '{line}' is not a number", i + 1))
            })?);
        }
        PotentialPath::from_values(0, values)
    }

    /// Sites `lo..=hi` of a lazily generated environment.
    pub fn from_lazy(env: &mut LazyEnvironment, lo: i64, hi: i64) -> Self {
        build_potential(&env.slice(lo, hi)).expect("nonempty window")
    }

    pub fn start(&self) -> i64 {
        self.offset
    }

    /// Last site, inclusive.
    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.offset && x <= self.end()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `V(x)`; panics outside the window.
    #[inline]
    pub fn v(&self, x: i64) -> f64 {
        self.values[(x - self.offset) as usize]
    }

    pub fn get(&self, x: i64) -> Result<f64> {
        if x < self.offset {
            Err(Error::WindowExhausted { side: Side::Left, site: x })
        } else if x > self.end() {
            Err(Error::WindowExhausted { side: Side::Right, site: x })
        } else {
            Ok(self.v(x))
        }
    }

    fn check_range(&self, x: i64, y: i64) -> Result<()> {
        if x > y {
            return Err(Error::Domain(format!("bad range [{x}, {y}]")));
        }
        self.get(x)?;
        self.get(y)?;
        Ok(())
    }
}

/// `V` over the window of `env`. When the window contains site 0 the path is
/// anchored at `V(0) = 0`, otherwise at `V(offset) = 0`.
pub fn build_potential(env: &EnvironmentSlice) -> Result<PotentialPath> {
    if env.is_empty() {
        return Err(Error::Domain("empty environment".into()));
    }
    let lo = env.offset;
    let hi = env.end();
    let anchor = if lo <= 0 && 0 <= hi { 0 } else { lo };
    let mut values = vec![0.0; env.len()];
    let idx = |x: i64| (x - lo) as usize;
    for x in anchor + 1..=hi {
        values[idx(x)] = values[idx(x - 1)] + log_rho(env.omega(x));
    }
    for x in (lo..anchor).rev() {
        values[idx(x)] = values[idx(x + 1)] - log_rho(env.omega(x + 1));
    }
    Ok(PotentialPath { offset: lo, values })
}

/// One excursion of `V` above its ladder level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    /// Position in the excursion sequence, from 0.
    pub index: usize,
    /// Ladder epoch `e_i`.
    pub start: i64,
    /// Ladder epoch `e_{i+1}`.
    pub end: i64,
    /// `max_{[start, end]} V - V(start)`.
    pub height: f64,
    /// First site where the maximum is attained.
    pub peak: i64,
}

/// Incremental ladder-epoch detector; feed `V` site by site.
#[derive(Debug, Clone)]
pub struct ExcursionScanner {
    next_site: i64,
    epoch: i64,
    epoch_value: f64,
    max_value: f64,
    peak: i64,
    count: usize,
}

impl ExcursionScanner {
    /// Start at site `site` with value `value`, which is the first ladder epoch.
    pub fn new(site: i64, value: f64) -> Self {
        ExcursionScanner {
            next_site: site + 1,
            epoch: site,
            epoch_value: value,
            max_value: value,
            peak: site,
            count: 0,
        }
    }

    /// Site expected by the next call to [`push`](Self::push).
    pub fn next_site(&self) -> i64 {
        self.next_site
    }

    /// Feed `V(next_site)`; returns the excursion it completes, if any.
    #[inline]
    pub fn push(&mut self, value: f64) -> Option<Excursion> {
        let site = self.next_site;
        self.next_site += 1;
        if value <= self.epoch_value {
            let ex = Excursion {
                index: self.count,
                start: self.epoch,
                end: site,
                height: self.max_value - self.epoch_value,
                peak: self.peak,
            };
            self.count += 1;
            self.epoch = site;
            self.epoch_value = value;
            self.max_value = value;
            self.peak = site;
            Some(ex)
        } else {
            if value > self.max_value {
                self.max_value = value;
                self.peak = site;
            }
            None
        }
    }

    /// Number of completed excursions.
    pub fn count(&self) -> usize {
        self.count
    }
}

/// All complete excursions starting from site 0.
pub fn excursions(path: &PotentialPath) -> Result<Vec<Excursion>> {
    path.get(0)?;
    let mut sc = ExcursionScanner::new(0, path.v(0));
    let mut out = Vec::new();
    for x in 1..=path.end() {
        if let Some(ex) = sc.push(path.v(x)) {
            out.push(ex);
        }
    }
    Ok(out)
}

/// Ladder epochs `e_0 = 0 < e_1 < ...` inside the window.
pub fn ladder_epochs(path: &PotentialPath) -> Result<Vec<i64>> {
    let ex = excursions(path)?;
    let mut out = Vec::with_capacity(ex.len() + 1);
    out.push(0);
    out.extend(ex.iter().map(|e| e.end));
    Ok(out)
}

/// `T_up(h)`: first `x >= 0` at which `V` has risen by `h` above its running
/// minimum on `[0, x]`.
pub fn first_ascent(path: &PotentialPath, h: f64) -> Result<i64> {
    first_ascent_from(path, 0, h)
}

pub fn first_ascent_from(path: &PotentialPath, from: i64, h: f64) -> Result<i64> {
    let mut low = path.get(from)?;
    for x in from..=path.end() {
        let v = path.v(x);
        low = low.min(v);
        if v - low >= h {
            return Ok(x);
        }
    }
    Err(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 })
}

/// `T_down(h)`: first `x >= 0` at which `V` has fallen by `h` below its
/// running maximum on `[0, x]`.
pub fn first_descent(path: &PotentialPath, h: f64) -> Result<i64> {
    let mut high = path.get(0)?;
    for x in 0..=path.end() {
        let v = path.v(x);
        high = high.max(v);
        if v - high <= -h {
            return Ok(x);
        }
    }
    Err(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 })
}

/// First `x >= 0` with `V(x) >= level` when `level >= V(0)`, or with
/// `V(x) <= level` when `level < V(0)`.
pub fn hit_level(path: &PotentialPath, level: f64) -> Result<i64> {
    let up = level >= path.get(0)?;
    (0..=path.end())
        .find(|&x| if up { path.v(x) >= level } else { path.v(x) <= level })
        .ok_or(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 })
}

/// `max_{x <= i <= j <= y} (V(j) - V(i))`, the largest rise on `[x, y]`.
pub fn max_increment(path: &PotentialPath, x: i64, y: i64) -> Result<f64> {
    path.check_range(x, y)?;
    let mut low = f64::INFINITY;
    let mut best = 0.0f64;
    for k in x..=y {
        let v = path.v(k);
        low = low.min(v);
        best = best.max(v - low);
    }
    Ok(best)
}

/// `min_{x <= i <= j <= y} (V(j) - V(i))`, the largest fall on `[x, y]` (a
/// nonpositive number).
pub fn min_increment(path: &PotentialPath, x: i64, y: i64) -> Result<f64> {
    path.check_range(x, y)?;
    let mut high = f64::NEG_INFINITY;
    let mut best = 0.0f64;
    for k in x..=y {
        let v = path.v(k);
        high = high.max(v);
        best = best.min(v - high);
    }
    Ok(best)
}

/// Depth thresholds for the walk run up to the `n`-th ladder epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValleyThresholds {
    pub n: u64,
    pub epsilon: f64,
    pub kappa: f64,
    /// Minimal excursion height `(1 - epsilon) / kappa * ln n`.
    pub height: f64,
    /// Flank depth `(1 + 1/kappa) * ln n`.
    pub depth: f64,
}

impl ValleyThresholds {
    pub fn new(n: u64, epsilon: f64, kappa: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("n = {n} must be at least 2")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Regime(format!("kappa = {kappa} must lie in (0, 1)")));
        }
        let ln_n = (n as f64).ln();
        Ok(ValleyThresholds {
            n,
            epsilon,
            kappa,
            height: (1.0 - epsilon) / kappa * ln_n,
            depth: (1.0 + 1.0 / kappa) * ln_n,
        })
    }
}

/// A deep valley `a < b <= t_up <= c < d_bar <= d` built on a high excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepValley {
    /// 1-based rank among high excursions.
    pub j: usize,
    /// Index of the underlying excursion.
    pub excursion: usize,
    pub a: i64,
    pub b: i64,
    /// First site after `b` where `V - V(b)` reaches the height threshold.
    pub t_up: i64,
    pub c: i64,
    pub d_bar: i64,
    pub d: i64,
    pub height: f64,
}

impl DeepValley {
    pub fn width(&self) -> i64 {
        self.d - self.a
    }

    pub fn quadruple(&self) -> (i64, i64, i64, i64) {
        (self.a, self.b, self.c, self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepValleyScan {
    pub thresholds: ValleyThresholds,
    /// The `n`-th ladder epoch.
    pub e_n: i64,
    /// Number of high excursions among excursions `0..=n`.
    pub k_n: usize,
    /// Valleys `1..=k_n`.
    pub valleys: Vec<DeepValley>,
    /// Excursion index of the first high excursion after `n`, if seen.
    pub next_excursion: Option<usize>,
    /// Valley `k_n + 1`, if it fits in the window.
    pub next: Option<DeepValley>,
    /// Complete excursions available in the window.
    pub excursions_scanned: usize,
}

fn scan_left_until(path: &PotentialPath, from: i64, pred: impl Fn(f64) -> bool) -> Result<i64> {
    let mut k = from;
    while k >= path.start() {
        if pred(path.v(k)) {
            return Ok(k);
        }
        k -= 1;
    }
    Err(Error::WindowExhausted { side: Side::Left, site: path.start() - 1 })
}

fn scan_right_until(path: &PotentialPath, from: i64, pred: impl Fn(f64) -> bool) -> Result<i64> {
    let mut k = from;
    while k <= path.end() {
        if pred(path.v(k)) {
            return Ok(k);
        }
        k += 1;
    }
    Err(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 })
}

fn valley_on(path: &PotentialPath, ex: &Excursion, j: usize, thr: &ValleyThresholds) -> Result<DeepValley> {
    let b = ex.start;
    let vb = path.v(b);
    let t_up = scan_right_until(path, b, |v| v - vb >= thr.height)?;
    let a = scan_left_until(path, b - 1, |v| v - vb >= thr.depth)?;
    let vdb = path.v(ex.end);
    let d = scan_right_until(path, ex.end + 1, |v| v - vdb <= -thr.depth)?;
    Ok(DeepValley {
        j,
        excursion: ex.index,
        a,
        b,
        t_up,
        c: ex.peak,
        d_bar: ex.end,
        d,
        height: ex.height,
    })
}

/// Deep valleys on the excursions of height at least `thr.height` among the
/// first `n + 1` excursions, plus the following one when the window allows.
pub fn detect_deep_valleys(path: &PotentialPath, thr: &ValleyThresholds) -> Result<DeepValleyScan> {
    let ex = excursions(path)?;
    let n = thr.n as usize;
    if ex.len() < n {
        return Err(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 });
    }
    let e_n = if n == 0 { 0 } else { ex[n - 1].end };
    let mut valleys = Vec::new();
    let mut next_excursion = None;
    let mut next = None;
    for e in ex.iter().filter(|e| e.height >= thr.height) {
        let j = valleys.len() + 1;
        if e.index <= n {
            valleys.push(valley_on(path, e, j, thr)?);
        } else {
            next_excursion = Some(e.index);
            next = valley_on(path, e, j, thr).ok();
            break;
        }
    }
    Ok(DeepValleyScan {
        thresholds: *thr,
        e_n,
        k_n: valleys.len(),
        valleys,
        next_excursion,
        next,
        excursions_scanned: ex.len(),
    })
}

/// A valley found by the shift-and-search construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarValley {
    pub j: usize,
    /// Search origin: 0 for the first valley, then the previous `d`.
    pub origin: i64,
    pub gamma: i64,
    pub a: i64,
    pub b: i64,
    pub t_star: i64,
    pub c: i64,
    pub d_bar: i64,
    pub d: i64,
}

impl StarValley {
    pub fn quadruple(&self) -> (i64, i64, i64, i64) {
        (self.a, self.b, self.c, self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarValleyScan {
    /// Number of valleys whose `t_star` is at most `e_n`.
    pub k_n: usize,
    pub valleys: Vec<StarValley>,
}

/// Shift-and-search valleys: from each origin, wait for a fall of `depth`,
/// then for a rise of `height`; the valley bottom is the last minimum before
/// that rise. Stops once `t_star` passes `e_n`.
pub fn detect_star_valleys(path: &PotentialPath, thr: &ValleyThresholds, e_n: i64) -> Result<StarValleyScan> {
    let mut valleys = Vec::new();
    let mut origin = 0i64;
    loop {
        let v0 = path.get(origin)?;
        let stop = |k: i64| k > e_n;
        // gamma: first fall of depth below V(origin)
        let mut k = origin;
        let gamma = loop {
            if stop(k) {
                return Ok(StarValleyScan { k_n: valleys.len(), valleys });
            }
            let v = path.get(k)?;
            if v - v0 <= -thr.depth {
                break k;
            }
            k += 1;
        };
        // t_star: first rise of height above the running minimum from gamma;
        // b is the last site attaining that minimum.
        let mut low = path.v(gamma);
        let mut b = gamma;
        let mut k = gamma;
        let t_star = loop {
            if stop(k) {
                return Ok(StarValleyScan { k_n: valleys.len(), valleys });
            }
            let v = path.get(k)?;
            if v <= low {
                low = v;
                b = k;
            }
            if v - low >= thr.height {
                break k;
            }
            k += 1;
        };
        let vb = path.v(b);
        let a = scan_left_until(path, b - 1, |v| v - vb >= thr.depth)?;
        let d_bar = scan_right_until(path, t_star, |v| v <= vb)?;
        let mut c = b;
        for x in b..=d_bar {
            if path.v(x) > path.v(c) {
                c = x;
            }
        }
        let vdb = path.v(d_bar);
        let d = scan_right_until(path, d_bar + 1, |v| v - vdb <= -thr.depth)?;
        valleys.push(StarValley { j: valleys.len() + 1, origin, gamma, a, b, t_star, c, d_bar, d });
        origin = d;
    }
}

/// Whether both constructions find the same number of valleys before `e_n`
/// with identical `(a, b, c, d)`.
pub fn valleys_coincide(deep: &DeepValleyScan, star: &StarValleyScan) -> bool {
    deep.k_n == star.k_n
        && deep
            .valleys
            .iter()
            .zip(&star.valleys)
            .all(|(x, y)| x.quadruple() == y.quadruple())
}

/// Constants of the good-environment events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodEventParams {
    /// `e_n < c_prime * n`.
    pub c_prime: f64,
    /// `d_j - a_j <= c_double_prime * ln n`.
    pub c_double_prime: f64,
    /// Flank regularity `delta * ln n`.
    pub delta: f64,
    /// Probability that an excursion reaches the height threshold.
    pub q_n: f64,
}

impl GoodEventParams {
    /// `c' = 2 (E[e_1] + 1)`, `c'' = 40 (1 + 1/kappa)`, `delta = 1.5 epsilon / kappa`.
    pub fn defaults(mean_ladder: f64, kappa: f64, epsilon: f64, q_n: f64) -> Self {
        GoodEventParams {
            c_prime: 2.0 * (mean_ladder + 1.0),
            c_double_prime: 40.0 * (1.0 + 1.0 / kappa),
            delta: 1.5 * epsilon / kappa,
            q_n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoodEnvironment {
    /// Ladder epochs grow linearly.
    pub a1: bool,
    /// Number of deep valleys is close to `n q_n`.
    pub a2: bool,
    /// Deep valleys are well separated.
    pub a3: bool,
    /// Deep valleys are narrow.
    pub a4: bool,
    /// The first deep valley has regular flanks.
    pub a5: bool,
}

impl GoodEnvironment {
    /// The joint event of the first four.
    pub fn joint(&self) -> bool {
        self.a1 && self.a2 && self.a3 && self.a4
    }
}

/// Evaluate the good-environment events. Valley `k_n + 1` must be in the
/// scan whenever a further high excursion was seen.
pub fn check_good_environment(
    path: &PotentialPath,
    scan: &DeepValleyScan,
    p: &GoodEventParams,
) -> Result<GoodEnvironment> {
    let thr = &scan.thresholds;
    let n = thr.n as f64;
    let ln_n = n.ln();
    let a1 = (scan.e_n as f64) < p.c_prime * n;

    let spread = n.powf(-thr.epsilon / 4.0);
    let lo = (n * p.q_n * (1.0 - spread)).floor();
    let hi = (n * p.q_n * (1.0 + spread)).ceil();
    let k = scan.k_n as f64;
    let a2 = lo <= k && k <= hi;

    let gap = n.powf(1.0 - 3.0 * thr.epsilon);
    let mut sigma: Vec<f64> = vec![0.0];
    sigma.extend(scan.valleys.iter().map(|v| v.excursion as f64));
    let mut a3 = sigma.windows(2).all(|w| w[1] - w[0] >= gap);
    match scan.next_excursion {
        Some(s) => a3 &= s as f64 - sigma.last().unwrap() >= gap,
        None => {
            let seen = scan.excursions_scanned as f64 - sigma.last().unwrap();
            if seen < gap {
                return Err(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 });
            }
        }
    }

    let width_cap = p.c_double_prime * ln_n;
    let mut a4 = scan.valleys.iter().all(|v| (v.width() as f64) <= width_cap);
    if scan.next_excursion.is_some() {
        let next = scan
            .next
            .ok_or(Error::WindowExhausted { side: Side::Right, site: path.end() + 1 })?;
        a4 &= (next.width() as f64) <= width_cap;
    }

    let a5 = match scan.valleys.first().or(scan.next.as_ref()) {
        None => true,
        Some(v) => {
            let worst = max_increment(path, v.a, v.b)?
                .max(-min_increment(path, v.b, v.c)?)
                .max(max_increment(path, v.c, v.d)?);
            worst <= p.delta * ln_n
        }
    };
    Ok(GoodEnvironment { a1, a2, a3, a4, a5 })
}
