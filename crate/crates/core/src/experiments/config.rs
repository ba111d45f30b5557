//! Plain-text `key = value` configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::env_model::EnvironmentLaw;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Tau,
    Position,
    Census,
    Reduction,
    Crossing,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Tau => "tau",
            ExperimentKind::Position => "position",
            ExperimentKind::Census => "census",
            ExperimentKind::Reduction => "reduction",
            ExperimentKind::Crossing => "crossing",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "tau" => ExperimentKind::Tau,
            "position" => ExperimentKind::Position,
            "census" => ExperimentKind::Census,
            "reduction" => ExperimentKind::Reduction,
            "crossing" => ExperimentKind::Crossing,
            other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub law: EnvironmentLaw,
    /// Target levels (walk length for the position experiment).
    pub n_values: Vec<u64>,
    /// Replicas (environments for census and reduction), either one count or
    /// one per entry of `n_values`.
    pub replicas: Vec<usize>,
    pub epsilon: f64,
    pub lambda_grid: Vec<f64>,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub step_cap: u64,
    /// Heights for the crossing-time fit.
    pub h_grid: Vec<f64>,
    /// Monte Carlo size for predicted limit laws and importance-sampled `q_n`.
    pub mc_samples: usize,
    /// Draw `tau(n)` samples; the Laplace columns are exact either way.
    pub sample_tau: bool,
    /// Perpetuities used when `C_K` has no closed form.
    pub kesten_series: usize,
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn new(law: EnvironmentLaw) -> Self {
        ExperimentConfig {
            law,
            n_values: vec![1000],
            replicas: vec![1000],
            epsilon: 0.2,
            lambda_grid: vec![0.5, 1.0, 2.0],
            master_seed: 1,
            output_dir: None,
            step_cap: 1_000_000_000_000_000_000,
            h_grid: vec![3.0, 4.0, 5.0, 6.0, 7.0],
            mc_samples: 100_000,
            sample_tau: true,
            kesten_series: 2_000_000,
            svg: false,
        }
    }

    pub fn replicas_for(&self, i: usize) -> usize {
        if self.replicas.len() == 1 {
            self.replicas[0]
        } else {
            self.replicas[i]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_values must be nonempty and increasing".into());
        }
        if self.n_values[0] < 2 {
            return bad("n_values must be at least 2".into());
        }
        if self.replicas.is_empty() || self.replicas.contains(&0) {
            return bad("replicas must be at least 1".into());
        }
        if self.replicas.len() != 1 && self.replicas.len() != self.n_values.len() {
            return bad(format!("{} replica counts for {} values of n", self.replicas.len(), self.n_values.len()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 / 3.0) {
            return bad(format!("epsilon = {} is not in (0, 1/3)", self.epsilon));
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return bad("lambda_grid values must be nonnegative".into());
        }
        if self.h_grid.windows(2).any(|w| w[1] <= w[0]) || self.h_grid.iter().any(|&h| !(h > 0.0)) {
            return bad("h_grid must be positive and increasing".into());
        }
        if self.step_cap == 0 || self.mc_samples < 2 {
            return bad("step_cap and mc_samples must be positive".into());
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment. Returns the
    /// experiment named by an `experiment` key, if any.
    pub fn parse(text: &str) -> Result<(Option<ExperimentKind>, Self)> {
        let mut law = None;
        let mut kind = None;
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "law" => law = Some(v.parse::<EnvironmentLaw>().map_err(|e| Error::Config(e.to_string()))?),
                "experiment" => kind = Some(v.parse()?),
                "version" => {}
                _ => pairs.push((i + 1, k.to_string(), v.to_string())),
            }
        }
        let law = law.ok_or_else(|| Error::Config("missing key 'law'".into()))?;
        let mut cfg = ExperimentConfig::new(law);
        for (line, k, v) in pairs {
            cfg.set(&k, &v).map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok((kind, cfg))
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn one<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.replace('_', "").parse().map_err(|_| format!("cannot parse '{v}'"))
        }
        fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
            v.split(',').filter(|t| !t.trim().is_empty()).map(|t| one(t.trim())).collect()
        }
        fn count(v: &str) -> std::result::Result<u64, String> {
            // allows 1e6
            let x: f64 = one(v)?;
            if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
                Ok(x as u64)
            } else {
                Err(format!("'{v}' is not a count"))
            }
        }
        let counts = |v: &str| -> std::result::Result<Vec<u64>, String> {
            v.split(',').filter(|t| !t.trim().is_empty()).map(|t| count(t.trim())).collect()
        };
        match key {
            "n_values" => self.n_values = counts(value)?,
            "replicas" => self.replicas = counts(value)?.into_iter().map(|x| x as usize).collect(),
            "epsilon" => self.epsilon = one(value)?,
            "lambda_grid" => self.lambda_grid = list(value)?,
            "master_seed" => self.master_seed = one(value)?,
            "output_dir" => self.output_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "step_cap" => self.step_cap = count(value)?,
            "h_grid" => self.h_grid = list(value)?,
            "mc_samples" => self.mc_samples = count(value)? as usize,
            "sample_tau" => self.sample_tau = one(value)?,
            "kesten_series" => self.kesten_series = count(value)? as usize,
            "svg" => self.svg = one(value)?,
            "law" => self.law = value.parse().map_err(|e: Error| e.to_string())?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Text form readable by [`ExperimentConfig::parse`]; `output_dir` is
    /// left out so that a report can be regenerated elsewhere.
    pub fn to_text(&self) -> String {
        fn join<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let _ = writeln!(s, "law = {}", self.law);
        let _ = writeln!(s, "n_values = {}", join(&self.n_values));
        let _ = writeln!(s, "replicas = {}", join(&self.replicas));
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "lambda_grid = {}", join(&self.lambda_grid));
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "step_cap = {}", self.step_cap);
        let _ = writeln!(s, "h_grid = {}", join(&self.h_grid));
        let _ = writeln!(s, "mc_samples = {}", self.mc_samples);
        let _ = writeln!(s, "sample_tau = {}", self.sample_tau);
        let _ = writeln!(s, "kesten_series = {}", self.kesten_series);
        let _ = writeln!(s, "svg = {}", self.svg);
        s
    }
}
