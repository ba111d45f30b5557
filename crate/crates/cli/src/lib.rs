//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 2 for configuration errors, 3 when the law is outside the
//! sub-ballistic regime and 1 for other failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rwre::env_model::{kappa_bisection, kappa_solve, EnvironmentLaw, LazyEnvironment, DEFAULT_KAPPA_TOL};
use rwre::experiments::{
    constants_table, regenerate, run_and_write, run_experiment, with_workers, ConstantsOptions, ExperimentConfig,
    ExperimentKind, Report,
};
use rwre::potential::{detect_deep_valleys, detect_star_valleys, valleys_coincide, PotentialPath, ValleyThresholds};
use rwre::stable::{inverse_subordinator_path, sample_positive_stable, StableSpec};
use rwre::Error;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REGIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rwre", version, about = "Random walk in random environment: constants, valleys and limit-law experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve E[rho^kappa] = 1.
    Kappa {
        #[arg(long)]
        law: Option<String>,
        /// Use bisection even when a closed form exists.
        #[arg(long)]
        bisection: bool,
        #[arg(long, default_value_t = DEFAULT_KAPPA_TOL)]
        tol: f64,
    },
    /// Table of limit-law constants.
    Constants {
        #[arg(long)]
        law: Option<String>,
        #[arg(long, default_value_t = 200_000)]
        excursions: usize,
        /// Also fit C_K from this many simulated perpetuities.
        #[arg(long, default_value_t = 0)]
        kesten_series: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Deep valleys and shift-and-search valleys of one environment.
    Valleys {
        #[arg(long)]
        law: Option<String>,
        /// Potential values, one per line starting at site 0; replaces the sampled environment.
        #[arg(long)]
        potential: Option<PathBuf>,
        /// Required with --potential.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Hitting times tau(n) against the stable limit.
    SimulateTau(ExperimentArgs),
    /// Positions X_n against the limit of X_n / n^kappa.
    SimulateX(ExperimentArgs),
    /// Positive stable samples, or a path of the inverse subordinator as CSV (t, Y, Z).
    StableSample {
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, short = 'n', default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emit a subordinator path up to this time instead of samples.
        #[arg(long)]
        path: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket of tau(e_n) by single-valley crossings.
    VerifyReduction(ExperimentArgs),
    /// Growth of crossing times with the potential height.
    VerifyCrossing(ExperimentArgs),
    /// Valley census over many environments.
    Census(ExperimentArgs),
    /// Regenerate a report from its manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    law: Option<String>,
    /// Override one configuration key, e.g. --set replicas=1000.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; overrides output_dir from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn parse_law(law: Option<&str>) -> rwre::Result<EnvironmentLaw> {
    let law = law.ok_or_else(|| Error::Config("missing --law".into()))?;
    law.parse().map_err(|e: Error| Error::Config(e.to_string()))
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidLaw(_)) => EXIT_CONFIG,
        Some(e) if e.is_regime() => EXIT_REGIME,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `argv`, run the command and return the exit code. Output goes to
/// standard output, messages to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (code, text) = run_captured(argv);
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    code
}

/// Like [`run`], but returns what would go to standard output.
pub fn run_captured<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return (code, String::new());
        }
    };
    match execute(cli.command) {
        Ok(text) => (0, text),
        Err(e) => {
            eprintln!("error: {e:#}");
            (exit_code(&e), String::new())
        }
    }
}

fn experiment(kind: ExperimentKind, a: ExperimentArgs) -> anyhow::Result<String> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
                .map_err(|e| Error::Config(format!("{e:#}")))?;
            let (named, mut cfg) = ExperimentConfig::parse(&text)?;
            if named.is_some_and(|k| k != kind) {
                return Err(Error::Config(format!("{} is a {} configuration", p.display(), named.unwrap().name())).into());
            }
            if let Some(l) = &a.law {
                cfg.law = parse_law(Some(l))?;
            }
            cfg
        }
        None => ExperimentConfig::new(parse_law(a.law.as_deref())?),
    };
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim()).map_err(Error::Config)?;
    }
    cfg.validate()?;
    let dir = a.out.clone().or_else(|| cfg.output_dir.clone());
    let report: Report = match dir {
        Some(dir) => {
            let (report, files) = run_and_write(kind, &cfg, &dir, a.workers)?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            report
        }
        None => with_workers(a.workers, || run_experiment(kind, &cfg))??,
    };
    let mut s = report.summary_text();
    for t in &report.tables {
        let _ = writeln!(s, "\n[{}]", t.name);
        s.push_str(&t.to_csv()?);
    }
    Ok(s)
}

fn execute(cmd: Command) -> anyhow::Result<String> {
    let mut s = String::new();
    match cmd {
        Command::Kappa { law, bisection, tol } => {
            let law = parse_law(law.as_deref())?;
            let r = if bisection { kappa_bisection(&law, tol)? } else { kappa_solve(&law, tol)? };
            let _ = writeln!(s, "{}", r.kappa);
            eprintln!("method: {:?}, residual: {:e}", r.method, r.residual);
        }
        Command::Constants { law, excursions, kesten_series, seed } => {
            let law = parse_law(law.as_deref())?;
            let rows = constants_table(&law, &ConstantsOptions { excursions, kesten_series, seed })?;
            let _ = writeln!(s, "{:<18} {:>22} {:>12}  method", "constant", "value", "stderr");
            for r in rows {
                let se = r.se.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "{:<18} {:>22} {:>12}  {}", r.name, r.value, se, r.method);
            }
        }
        Command::Valleys { law, potential, kappa, n, epsilon, seed } => {
            let (path, k) = match potential {
                Some(p) => {
                    let k = kappa.ok_or_else(|| Error::Config("--potential needs --kappa".into()))?;
                    (PotentialPath::read_values(&p)?, k)
                }
                None => {
                    let law = parse_law(law.as_deref())?;
                    let k = kappa_solve(&law, DEFAULT_KAPPA_TOL)?.kappa;
                    let mut env = LazyEnvironment::new(&law, seed);
                    let hi = (3.0 * n as f64) as i64 + 10_000;
                    (PotentialPath::from_lazy(&mut env, -5000, hi), k)
                }
            };
            let thr = ValleyThresholds::new(n, epsilon, k)?;
            let deep = detect_deep_valleys(&path, &thr)?;
            let star = detect_star_valleys(&path, &thr, deep.e_n)?;
            let _ = writeln!(s, "height threshold {}, depth {}, e_n {}", thr.height, thr.depth, deep.e_n);
            let _ = writeln!(s, "kind,j,a,b,c,d");
            for v in &deep.valleys {
                let _ = writeln!(s, "deep,{},{},{},{},{}", v.j, v.a, v.b, v.c, v.d);
            }
            for v in star.valleys.iter().take(star.k_n) {
                let _ = writeln!(s, "star,{},{},{},{},{}", v.j, v.a, v.b, v.c, v.d);
            }
            let _ = writeln!(s, "k_n {}, k_star {}, coincide {}", deep.k_n, star.k_n, valleys_coincide(&deep, &star));
        }
        Command::StableSample { kappa, scale, count, seed, path, dt, points, out } => {
            if let Some(t_max) = path {
                if !(t_max > 0.0) || points == 0 {
                    bail!(Error::Config("--path needs a positive time and --points > 0".into()));
                }
                let times: Vec<f64> = (0..=points).map(|i| t_max * i as f64 / points as f64).collect();
                let p = inverse_subordinator_path(kappa, scale, &times, dt, seed)?;
                if p.coarse {
                    eprintln!("warning: dt = {dt} resolves Z with fewer than 10 steps at some times");
                }
                let _ = writeln!(s, "t,Y,Z");
                for (&t, &z) in p.times.iter().zip(&p.z_values) {
                    // Y is only simulated until it passes t_max
                    let k = (t / dt).floor() as usize;
                    let y = match k {
                        0 => "0".to_string(),
                        k if k <= p.y_values.len() => p.y_values[k - 1].to_string(),
                        _ => String::new(),
                    };
                    let _ = writeln!(s, "{t},{y},{z}");
                }
            } else {
                let spec = StableSpec::new(kappa, scale)?;
                for x in sample_positive_stable(&spec, count, seed) {
                    let _ = writeln!(s, "{x}");
                }
            }
            if let Some(o) = out {
                fs::write(&o, &s).with_context(|| format!("writing {}", o.display()))?;
                s.clear();
            }
        }
        Command::SimulateTau(a) => s = experiment(ExperimentKind::Tau, a)?,
        Command::SimulateX(a) => s = experiment(ExperimentKind::Position, a)?,
        Command::VerifyReduction(a) => s = experiment(ExperimentKind::Reduction, a)?,
        Command::VerifyCrossing(a) => s = experiment(ExperimentKind::Crossing, a)?,
        Command::Census(a) => s = experiment(ExperimentKind::Census, a)?,
        Command::Report { manifest, out, workers } => {
            let (report, files) = regenerate(&manifest, &out, workers)?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            s = report.summary_text();
        }
    }
    Ok(s)
}
