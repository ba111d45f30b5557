use std::fmt;

/// Which end of a finite window ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid environment law: {0}")]
    InvalidLaw(String),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("no root of E[rho^t] = 1 in (0, 1): {0}")]
    NoRootInUnitInterval(String),
    #[error("E[rho^t] diverges at t = {t} (finite only for t < {limit})")]
    DivergentMoment { t: f64, limit: f64 },
    #[error("potential window exhausted on the {side} at site {site}")]
    WindowExhausted { side: Side, site: i64 },
    #[error("linear system is singular: {0}")]
    Singular(String),
    #[error("simulation budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("outside the sub-ballistic regime: {0}")]
    Regime(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by a law or parameters outside `0 < kappa < 1`.
    pub fn is_regime(&self) -> bool {
        matches!(self, Error::Regime(_) | Error::NoRootInUnitInterval(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
