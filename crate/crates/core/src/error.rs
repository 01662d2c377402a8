use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("unknown distribution family `{0}`")]
    UnknownFamily(String),

    #[error("missing parameter `{param}` for family `{family}`")]
    MissingParameter { family: String, param: String },

    #[error("operation requires a {expected} tail class, got {found}")]
    WrongTailClass {
        expected: &'static str,
        found: &'static str,
    },

    /// `u * w(u) <= 1`: the argument has not entered the asymptotic regime.
    #[error("pre-asymptotic argument: u = {u}, u*w(u) = {eta} (need > {bound})")]
    PreAsymptotic { u: f64, eta: f64, bound: f64 },

    #[error("argument {u} outside the admissible range ({lo}, {hi})")]
    OutOfRange { u: f64, lo: f64, hi: f64 },

    /// Survival underflowed; results in this region would be meaningless.
    #[error("survival underflows at u = {u}; region unreliable")]
    Underflow { u: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("tabulated intermediate law too coarse: relative grid error {0:e}")]
    GridResolution(f64),

    #[error("no density available for {0}")]
    MissingDensity(&'static str),

    #[error("precondition not asserted: {0}")]
    NotAsserted(&'static str),

    #[error("domain error: {0}")]
    Domain(&'static str),

    #[error("event too rare for Monte Carlo: estimate {estimate:e} below {floor:e}")]
    Rarity { estimate: f64, floor: f64 },

    #[error("endpoint must be infinite for {0}")]
    FiniteEndpoint(&'static str),

    #[error("u-grid must be strictly increasing with at least {min_len} points")]
    BadGrid { min_len: usize },

    #[error("scaling function is increasing on the tail of the grid")]
    IncreasingScale,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

pub(crate) fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::BadGrid { min_len });
    }
    Ok(())
}
