use thiserror::Error;

use crate::grid::ScalarField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("argument must be nonnegative, got {0}")]
    NegativeArgument(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("exponent constraint violated: {0}")]
    Exponents(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("singular integrand: exponent {exponent} < 2 with zero gradient in cell {cell} and no regularization")]
    SingularIntegrand { exponent: f64, cell: usize },

    #[error("degenerate denominator: rho_theta0(u) = {0} (weight vanishes on the support of u)")]
    DegenerateDenominator(f64),

    #[error("p = q: the Nehari projection exponent 1/(p - q) is undefined")]
    EqualExponents,

    #[error("infeasible: lambda*rho0(u) - rho0(grad u) = {gap:e} is not positive")]
    Infeasible { gap: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<ScalarField>,
    },

    #[error("residual {residual:e} above tolerance {tol:e}")]
    ResidualAboveTolerance { residual: f64, tol: f64 },

    #[error("could not bracket the Luxemburg norm within {0} doublings")]
    Bracket(usize),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
