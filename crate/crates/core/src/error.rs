use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("gap change {which} is exactly zero; use the degenerate-cycle path")]
    ZeroDelta { which: &'static str },

    #[error("regulator epsilon must be positive, got {0}")]
    DegenerateRegulator(f64),

    #[error("correlator has no associated temperature")]
    NotThermal,

    #[error("point ({tau}, {tau_prime}) lies outside the tabulated correlator grid")]
    OutsideTable { tau: f64, tau_prime: f64 },

    #[error("malformed correlator table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}, tolerance {tolerance:e}")]
    QuadratureFailure { value: f64, error: f64, tolerance: f64 },

    #[error("response has a non-negligible imaginary part {imag:e} (error estimate {error:e})")]
    ComplexResponse { imag: f64, error: f64 },

    #[error("second-order shift {norm:e} exceeds the perturbative guard {limit:e}")]
    PerturbativeBreakdown { norm: f64, limit: f64 },

    #[error("grid of {grid_n} intervals is too coarse: Richardson disagreement {disagreement:e}")]
    GridTooCoarse { grid_n: usize, disagreement: f64 },

    #[error("closure normalisation Xi = {xi:e} is not positive")]
    DegenerateClosure { xi: f64 },

    #[error("cycle does not close: residual {residual:e}")]
    ClosureViolation { residual: f64 },

    #[error("response {which} = {value:e} is not positive")]
    NonPositiveResponse { which: &'static str, value: f64 },

    #[error("exponent {exponent:e} overflows")]
    Overflow { exponent: f64 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::ZeroDelta { .. } => "ZeroDelta",
            Error::DegenerateRegulator(_) => "DegenerateRegulator",
            Error::NotThermal => "NotThermal",
            Error::OutsideTable { .. } => "OutsideTable",
            Error::Table(_) => "Table",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::ComplexResponse { .. } => "ComplexResponse",
            Error::PerturbativeBreakdown { .. } => "PerturbativeBreakdown",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::DegenerateClosure { .. } => "DegenerateClosure",
            Error::ClosureViolation { .. } => "ClosureViolation",
            Error::NonPositiveResponse { .. } => "NonPositiveResponse",
            Error::Overflow { .. } => "Overflow",
        }
    }
}
