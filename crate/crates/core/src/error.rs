use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes shared by every layer of the library.
///
/// The split matters to callers: configuration problems are the user's to
/// fix, numerical problems mean a result could not be produced to the
/// requested accuracy.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible policy or model: {0}")]
    Infeasible(String),

    #[error("argument {x} outside table range [0, {max}]; rebuild with a larger x_max")]
    OutOfRange { x: f64, max: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failure in {what}: error estimate {estimate:e}")]
    Integration { what: String, estimate: f64 },

    #[error("numerical consistency failure: {0}")]
    Numerical(String),

    #[error("renewal divergence: E_tau[exp(-alpha T*)] = {0} is not < 1")]
    RenewalDivergence(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible search: every evaluated grid point has infinite cost")]
    InfeasibleSearch,
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Infeasible(_) | Error::OutOfRange { .. } | Error::Domain(_)
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
