use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates its invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The closed form would produce a non-positive variance.
    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    /// Root polishing or another iterative step did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unstable drift matrix: eigenvalue {re:e} {im:+e}i has non-negative real part")]
    Unstable { re: f64, im: f64 },

    #[error("singular resolvent at omega = {omega:e} rad/s")]
    Singular { omega: f64 },

    #[error("step size too large: dt * spectral radius = {0:.4} exceeds 0.1")]
    StepSize(f64),

    #[error("record too short: {have} samples, window needs {need}")]
    Window { have: usize, need: usize },
}

impl Error {
    /// True for failures caused by the inputs rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::InvalidParams(_))
    }
}
