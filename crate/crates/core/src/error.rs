use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is singular or rank-deficient (min eigenvalue {0:e})")]
    Singular(f64),

    #[error("expected a rank-one matrix (second eigenvalue ratio {0:e})")]
    Rank(f64),

    #[error("spectrum has repeated values; perturb ties first")]
    DegenerateSpectrum,

    #[error("high-SNR limit diverges: interference fully aligned with signal")]
    Boundary,

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
