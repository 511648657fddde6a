use thiserror::Error;

/// Errors shared across the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus {0} is not an odd prime")]
    NonPrimeModulus(u64),

    #[error("modulus {0} exceeds the 2^62 cap for exact 128-bit arithmetic")]
    ModulusTooLarge(u64),

    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("matrix is singular (ad - bc = 0)")]
    SingularMatrix,

    #[error("matrix is parabolic (repeated eigenvalue); use the direct method")]
    ParabolicMatrix,

    #[error("supplied factorization does not cover the element order (x^n != 1)")]
    IncompleteFactorization,

    #[error("frequency h = 0 is rejected; sums range over h in F_p^*")]
    ZeroFrequency,

    #[error("coefficient vector must not be all zero")]
    ZeroCoefficients,

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("n = {n} is not coprime to t = {t}")]
    NonUnitResidue { n: u64, t: u64 },

    #[error("work budget exceeded: {task} needs about {needed}, budget is {budget}")]
    BudgetExceeded {
        task: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty h set")]
    EmptyHSet,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
