use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("value is not invertible modulo the given modulus")]
    NotInvertible,

    #[error("sampling budget exhausted: {0}")]
    Exhausted(&'static str),

    #[error("plaintext outside the admissible range")]
    PlaintextOutOfRange,

    #[error("key fingerprint mismatch")]
    KeyMismatch,

    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),

    #[error("comparison bound too large for this modulus")]
    BoundTooLarge,

    #[error("key constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("invalid key material: {0}")]
    InvalidKey(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
