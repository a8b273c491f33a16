//! Order-preserving encryption over Paillier ciphertexts.
//!
//! The data owner keeps the Paillier private key. A server receives only the public key
//! and a [`hope::ComparisonKey`], which is enough to order ciphertexts, answer range and
//! group-by queries over an [`ostore::EncryptedIndex`], and serve the [`netproto`] wire
//! protocol without ever talking back to the client.

pub mod error;
pub mod hope;
pub mod keyfile;
pub mod netproto;
pub mod numtheory;
pub mod ostore;
pub mod paillier;

pub use error::{Error, Result};
pub use hope::{CmpResult, ComparisonKey};
pub use paillier::{keygen, Ciphertext, Fingerprint, PrivateKey, PublicKey};
pub use rug::Integer;
