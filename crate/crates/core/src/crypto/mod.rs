//! Group arithmetic, hashing, commitments, stream cipher, PRG and ECDSA.

pub mod commit;
pub mod ecdsa;
pub mod elgamal;
pub mod group;
pub mod prg;
pub mod stream;

pub use commit::{commit, verify_commitment, Commitment};
pub use ecdsa::{ecdsa_sign, ecdsa_verify, KeyPair, Signature};
pub use group::{hash_to_group, msm, Point, Scalar};
pub use prg::prg_expand;
pub use stream::{stream_decrypt, stream_encrypt};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("{what}: expected {expected} bytes, got {got}")]
    InvalidLength { what: &'static str, expected: usize, got: usize },
    #[error("invalid scalar: {0}")]
    InvalidScalar(&'static str),
    #[error("invalid group element encoding")]
    InvalidPoint,
    #[error("degenerate signature for the supplied nonce")]
    DegenerateSignature,
    #[error("message does not fit the point embedding ({0} bytes max)")]
    EmbeddingTooLong(usize),
}

impl CryptoError {
    pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), CryptoError> {
        if expected == got {
            Ok(())
        } else {
            Err(CryptoError::InvalidLength { what, expected, got })
        }
    }
}
