//! Single-party ECDSA over P-256 with SHA-256.
//!
//! Used for record-integrity signatures and as the reference the two-party
//! signer is checked against.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::group::{Point, Scalar};
use super::CryptoError;

pub const SIGNATURE_LEN: usize = 64;

/// `(f(R), s)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub r: Scalar,
    pub s: Scalar,
}

impl Signature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..32].copy_from_slice(&self.r.to_bytes());
        out[32..].copy_from_slice(&self.s.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Signature> {
        if bytes.len() != SIGNATURE_LEN {
            return None;
        }
        Some(Signature {
            r: Scalar::from_slice(&bytes[..32])?,
            s: Scalar::from_slice(&bytes[32..])?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub sk: Scalar,
    pub pk: Point,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> KeyPair {
        let sk = Scalar::random_nonzero(rng);
        KeyPair { sk, pk: Point::mul_base(&sk) }
    }

    pub fn from_secret(sk: Scalar) -> KeyPair {
        KeyPair { sk, pk: Point::mul_base(&sk) }
    }
}

/// Hash(m) as an element of Z_q.
pub fn message_scalar(msg: &[u8]) -> Scalar {
    let digest: [u8; 32] = Sha256::digest(msg).into();
    Scalar::reduce_bytes(&digest)
}

/// Signs a precomputed scalar digest. With an explicit nonce a degenerate
/// `f(R) = 0` or `s = 0` is an error; otherwise a fresh nonce is drawn.
pub fn sign_digest<R: RngCore + CryptoRng + ?Sized>(
    sk: &Scalar,
    digest: &Scalar,
    nonce: Option<Scalar>,
    rng: &mut R,
) -> Result<Signature, CryptoError> {
    if sk.is_zero() {
        return Err(CryptoError::InvalidScalar("secret key must be non-zero"));
    }
    loop {
        let k = match nonce {
            Some(k) if k.is_zero() => return Err(CryptoError::InvalidScalar("nonce must be non-zero")),
            Some(k) => k,
            None => Scalar::random_nonzero(rng),
        };
        let r = Point::mul_base(&k).conversion();
        let s = k.invert().expect("non-zero nonce") * (*digest + r * sk);
        if !r.is_zero() && !s.is_zero() {
            return Ok(Signature { r, s });
        }
        if nonce.is_some() {
            return Err(CryptoError::DegenerateSignature);
        }
    }
}

pub fn ecdsa_sign<R: RngCore + CryptoRng + ?Sized>(
    sk: &Scalar,
    msg: &[u8],
    nonce: Option<Scalar>,
    rng: &mut R,
) -> Result<Signature, CryptoError> {
    sign_digest(sk, &message_scalar(msg), nonce, rng)
}

/// Verification is total: malformed input yields `false`.
pub fn verify_digest(pk: &Point, digest: &Scalar, sig: &Signature) -> bool {
    if sig.r.is_zero() || sig.s.is_zero() || pk.is_identity() {
        return false;
    }
    let w = match sig.s.invert() {
        Some(w) => w,
        None => return false,
    };
    let rp = Point::mul_base(&(*digest * w)) + *pk * (sig.r * w);
    !rp.is_identity() && rp.conversion() == sig.r
}

pub fn ecdsa_verify(pk: &Point, msg: &[u8], sig: &Signature) -> bool {
    verify_digest(pk, &message_scalar(msg), sig)
}

/// Byte-level verification for untrusted inputs.
pub fn ecdsa_verify_bytes(pk: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    match (Point::from_slice(pk), Signature::from_bytes(sig)) {
        (Some(pk), Some(sig)) => ecdsa_verify(&pk, msg, &sig),
        _ => false,
    }
}
