//! Hash commitments to a 32-byte key under a 32-byte nonce.

use sha2::{Digest, Sha256};

use super::CryptoError;

/// `SHA-256(key ‖ nonce)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Commitment(pub [u8; 32]);

pub fn commit(key: &[u8], nonce: &[u8]) -> Result<Commitment, CryptoError> {
    CryptoError::check_len("commitment key", 32, key.len())?;
    CryptoError::check_len("commitment nonce", 32, nonce.len())?;
    let mut h = Sha256::new();
    h.update(key);
    h.update(nonce);
    Ok(Commitment(h.finalize().into()))
}

pub fn verify_commitment(cm: &Commitment, key: &[u8], nonce: &[u8]) -> bool {
    matches!(commit(key, nonce), Ok(c) if c == *cm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opens_only_to_its_own_nonce() {
        let k = [7u8; 32];
        let r = [9u8; 32];
        let cm = commit(&k, &r).unwrap();
        assert!(verify_commitment(&cm, &k, &r));
        let mut r2 = r;
        r2[31] ^= 1;
        assert!(!verify_commitment(&cm, &k, &r2));
    }

    #[test]
    fn rejects_wrong_lengths() {
        assert!(commit(&[0u8; 31], &[0u8; 32]).is_err());
        assert!(commit(&[0u8; 32], &[0u8; 33]).is_err());
        assert!(!verify_commitment(&Commitment([0; 32]), &[0u8; 3], &[0u8; 32]));
    }
}
