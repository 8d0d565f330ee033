//! ChaCha20 (RFC 8439, 12-byte nonce, block counter starting at 0).
//!
//! Unauthenticated: record integrity comes from a separate signature over the
//! ciphertext.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;

use super::CryptoError;

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;

pub fn stream_encrypt(key: &[u8], nonce: &[u8], pt: &[u8]) -> Result<Vec<u8>, CryptoError> {
    CryptoError::check_len("stream key", KEY_LEN, key.len())?;
    CryptoError::check_len("stream nonce", NONCE_LEN, nonce.len())?;
    let mut cipher = ChaCha20::new(key.into(), nonce.into());
    let mut out = pt.to_vec();
    cipher.apply_keystream(&mut out);
    Ok(out)
}

pub fn stream_decrypt(key: &[u8], nonce: &[u8], ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
    stream_encrypt(key, nonce, ct)
}
