//! TOTP helpers: time steps, the reference code computation, key splitting
//! and the record ciphertext `nonce[12] ‖ ChaCha20(k, nonce)[..16] ⊕ id`.

use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use crate::circuit::totp::{TOTP_CLIENT_BLOCKS, TOTP_CT_LEN, TOTP_ID_LEN, TOTP_KEY_LEN};
use crate::crypto::stream::NONCE_LEN;
use crate::crypto::stream_encrypt;
use crate::gc::session::SessionLayout;

pub const STEP_SECS: u64 = 30;
pub const DIGITS: u32 = 6;
/// Identifier used for padding slots in the log's list.
pub const DUMMY_ID: [u8; TOTP_ID_LEN] = [0; TOTP_ID_LEN];

pub fn time_step(unix_secs: u64) -> u64 {
    unix_secs / STEP_SECS
}

pub fn within_skew(t: u64, now_step: u64, skew: u64) -> bool {
    t.abs_diff(now_step) <= skew
}

/// HMAC-SHA256 TOTP with dynamic truncation to 31 bits. Keys longer than
/// 32 bytes are not supported by the split circuit and are refused.
pub fn reference_code(key: &[u8], t: u64) -> Option<u32> {
    if key.len() > TOTP_KEY_LEN {
        return None;
    }
    let mut mac = Hmac::<Sha256>::new_from_slice(key).ok()?;
    mac.update(&t.to_be_bytes());
    let d = mac.finalize().into_bytes();
    let off = (d[31] & 0x0f) as usize;
    Some(u32::from_be_bytes(d[off..off + 4].try_into().ok()?) & 0x7fff_ffff)
}

pub fn format_code(code31: u32) -> String {
    format!("{:0width$}", code31 % 10u32.pow(DIGITS), width = DIGITS as usize)
}

/// Zero-pads `key` to 32 bytes (HMAC pads short keys with zeros anyway) and
/// splits it into XOR shares `(client, log)`.
pub fn split_key<R: RngCore + CryptoRng + ?Sized>(
    key: &[u8],
    rng: &mut R,
) -> Option<([u8; TOTP_KEY_LEN], [u8; TOTP_KEY_LEN])> {
    if key.len() > TOTP_KEY_LEN {
        return None;
    }
    let mut padded = [0u8; TOTP_KEY_LEN];
    padded[..key.len()].copy_from_slice(key);
    let mut client = [0u8; TOTP_KEY_LEN];
    rng.fill_bytes(&mut client);
    let log = std::array::from_fn(|i| padded[i] ^ client[i]);
    Some((client, log))
}

/// A fresh non-dummy identifier.
pub fn random_id<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> [u8; TOTP_ID_LEN] {
    loop {
        let mut id = [0u8; TOTP_ID_LEN];
        rng.fill_bytes(&mut id);
        if id != DUMMY_ID {
            return id;
        }
    }
}

pub fn encrypt_id(k: &[u8; 32], nonce: &[u8; NONCE_LEN], id: &[u8; TOTP_ID_LEN]) -> [u8; TOTP_CT_LEN] {
    let body = stream_encrypt(k, nonce, id).expect("fixed lengths");
    let mut ct = [0u8; TOTP_CT_LEN];
    ct[..NONCE_LEN].copy_from_slice(nonce);
    ct[NONCE_LEN..].copy_from_slice(&body);
    ct
}

pub fn decrypt_id(k: &[u8; 32], ct: &[u8]) -> Option<[u8; TOTP_ID_LEN]> {
    if ct.len() != TOTP_CT_LEN {
        return None;
    }
    stream_encrypt(k, &ct[..NONCE_LEN], &ct[NONCE_LEN..]).ok()?.try_into().ok()
}

/// Client evaluates and learns the code block; the log garbles and learns
/// the ciphertext block.
pub fn session_layout() -> SessionLayout {
    SessionLayout { evaluator_input_blocks: TOTP_CLIENT_BLOCKS, evaluator_outputs: vec![true, false] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;

    #[test]
    fn rfc6238_sha256_vectors() {
        // The SHA-256 test key of the RFC; its codes are 8-digit truncations
        // of the same 31-bit value.
        let key = b"12345678901234567890123456789012";
        for (secs, want) in [(59u64, 46119246u32), (1111111109, 68084774), (2000000000, 90698825), (20000000000, 77737706)] {
            let code = reference_code(key, time_step(secs)).unwrap();
            assert_eq!(code % 100_000_000, want);
            assert_eq!(format_code(code), format!("{:06}", want % 1_000_000));
        }
    }

    #[test]
    fn split_reconstructs_padded_key() {
        let key = b"short key";
        let (a, b) = split_key(key, &mut OsRng).unwrap();
        let joined: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        assert_eq!(&joined[..key.len()], key);
        assert!(joined[key.len()..].iter().all(|&x| x == 0));
        assert_eq!(reference_code(&joined, 5), reference_code(key, 5));
        assert!(split_key(&[0u8; 33], &mut OsRng).is_none());
    }

    #[test]
    fn skew_window() {
        assert!(within_skew(10, 11, 1));
        assert!(within_skew(12, 11, 1));
        assert!(!within_skew(13, 11, 1));
        assert!(!within_skew(0, u64::MAX, 1));
    }

    #[test]
    fn codes_are_zero_padded() {
        assert_eq!(format_code(42), "000042");
        assert_eq!(format_code(1_234_567), "234567");
    }
}
