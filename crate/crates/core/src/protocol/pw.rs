//! Password mechanism formulas.
//!
//! Client keys `(x, X = g^x)`, log keys `(k, K = g^k)`. For a relying party
//! with random identifier `id` the password is `pw = k_id · Hash(id)^k`
//! (written additively below). Authentication encrypts `Hash(id)` under `X`
//! and proves twice, over the log's list, that the ciphertext is well formed.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{CryptoRng, RngCore};

use crate::crypto::elgamal::{self, Ciphertext};
use crate::crypto::{hash_to_group, CryptoError, Point, Scalar};
use crate::dlproof::{dlproof_prove, dlproof_verify, DlProofError};

pub const ID_LEN: usize = 16;

pub fn hash_id(id: &[u8; ID_LEN]) -> Point {
    let mut input = b"larch/pw/id".to_vec();
    input.extend_from_slice(id);
    hash_to_group(&input)
}

/// Recommended registration: `pw = k_id + Hash(id)^k`.
pub fn finish_register(k_id: &Point, evaluated: &Point) -> Point {
    *k_id + *evaluated
}

/// Legacy import: the key share that makes authentication reproduce `pw`.
pub fn import_key_share(pw: &str, evaluated: &Point) -> Result<Point, CryptoError> {
    Ok(elgamal::embed(pw.as_bytes())? - *evaluated)
}

pub fn render_password(pw: &Point) -> String {
    STANDARD.encode(pw.to_bytes())
}

/// Recovers an imported password string.
pub fn render_imported(pw: &Point) -> Option<String> {
    String::from_utf8(elgamal::unembed(pw)?).ok()
}

/// Binds both proofs to an account and list version.
pub fn proof_context(account: &str, version: u64, which: u8) -> Vec<u8> {
    let mut c = b"larch/pw/auth".to_vec();
    c.extend_from_slice(&(account.len() as u32).to_be_bytes());
    c.extend_from_slice(account.as_bytes());
    c.extend_from_slice(&version.to_be_bytes());
    c.push(which);
    c
}

/// Deterministic padding element `i` for a list version.
pub fn padding_element(seed: &[u8; 32], version: u64, i: usize) -> Point {
    let mut input = b"larch/pw/padding".to_vec();
    input.extend_from_slice(seed);
    input.extend_from_slice(&version.to_be_bytes());
    input.extend_from_slice(&(i as u64).to_be_bytes());
    hash_to_group(&input)
}

/// Registered hashes padded to a power of two.
pub fn padded_list(registered: &[Point], seed: &[u8; 32], version: u64) -> Vec<Point> {
    let n = registered.len().max(1).next_power_of_two();
    let mut list = registered.to_vec();
    for i in registered.len()..n {
        list.push(padding_element(seed, version, i));
    }
    list
}

fn shifted(ct: &Ciphertext, list: &[Point]) -> Vec<Point> {
    list.iter().map(|h| ct.c2 - *h).collect()
}

pub struct AuthStart {
    pub r: Scalar,
    pub ct: Ciphertext,
    pub proof1: Vec<u8>,
    pub proof2: Vec<u8>,
}

/// `ct = (g^r, Hash(id)·X^r)`; with `h_i = c₂ / list_i`, proves
/// `h_idx = X^r` and `h_idx = c₁^x`.
pub fn auth_client<R: RngCore + CryptoRng + ?Sized>(
    x: &Scalar,
    list: &[Point],
    idx: usize,
    account: &str,
    version: u64,
    rng: &mut R,
) -> Result<AuthStart, DlProofError> {
    let target = *list.get(idx).ok_or(DlProofError::IndexOutOfRange(idx))?;
    let big_x = Point::mul_base(x);
    let r = Scalar::random_nonzero(rng);
    let ct = elgamal::encrypt_with(&big_x, &target, &r);
    let hs = shifted(&ct, list);
    let proof1 = dlproof_prove(idx, &r, &big_x, &hs, &proof_context(account, version, 1), rng)?;
    let proof2 = dlproof_prove(idx, x, &ct.c1, &hs, &proof_context(account, version, 2), rng)?;
    Ok(AuthStart { r, ct, proof1, proof2 })
}

pub fn auth_verify(
    big_x: &Point,
    list: &[Point],
    ct: &Ciphertext,
    proof1: &[u8],
    proof2: &[u8],
    account: &str,
    version: u64,
) -> bool {
    if ct.c1.is_identity() {
        return false;
    }
    let hs = shifted(ct, list);
    dlproof_verify(proof1, big_x, &hs, &proof_context(account, version, 1))
        && dlproof_verify(proof2, &ct.c1, &hs, &proof_context(account, version, 2))
}

/// The log's answer `y = c₂^k`.
pub fn evaluate(k: &Scalar, ct: &Ciphertext) -> Point {
    ct.c2 * *k
}

/// `pw = k_id · y · K^{-xr}`.
pub fn finish_auth(k_id: &Point, y: &Point, big_k: &Point, x: &Scalar, r: &Scalar) -> Point {
    *k_id + *y - *big_k * (*x * *r)
}

/// Recovers `Hash(id)` from a record ciphertext.
pub fn decrypt_record(x: &Scalar, ct: &Ciphertext) -> Point {
    elgamal::decrypt(x, ct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlproof;
    use rand::rngs::OsRng;
    use rand::Rng;

    struct World {
        x: Scalar,
        k: Scalar,
        ids: Vec<[u8; ID_LEN]>,
        seed: [u8; 32],
    }

    fn world(n: usize) -> World {
        World {
            x: Scalar::random_nonzero(&mut OsRng),
            k: Scalar::random_nonzero(&mut OsRng),
            ids: (0..n).map(|_| OsRng.gen()).collect(),
            seed: OsRng.gen(),
        }
    }

    #[test]
    fn auth_reproduces_registration() {
        let w = world(5);
        let hashes: Vec<Point> = w.ids.iter().map(hash_id).collect();
        let list = padded_list(&hashes, &w.seed, 1);
        assert_eq!(list.len(), 8);
        let big_k = Point::mul_base(&w.k);
        for idx in [0, 4] {
            let k_id = Point::random(&mut OsRng);
            let pw = finish_register(&k_id, &(hashes[idx] * w.k));
            let a = auth_client(&w.x, &list, idx, "acct", 1, &mut OsRng).unwrap();
            let big_x = Point::mul_base(&w.x);
            assert!(auth_verify(&big_x, &list, &a.ct, &a.proof1, &a.proof2, "acct", 1));
            assert!(!auth_verify(&big_x, &list, &a.ct, &a.proof1, &a.proof2, "acct", 2));
            let y = evaluate(&w.k, &a.ct);
            assert_eq!(finish_auth(&k_id, &y, &big_k, &w.x, &a.r), pw);
            assert_eq!(decrypt_record(&w.x, &a.ct), hashes[idx]);
            assert_eq!(a.proof1.len(), dlproof::proof_len(8));
        }
    }

    #[test]
    fn legacy_import_round_trips() {
        let w = world(1);
        let h = hash_id(&w.ids[0]);
        let evaluated = h * w.k;
        let k_id = import_key_share("hunter2-legacy", &evaluated).unwrap();
        let pw = finish_register(&k_id, &evaluated);
        assert_eq!(render_imported(&pw).as_deref(), Some("hunter2-legacy"));
        assert!(import_key_share(&"x".repeat(31), &evaluated).is_err());
    }

    #[test]
    fn unregistered_hash_is_rejected() {
        let w = world(3);
        let hashes: Vec<Point> = w.ids.iter().map(hash_id).collect();
        let list = padded_list(&hashes, &w.seed, 0);
        let big_x = Point::mul_base(&w.x);
        // Prove against a list containing an extra id, verify against the real one.
        let mut forged = list.clone();
        forged[3] = hash_id(&OsRng.gen());
        let a = auth_client(&w.x, &forged, 3, "acct", 0, &mut OsRng).unwrap();
        assert!(!auth_verify(&big_x, &list, &a.ct, &a.proof1, &a.proof2, "acct", 0));
    }

    #[test]
    fn padding_changes_with_version() {
        let seed = [9u8; 32];
        assert_ne!(padding_element(&seed, 1, 0), padding_element(&seed, 2, 0));
        assert_eq!(padded_list(&[], &seed, 0).len(), 1);
    }
}
