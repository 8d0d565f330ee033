//! FIDO2 message framing and the log's proof statement.
//!
//! A relying party is identified by `id = SHA-256(name)`. The signed message
//! is `id ‖ chal` and `dgst = SHA-256(id ‖ chal)`. The record ciphertext is
//! `nonce[12] ‖ ChaCha20(k, nonce) ⊕ id`.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use crate::circuit::fido2::{fido2_circuit, Fido2Public, Fido2Witness, FIDO2_WITNESS_BLOCKS};
use crate::crypto::stream::NONCE_LEN;
use crate::crypto::stream_encrypt;
use crate::zk::{self, Relation, ZkError, ZkParams};

pub const ID_LEN: usize = 32;
pub const CHAL_LEN: usize = 32;
pub const CT_LEN: usize = NONCE_LEN + ID_LEN;

pub fn rp_id(name: &str) -> [u8; ID_LEN] {
    Sha256::digest(name.as_bytes()).into()
}

pub fn auth_message(id: &[u8; ID_LEN], chal: &[u8; CHAL_LEN]) -> [u8; ID_LEN + CHAL_LEN] {
    let mut m = [0u8; ID_LEN + CHAL_LEN];
    m[..ID_LEN].copy_from_slice(id);
    m[ID_LEN..].copy_from_slice(chal);
    m
}

pub fn auth_digest(id: &[u8; ID_LEN], chal: &[u8; CHAL_LEN]) -> [u8; 32] {
    Sha256::digest(auth_message(id, chal)).into()
}

pub fn encrypt_id(k: &[u8; 32], nonce: &[u8; NONCE_LEN], id: &[u8; ID_LEN]) -> [u8; CT_LEN] {
    let body = stream_encrypt(k, nonce, id).expect("fixed lengths");
    let mut ct = [0u8; CT_LEN];
    ct[..NONCE_LEN].copy_from_slice(nonce);
    ct[NONCE_LEN..].copy_from_slice(&body);
    ct
}

pub fn decrypt_id(k: &[u8; 32], ct: &[u8]) -> Option<[u8; ID_LEN]> {
    if ct.len() != CT_LEN {
        return None;
    }
    let pt = stream_encrypt(k, &ct[..NONCE_LEN], &ct[NONCE_LEN..]).ok()?;
    pt.try_into().ok()
}

/// Binds a proof to one account and presignature index.
pub fn proof_context(account: &str, index: u64) -> Vec<u8> {
    let mut c = b"larch/fido2/auth".to_vec();
    c.extend_from_slice(&(account.len() as u32).to_be_bytes());
    c.extend_from_slice(account.as_bytes());
    c.extend_from_slice(&index.to_be_bytes());
    c
}

pub fn statement(cm: &[u8], ct: &[u8], dgst: &[u8]) -> Option<Fido2Public> {
    if ct.len() != CT_LEN {
        return None;
    }
    Some(Fido2Public {
        cm: cm.try_into().ok()?,
        nonce: ct[..NONCE_LEN].try_into().ok()?,
        body: ct[NONCE_LEN..].try_into().ok()?,
        dgst: dgst.try_into().ok()?,
    })
}

fn relation() -> Relation<'static> {
    Relation { circuit: fido2_circuit(), witness_blocks: FIDO2_WITNESS_BLOCKS }
}

pub fn prove_auth<R: RngCore + CryptoRng + ?Sized>(
    w: &Fido2Witness,
    p: &Fido2Public,
    context: &[u8],
    params: ZkParams,
    rng: &mut R,
) -> Result<Vec<u8>, ZkError> {
    zk::prove(&relation(), &w.to_bits(), &p.to_bits(), context, params, rng)
}

/// Verifies a proof and requires exactly `reps` repetitions.
pub fn verify_auth(p: &Fido2Public, context: &[u8], proof: &[u8], reps: usize) -> bool {
    if proof.len() < 3 || u16::from_be_bytes([proof[1], proof[2]]) as usize != reps {
        return false;
    }
    zk::verify(&relation(), &p.to_bits(), context, proof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::commit;
    use rand::rngs::OsRng;
    use rand::Rng;

    #[test]
    fn ciphertext_round_trip_and_fixed_length() {
        let k: [u8; 32] = OsRng.gen();
        let n: [u8; 12] = OsRng.gen();
        let a = encrypt_id(&k, &n, &rp_id("a.example"));
        let b = encrypt_id(&k, &n, &rp_id("a-much-longer-relying-party-name.example.org"));
        assert_eq!(a.len(), b.len());
        assert_eq!(decrypt_id(&k, &a), Some(rp_id("a.example")));
        assert_eq!(decrypt_id(&k, &a[..10]), None);
    }

    #[test]
    fn honest_statement_proves_and_binds_context() {
        let (k, r, chal, nonce): ([u8; 32], [u8; 32], [u8; 32], [u8; 12]) =
            (OsRng.gen(), OsRng.gen(), OsRng.gen(), OsRng.gen());
        let id = rp_id("example.com");
        let cm = commit(&k, &r).unwrap().0;
        let ct = encrypt_id(&k, &nonce, &id);
        let dgst = auth_digest(&id, &chal);
        let p = statement(&cm, &ct, &dgst).unwrap();
        let w = Fido2Witness { k, r, id, chal };
        let ctx = proof_context("acct", 3);
        let proof = prove_auth(&w, &p, &ctx, ZkParams { reps: 4 }, &mut OsRng).unwrap();
        assert!(verify_auth(&p, &ctx, &proof, 4));
        assert!(!verify_auth(&p, &ctx, &proof, 20));
        assert!(!verify_auth(&p, &proof_context("acct", 4), &proof, 4));
    }
}
