//! FIDO2 statement circuit.
//!
//! Witness blocks: `k`, `r`, `id`, `chal`. Public blocks: `cm`, `nonce`,
//! `body`, `dgst`. The single output bit is set iff
//! `SHA256(k‖r) = cm`, `ChaCha20(k, nonce) ⊕ id = body` and
//! `SHA256(id‖chal) = dgst`.

use std::sync::OnceLock;

use super::builder::Builder;
use super::chacha::chacha20_keystream;
use super::sha256::sha256_bits;
use super::{bytes_to_bits, BooleanCircuit, CircuitError, CircuitParams};

pub const FIDO2_WITNESS_BLOCKS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fido2Witness {
    pub k: [u8; 32],
    pub r: [u8; 32],
    pub id: [u8; 32],
    pub chal: [u8; 32],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fido2Public {
    pub cm: [u8; 32],
    pub nonce: [u8; 12],
    pub body: [u8; 32],
    pub dgst: [u8; 32],
}

impl Fido2Witness {
    pub fn to_bits(&self) -> Vec<bool> {
        bytes_to_bits(&[&self.k[..], &self.r, &self.id, &self.chal].concat())
    }
}

impl Fido2Public {
    pub fn to_bits(&self) -> Vec<bool> {
        bytes_to_bits(&[&self.cm[..], &self.nonce, &self.body, &self.dgst].concat())
    }
}

pub fn build_fido2_circuit(p: &CircuitParams) -> Result<BooleanCircuit, CircuitError> {
    p.validate()?;
    let mut b = Builder::new();
    let k = b.input_block(p.key_len * 8);
    let r = b.input_block(p.commit_nonce_len * 8);
    let id = b.input_block(p.rp_id_len * 8);
    let chal = b.input_block(p.chal_len * 8);
    let cm = b.input_block(256);
    let nonce = b.input_block(p.stream_nonce_len * 8);
    let body = b.input_block(p.rp_id_len * 8);
    let dgst = b.input_block(256);

    let kr = [k.clone(), r].concat();
    let h = sha256_bits(&mut b, &kr);
    let cm_ok = b.eq_bits(&h, &cm);

    let ks = chacha20_keystream(&mut b, &k, &nonce, 0, p.rp_id_len);
    let enc = b.xor_bits(&ks, &id);
    let ct_ok = b.eq_bits(&enc, &body);

    let idc = [id, chal].concat();
    let d = sha256_bits(&mut b, &idc);
    let dg_ok = b.eq_bits(&d, &dgst);

    let out = b.and_all(&[cm_ok, ct_ok, dg_ok]);
    Ok(b.finish(&[vec![out]]))
}

pub fn fido2_circuit() -> &'static BooleanCircuit {
    static C: OnceLock<BooleanCircuit> = OnceLock::new();
    C.get_or_init(|| build_fido2_circuit(&CircuitParams::FIDO2).expect("default parameters are valid"))
}
