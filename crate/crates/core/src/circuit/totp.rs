//! TOTP garbled-circuit function.
//!
//! Client (evaluator) blocks: `k`, `r`, `id`, `k_client`, `nonce`.
//! Log (garbler) blocks: `cm`, then `id_i`, `k_log_i` for each of the `n`
//! slots, then the time counter `t`.
//!
//! Output block 0 (client): the 31-bit truncated HMAC-SHA256 code, zero
//! unless the request is valid. Output block 1 (log): the 28-byte
//! ciphertext `nonce ‖ ChaCha20(k, nonce) ⊕ id` followed by a validity bit.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::builder::{const_bits, Bit, Builder};
use super::chacha::chacha20_keystream;
use super::sha256::sha256_bits;
use super::{bits_to_bytes, bytes_to_bits, BooleanCircuit, CircuitError, CircuitParams};

pub const TOTP_CLIENT_BLOCKS: usize = 5;
pub const TOTP_ID_LEN: usize = 16;
pub const TOTP_KEY_LEN: usize = 32;
pub const TOTP_CT_LEN: usize = 12 + TOTP_ID_LEN;
pub const CODE_BITS: usize = 31;

pub fn build_totp_circuit(p: &CircuitParams) -> Result<BooleanCircuit, CircuitError> {
    p.validate()?;
    let mut b = Builder::new();
    let k = b.input_block(p.key_len * 8);
    let r = b.input_block(p.commit_nonce_len * 8);
    let id = b.input_block(p.totp_id_len * 8);
    let kc = b.input_block(TOTP_KEY_LEN * 8);
    let nonce = b.input_block(p.stream_nonce_len * 8);
    let cm = b.input_block(256);
    let slots: Vec<(Vec<Bit>, Vec<Bit>)> = (0..p.n)
        .map(|_| {
            let sid = b.input_block(p.totp_id_len * 8);
            let sk = b.input_block(TOTP_KEY_LEN * 8);
            (sid, sk)
        })
        .collect();
    let t = b.input_block(64);

    let kr = [k.clone(), r].concat();
    let h = sha256_bits(&mut b, &kr);
    let cm_ok = b.eq_bits(&h, &cm);

    let mut klog = vec![Bit::ZERO; TOTP_KEY_LEN * 8];
    let mut matches = Vec::with_capacity(p.n);
    for (sid, sk) in &slots {
        let m = b.eq_bits(&id, sid);
        for (acc, &bit) in klog.iter_mut().zip(sk) {
            let sel = b.and(m, bit);
            *acc = b.xor(*acc, sel);
        }
        matches.push(m);
    }
    let known = b.or_all(&matches);
    let valid = b.and(cm_ok, known);

    let key = b.xor_bits(&kc, &klog);
    let mac = hmac_sha256(&mut b, &key, &t);
    let code = truncate(&mut b, &mac);
    let code: Vec<Bit> = code.iter().map(|&c| b.and(c, valid)).collect();

    let ks = chacha20_keystream(&mut b, &k, &nonce, 0, p.totp_id_len);
    let body = b.xor_bits(&ks, &id);
    let mut log_out = nonce;
    log_out.extend(body);
    log_out.push(valid);
    Ok(b.finish(&[code, log_out]))
}

fn hmac_sha256(b: &mut Builder, key: &[Bit], msg: &[Bit]) -> Vec<Bit> {
    let pad = |b: &mut Builder, byte: u8| -> Vec<Bit> {
        let mut block = b.xor_bits(key, &const_bits(&[byte; TOTP_KEY_LEN]));
        block.extend(const_bits(&[byte; 64 - TOTP_KEY_LEN]));
        block
    };
    let mut inner = pad(b, 0x36);
    inner.extend_from_slice(msg);
    let ih = sha256_bits(b, &inner);
    let mut outer = pad(b, 0x5c);
    outer.extend(ih);
    sha256_bits(b, &outer)
}

/// Dynamic truncation: 31 bits starting at byte `mac[31] & 0xf`.
fn truncate(b: &mut Builder, mac: &[Bit]) -> Vec<Bit> {
    let mut cands: Vec<Vec<Bit>> = (0..16).map(|j| mac[j * 8 + 1..j * 8 + 32].to_vec()).collect();
    // Offset bits from least to most significant.
    for level in 0..4 {
        let s = mac[31 * 8 + 7 - level];
        cands = cands
            .chunks(2)
            .map(|pair| pair[0].iter().zip(&pair[1]).map(|(&f, &t)| b.mux(s, t, f)).collect())
            .collect();
    }
    cands.pop().expect("one candidate left")
}

/// Cached circuits keyed by slot count.
pub fn totp_circuit(n: usize) -> Result<Arc<BooleanCircuit>, CircuitError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<BooleanCircuit>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().expect("cache lock").get(&n) {
        return Ok(c.clone());
    }
    let c = Arc::new(build_totp_circuit(&CircuitParams::totp(n))?);
    cache.lock().expect("cache lock").insert(n, c.clone());
    Ok(c)
}

pub struct TotpClientInput<'a> {
    pub k: &'a [u8; 32],
    pub r: &'a [u8; 32],
    pub id: &'a [u8; TOTP_ID_LEN],
    pub k_client: &'a [u8; TOTP_KEY_LEN],
    pub nonce: &'a [u8; 12],
}

impl TotpClientInput<'_> {
    pub fn to_bits(&self) -> Vec<bool> {
        bytes_to_bits(&[&self.k[..], self.r, self.id, self.k_client, self.nonce].concat())
    }
}

pub fn totp_log_bits(cm: &[u8; 32], slots: &[([u8; TOTP_ID_LEN], [u8; TOTP_KEY_LEN])], t: u64) -> Vec<bool> {
    let mut bytes = cm.to_vec();
    for (id, k) in slots {
        bytes.extend_from_slice(id);
        bytes.extend_from_slice(k);
    }
    bytes.extend_from_slice(&t.to_be_bytes());
    bytes_to_bits(&bytes)
}

pub fn decode_code(bits: &[bool]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

/// Splits the log's output block into ciphertext and validity bit.
pub fn decode_log_output(bits: &[bool]) -> Option<([u8; TOTP_CT_LEN], bool)> {
    if bits.len() != TOTP_CT_LEN * 8 + 1 {
        return None;
    }
    let ct = bits_to_bytes(&bits[..TOTP_CT_LEN * 8]).try_into().ok()?;
    Some((ct, bits[TOTP_CT_LEN * 8]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::eval_plaintext;
    use crate::crypto::{commit, stream_encrypt};
    use hmac::{Hmac, Mac};
    use rand::{rngs::OsRng, Rng, RngCore};

    fn reference_code(key: &[u8], t: u64) -> u32 {
        let mut m = Hmac::<sha2::Sha256>::new_from_slice(key).unwrap();
        m.update(&t.to_be_bytes());
        let d = m.finalize().into_bytes();
        let off = (d[31] & 0xf) as usize;
        u32::from_be_bytes(d[off..off + 4].try_into().unwrap()) & 0x7fff_ffff
    }

    struct Case {
        k: [u8; 32],
        r: [u8; 32],
        nonce: [u8; 12],
        kc: [u8; 32],
        slots: Vec<([u8; 16], [u8; 32])>,
        full_keys: Vec<[u8; 32]>,
    }

    fn case(n: usize) -> Case {
        let mut c = Case { k: [0; 32], r: [0; 32], nonce: [0; 12], kc: [0; 32], slots: vec![], full_keys: vec![] };
        OsRng.fill_bytes(&mut c.k);
        OsRng.fill_bytes(&mut c.r);
        OsRng.fill_bytes(&mut c.nonce);
        OsRng.fill_bytes(&mut c.kc);
        for i in 0..n {
            let mut id = [0u8; 16];
            id[0] = i as u8 + 1;
            let mut full = [0u8; 32];
            // 20-byte keys, zero padded like a typical authenticator secret.
            OsRng.fill_bytes(&mut full[..20]);
            let klog: [u8; 32] = std::array::from_fn(|j| full[j] ^ c.kc[j]);
            c.slots.push((id, klog));
            c.full_keys.push(full);
        }
        c
    }

    fn run(n: usize, c: &Case, id: &[u8; 16], cm: &[u8; 32], t: u64) -> (u32, [u8; TOTP_CT_LEN], bool) {
        let circ = totp_circuit(n).unwrap();
        let mut inp = TotpClientInput { k: &c.k, r: &c.r, id, k_client: &c.kc, nonce: &c.nonce }.to_bits();
        inp.extend(totp_log_bits(cm, &c.slots, t));
        let out = eval_plaintext(&circ, &inp).unwrap();
        let code = decode_code(&out[circ.output_block_span(0)]);
        let (ct, valid) = decode_log_output(&out[circ.output_block_span(1)]).unwrap();
        (code, ct, valid)
    }

    #[test]
    fn codes_match_reference_for_each_slot() {
        let n = 4;
        let c = case(n);
        let cm = commit(&c.k, &c.r).unwrap().0;
        for i in 0..n {
            let t: u64 = OsRng.gen_range(0..1 << 40);
            let id = c.slots[i].0;
            let (code, ct, valid) = run(n, &c, &id, &cm, t);
            assert!(valid);
            assert_eq!(code, reference_code(&c.full_keys[i][..20], t));
            assert_eq!(ct[..12], c.nonce);
            assert_eq!(ct[12..].to_vec(), stream_encrypt(&c.k, &c.nonce, &id).unwrap());
        }
    }

    #[test]
    fn unknown_id_or_bad_commitment_is_invalid() {
        let n = 2;
        let c = case(n);
        let cm = commit(&c.k, &c.r).unwrap().0;
        let (code, _, valid) = run(n, &c, &[0xee; 16], &cm, 77);
        assert!(!valid);
        assert_eq!(code, 0);
        let mut bad = cm;
        bad[0] ^= 1;
        let (code, _, valid) = run(n, &c, &c.slots[0].0, &bad, 77);
        assert!(!valid);
        assert_eq!(code, 0);
    }

    #[test]
    fn block_layout() {
        let circ = totp_circuit(4).unwrap();
        assert_eq!(circ.input_blocks().len(), TOTP_CLIENT_BLOCKS + 1 + 2 * 4 + 1);
        assert_eq!(circ.output_blocks(), &[CODE_BITS, TOTP_CT_LEN * 8 + 1]);
        assert!(build_totp_circuit(&CircuitParams::totp(3)).is_err());
    }
}
