//! SHA-256 as a circuit.
//!
//! The compression function is shipped as a Bristol file
//! (`circuits/sha256.txt`): input block 0 is the 512-bit message block,
//! input block 1 the 256-bit chaining state, output the new state. The file
//! is produced by [`generate_compression_circuit`]; set
//! `LARCH_REGEN_CIRCUITS=1` and run the crate tests to rewrite it.

use std::sync::OnceLock;

use super::builder::{const_bits, const_word, rotr, shr, word_be, word_to_bits_be, Bit, Builder, Word};
use super::{parse_bristol, BooleanCircuit};

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

const IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

static VENDORED: &str = include_str!("../../circuits/sha256.txt");

fn xor3(b: &mut Builder, x: &Word, y: &Word, z: &Word) -> Word {
    let t = b.xor_w(x, y);
    b.xor_w(&t, z)
}

fn compress(b: &mut Builder, block: &[Bit], state: &[Bit]) -> Vec<Bit> {
    assert_eq!(block.len(), 512);
    assert_eq!(state.len(), 256);
    let mut w: Vec<Word> = block.chunks(32).map(word_be).collect();
    for t in 16..64 {
        let s0 = xor3(b, &rotr(&w[t - 15], 7), &rotr(&w[t - 15], 18), &shr(&w[t - 15], 3));
        let s1 = xor3(b, &rotr(&w[t - 2], 17), &rotr(&w[t - 2], 19), &shr(&w[t - 2], 10));
        let x = b.add_w(&w[t - 16], &s0);
        let y = b.add_w(&w[t - 7], &s1);
        let wt = b.add_w(&x, &y);
        w.push(wt);
    }
    let init: Vec<Word> = state.chunks(32).map(word_be).collect();
    let mut v: [Word; 8] = std::array::from_fn(|i| init[i]);
    for t in 0..64 {
        let [a, bb, c, d, e, f, g, h] = v;
        let s1 = xor3(b, &rotr(&e, 6), &rotr(&e, 11), &rotr(&e, 25));
        let fg = b.xor_w(&f, &g);
        let efg = b.and_w(&e, &fg);
        let ch = b.xor_w(&g, &efg);
        let kw = b.add_w(&const_word(K[t]), &w[t]);
        let t1 = b.add_w(&h, &s1);
        let t1 = b.add_w(&t1, &ch);
        let t1 = b.add_w(&t1, &kw);
        let s0 = xor3(b, &rotr(&a, 2), &rotr(&a, 13), &rotr(&a, 22));
        let ab = b.xor_w(&a, &bb);
        let ac = b.xor_w(&a, &c);
        let m = b.and_w(&ab, &ac);
        let maj = b.xor_w(&a, &m);
        let t2 = b.add_w(&s0, &maj);
        let new_e = b.add_w(&d, &t1);
        let new_a = b.add_w(&t1, &t2);
        v = [new_a, a, bb, c, new_e, e, f, g];
    }
    (0..8)
        .flat_map(|i| {
            let s = b.add_w(&init[i], &v[i]);
            word_to_bits_be(&s)
        })
        .collect()
}

pub fn generate_compression_circuit() -> BooleanCircuit {
    let mut b = Builder::new();
    let block = b.input_block(512);
    let state = b.input_block(256);
    let out = compress(&mut b, &block, &state);
    b.finish(&[out])
}

/// The vendored compression circuit, parsed once.
pub fn compression_circuit() -> &'static BooleanCircuit {
    static C: OnceLock<BooleanCircuit> = OnceLock::new();
    C.get_or_init(|| parse_bristol(VENDORED).expect("vendored sha256 circuit is well-formed"))
}

pub fn vendored_text() -> &'static str {
    VENDORED
}

/// SHA-256 of a byte-aligned bit string of public length.
pub fn sha256_bits(b: &mut Builder, msg: &[Bit]) -> Vec<Bit> {
    assert_eq!(msg.len() % 8, 0, "message must be byte aligned");
    let bit_len = msg.len() as u64;
    let mut padded = msg.to_vec();
    padded.push(Bit::ONE);
    while padded.len() % 512 != 448 {
        padded.push(Bit::ZERO);
    }
    padded.extend(const_bits(&bit_len.to_be_bytes()));
    let iv: Vec<u8> = IV.iter().flat_map(|w| w.to_be_bytes()).collect();
    let mut state = const_bits(&iv);
    let c = compression_circuit();
    for block in padded.chunks(512) {
        let mut inputs = block.to_vec();
        inputs.extend_from_slice(&state);
        state = b.inline(c, &inputs);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{bits_to_bytes, bytes_to_bits, eval_plaintext, to_bristol};
    use sha2::{Digest, Sha256};

    #[test]
    fn vendored_file_matches_generator() {
        let generated = to_bristol(&generate_compression_circuit());
        if std::env::var_os("LARCH_REGEN_CIRCUITS").is_some() {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/circuits/sha256.txt");
            std::fs::write(path, &generated).unwrap();
            return;
        }
        assert!(generated == VENDORED, "circuits/sha256.txt is stale; regenerate it");
    }

    #[test]
    fn gate_counts_agree_with_text() {
        let c = compression_circuit();
        let and_lines = VENDORED.lines().filter(|l| l.trim_end().ends_with(" AND")).count();
        let gate_lines = VENDORED
            .lines()
            .filter(|l| {
                let l = l.trim_end();
                l.ends_with(" AND") || l.ends_with(" XOR") || l.ends_with(" INV")
            })
            .count();
        assert_eq!(c.and_count(), and_lines);
        assert_eq!(c.gates().len(), gate_lines);
        assert_eq!(c.input_blocks(), &[512, 256]);
        assert_eq!(c.output_blocks(), &[256]);
        // Roughly 22k non-linear gates is the usual size of a SHA-256 compression.
        assert!((20_000..24_000).contains(&c.and_count()), "{}", c.and_count());
    }

    fn hash_circuit(len: usize) -> BooleanCircuit {
        let mut b = Builder::new();
        let m = b.input_block(len * 8);
        let h = sha256_bits(&mut b, &m);
        b.finish(&[h])
    }

    #[test]
    fn matches_reference_hash() {
        for msg in [&b"abc"[..], &[0x5a; 55][..], &[0xc3; 64][..], &[7u8; 100][..]] {
            let c = hash_circuit(msg.len());
            let out = bits_to_bytes(&eval_plaintext(&c, &bytes_to_bits(msg)).unwrap());
            assert_eq!(out, Sha256::digest(msg).to_vec(), "len {}", msg.len());
        }
    }

    #[test]
    fn abc_known_answer() {
        let c = hash_circuit(3);
        let out = bits_to_bytes(&eval_plaintext(&c, &bytes_to_bits(b"abc")).unwrap());
        assert_eq!(hex::encode(out), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
