//! ChaCha20 block function as a circuit.

use super::builder::{const_word, rotl, word_le, word_to_bits_le, Bit, Builder, Word};

const SIGMA: [u32; 4] = [0x61707865, 0x3320646e, 0x79622d32, 0x6b206574];

fn quarter(b: &mut Builder, x: &mut [Word; 16], ia: usize, ib: usize, ic: usize, id: usize) {
    x[ia] = b.add_w(&x[ia], &x[ib]);
    let t = b.xor_w(&x[id], &x[ia]);
    x[id] = rotl(&t, 16);
    x[ic] = b.add_w(&x[ic], &x[id]);
    let t = b.xor_w(&x[ib], &x[ic]);
    x[ib] = rotl(&t, 12);
    x[ia] = b.add_w(&x[ia], &x[ib]);
    let t = b.xor_w(&x[id], &x[ia]);
    x[id] = rotl(&t, 8);
    x[ic] = b.add_w(&x[ic], &x[id]);
    let t = b.xor_w(&x[ib], &x[ic]);
    x[ib] = rotl(&t, 7);
}

/// First `len` keystream bytes (at most 64) of block `counter`, as bits.
pub fn chacha20_keystream(b: &mut Builder, key: &[Bit], nonce: &[Bit], counter: u32, len: usize) -> Vec<Bit> {
    assert_eq!(key.len(), 256);
    assert_eq!(nonce.len(), 96);
    assert!(len <= 64);
    let mut state = [const_word(0); 16];
    for i in 0..4 {
        state[i] = const_word(SIGMA[i]);
    }
    for i in 0..8 {
        state[4 + i] = word_le(&key[32 * i..32 * i + 32]);
    }
    state[12] = const_word(counter);
    for i in 0..3 {
        state[13 + i] = word_le(&nonce[32 * i..32 * i + 32]);
    }
    let mut x = state;
    for _ in 0..10 {
        quarter(b, &mut x, 0, 4, 8, 12);
        quarter(b, &mut x, 1, 5, 9, 13);
        quarter(b, &mut x, 2, 6, 10, 14);
        quarter(b, &mut x, 3, 7, 11, 15);
        quarter(b, &mut x, 0, 5, 10, 15);
        quarter(b, &mut x, 1, 6, 11, 12);
        quarter(b, &mut x, 2, 7, 8, 13);
        quarter(b, &mut x, 3, 4, 9, 14);
    }
    let words = len.div_ceil(4);
    let mut out = Vec::with_capacity(words * 32);
    for i in 0..words {
        let w = b.add_w(&x[i], &state[i]);
        out.extend(word_to_bits_le(&w));
    }
    out.truncate(len * 8);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{bits_to_bytes, bytes_to_bits, eval_plaintext};
    use chacha20::cipher::{KeyIvInit, StreamCipher};
    use proptest::prelude::*;

    fn reference(key: &[u8; 32], nonce: &[u8; 12], len: usize) -> Vec<u8> {
        let mut buf = vec![0u8; len];
        let mut c = chacha20::ChaCha20::new(key.into(), nonce.into());
        c.apply_keystream(&mut buf);
        buf
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn matches_reference_keystream(key: [u8; 32], nonce: [u8; 12]) {
            let mut b = Builder::new();
            let k = b.input_block(256);
            let n = b.input_block(96);
            let ks = chacha20_keystream(&mut b, &k, &n, 0, 64);
            let c = b.finish(&[ks]);
            let mut inp = bytes_to_bits(&key);
            inp.extend(bytes_to_bits(&nonce));
            let out = bits_to_bytes(&eval_plaintext(&c, &inp).unwrap());
            prop_assert_eq!(out, reference(&key, &nonce, 64));
        }
    }

    #[test]
    fn truncated_output_is_a_prefix() {
        let key = [3u8; 32];
        let nonce = [9u8; 12];
        let mut b = Builder::new();
        let k = b.input_block(256);
        let n = b.input_block(96);
        let ks = chacha20_keystream(&mut b, &k, &n, 0, 16);
        let c = b.finish(&[ks]);
        let mut inp = bytes_to_bits(&key);
        inp.extend(bytes_to_bits(&nonce));
        let out = bits_to_bytes(&eval_plaintext(&c, &inp).unwrap());
        assert_eq!(out, reference(&key, &nonce, 16));
    }
}
