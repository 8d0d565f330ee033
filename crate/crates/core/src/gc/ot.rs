//! Batched Chou-Orlandi base oblivious transfer of 16-byte messages.
//!
//! Three messages: sender sends `A = g^a`; receiver sends `B_i = g^b_i`
//! (choice 0) or `A·g^b_i` (choice 1); sender returns both messages masked
//! with `H(i, A, B_i, B_i^a)` and `H(i, A, B_i, (B_i/A)^a)`.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::{xor, GcError, Label, LABEL_LEN};
use crate::crypto::group::POINT_LEN;
use crate::crypto::{Point, Scalar};

fn key(i: usize, a: &Point, b: &Point, shared: &Point) -> Label {
    let mut h = Sha256::new();
    h.update(b"larch/ot");
    h.update((i as u64).to_be_bytes());
    h.update(a.to_bytes());
    h.update(b.to_bytes());
    h.update(shared.to_bytes());
    let d = h.finalize();
    d[..LABEL_LEN].try_into().expect("16-byte prefix")
}

fn read_count(bytes: &[u8], item: usize) -> Result<(usize, &[u8]), GcError> {
    if bytes.len() < 4 {
        return Err(GcError::Frame("short OT message".into()));
    }
    let n = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
    let body = &bytes[4..];
    if body.len() != n.checked_mul(item).ok_or_else(|| GcError::Frame("OT count overflow".into()))? {
        return Err(GcError::Length { what: "OT message", expected: n * item, got: body.len() });
    }
    Ok((n, body))
}

fn read_point(bytes: &[u8]) -> Result<Point, GcError> {
    Point::from_slice(bytes).filter(|p| !p.is_identity()).ok_or(GcError::BadPoint)
}

pub struct OtSender {
    a: Scalar,
    big_a: Point,
    a_a: Point,
}

impl OtSender {
    /// Returns the sender state and the first message.
    pub fn new<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> (OtSender, Vec<u8>) {
        let a = Scalar::random_nonzero(rng);
        let big_a = Point::mul_base(&a);
        let msg = big_a.to_bytes().to_vec();
        (OtSender { a, big_a, a_a: big_a * a }, msg)
    }

    /// Consumes the receiver's message and masks `pairs`.
    pub fn respond(&self, round2: &[u8], pairs: &[(Label, Label)]) -> Result<Vec<u8>, GcError> {
        let (n, body) = read_count(round2, POINT_LEN)?;
        if n != pairs.len() {
            return Err(GcError::Length { what: "OT choices", expected: pairs.len(), got: n });
        }
        let mut out = Vec::with_capacity(4 + n * 2 * LABEL_LEN);
        out.extend_from_slice(&(n as u32).to_be_bytes());
        for (i, (chunk, (m0, m1))) in body.chunks_exact(POINT_LEN).zip(pairs).enumerate() {
            let b = read_point(chunk)?;
            let s0 = b * self.a;
            let s1 = s0 - self.a_a;
            out.extend_from_slice(&xor(m0, &key(i, &self.big_a, &b, &s0)));
            out.extend_from_slice(&xor(m1, &key(i, &self.big_a, &b, &s1)));
        }
        Ok(out)
    }
}

pub struct OtReceiver {
    choices: Vec<bool>,
    keys: Vec<Label>,
}

impl OtReceiver {
    /// Consumes the sender's first message; returns state and the second message.
    pub fn new<R: RngCore + CryptoRng + ?Sized>(
        round1: &[u8],
        choices: &[bool],
        rng: &mut R,
    ) -> Result<(OtReceiver, Vec<u8>), GcError> {
        let big_a = read_point(round1)?;
        let mut msg = Vec::with_capacity(4 + choices.len() * POINT_LEN);
        msg.extend_from_slice(&(choices.len() as u32).to_be_bytes());
        let mut keys = Vec::with_capacity(choices.len());
        for (i, &c) in choices.iter().enumerate() {
            let b = Scalar::random_nonzero(rng);
            let gb = Point::mul_base(&b);
            let big_b = if c { big_a + gb } else { gb };
            keys.push(key(i, &big_a, &big_b, &(big_a * b)));
            msg.extend_from_slice(&big_b.to_bytes());
        }
        Ok((OtReceiver { choices: choices.to_vec(), keys }, msg))
    }

    pub fn finish(&self, round3: &[u8]) -> Result<Vec<Label>, GcError> {
        let (n, body) = read_count(round3, 2 * LABEL_LEN)?;
        if n != self.choices.len() {
            return Err(GcError::Length { what: "OT responses", expected: self.choices.len(), got: n });
        }
        Ok(body
            .chunks_exact(2 * LABEL_LEN)
            .zip(&self.choices)
            .zip(&self.keys)
            .map(|((pair, &c), k)| {
                let e: Label = pair[c as usize * LABEL_LEN..(c as usize + 1) * LABEL_LEN].try_into().unwrap();
                xor(&e, k)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;
    use rand::Rng;

    #[test]
    fn receiver_gets_chosen_message_only() {
        let pairs: Vec<(Label, Label)> = (0..12).map(|_| (OsRng.gen(), OsRng.gen())).collect();
        let choices: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let (s, m1) = OtSender::new(&mut OsRng);
        let (r, m2) = OtReceiver::new(&m1, &choices, &mut OsRng).unwrap();
        let m3 = s.respond(&m2, &pairs).unwrap();
        let got = r.finish(&m3).unwrap();
        for ((g, (m0, m1)), c) in got.iter().zip(&pairs).zip(&choices) {
            assert_eq!(g, if *c { m1 } else { m0 });
            assert_ne!(g, if *c { m0 } else { m1 });
        }
    }

    #[test]
    fn malformed_messages_are_rejected() {
        assert_eq!(OtReceiver::new(&[0u8; 33], &[true], &mut OsRng).err(), Some(GcError::BadPoint));
        let (s, m1) = OtSender::new(&mut OsRng);
        let (_, mut m2) = OtReceiver::new(&m1, &[true, false], &mut OsRng).unwrap();
        let pairs = [([0u8; 16], [1u8; 16]); 2];
        assert!(s.respond(&m2[..m2.len() - 1], &pairs).is_err());
        assert!(s.respond(&m2, &pairs[..1]).is_err());
        m2[4..37].fill(0);
        assert_eq!(s.respond(&m2, &pairs).err(), Some(GcError::BadPoint));
    }
}
