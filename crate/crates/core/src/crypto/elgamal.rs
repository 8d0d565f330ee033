//! ElGamal over P-256 and a reversible byte-string embedding into the group.

use rand::{CryptoRng, RngCore};

use super::group::{Point, Scalar, POINT_LEN};
use super::CryptoError;

/// Longest byte string [`embed`] accepts.
pub const EMBED_MAX: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub c1: Point,
    pub c2: Point,
}

impl Ciphertext {
    pub const LEN: usize = 2 * POINT_LEN;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[..POINT_LEN].copy_from_slice(&self.c1.to_bytes());
        out[POINT_LEN..].copy_from_slice(&self.c2.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Ciphertext> {
        if bytes.len() != Self::LEN {
            return None;
        }
        Some(Ciphertext {
            c1: Point::from_slice(&bytes[..POINT_LEN])?,
            c2: Point::from_slice(&bytes[POINT_LEN..])?,
        })
    }
}

/// `(g^r, m·pk^r)`.
pub fn encrypt_with(pk: &Point, m: &Point, r: &Scalar) -> Ciphertext {
    Ciphertext { c1: Point::mul_base(r), c2: *m + *pk * r }
}

pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(pk: &Point, m: &Point, rng: &mut R) -> (Ciphertext, Scalar) {
    let r = Scalar::random_nonzero(rng);
    (encrypt_with(pk, m, &r), r)
}

/// `c2 / c1^sk`.
pub fn decrypt(sk: &Scalar, ct: &Ciphertext) -> Point {
    ct.c2 - ct.c1 * sk
}

/// Maps up to [`EMBED_MAX`] bytes to a point whose x-coordinate is
/// `len ‖ data ‖ zero padding ‖ ctr`.
pub fn embed(data: &[u8]) -> Result<Point, CryptoError> {
    if data.len() > EMBED_MAX {
        return Err(CryptoError::EmbeddingTooLong(EMBED_MAX));
    }
    let mut enc = [0u8; POINT_LEN];
    enc[0] = 0x02;
    enc[1] = data.len() as u8;
    enc[2..2 + data.len()].copy_from_slice(data);
    for ctr in 0..=255u8 {
        enc[POINT_LEN - 1] = ctr;
        if let Some(p) = Point::from_bytes_nonidentity(&enc) {
            return Ok(p);
        }
    }
    // Each candidate succeeds with probability about 1/2.
    Err(CryptoError::InvalidPoint)
}

/// Inverse of [`embed`]; `None` if the point is not an embedding.
pub fn unembed(p: &Point) -> Option<Vec<u8>> {
    let enc = p.to_bytes();
    let len = enc[1] as usize;
    if p.is_identity() || len > EMBED_MAX {
        return None;
    }
    let pad = &enc[2 + len..POINT_LEN - 1];
    if pad.iter().any(|&b| b != 0) {
        return None;
    }
    Some(enc[2..2 + len].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;

    #[test]
    fn decrypts_random_element() {
        let sk = Scalar::random(&mut OsRng);
        let pk = Point::mul_base(&sk);
        let m = Point::random(&mut OsRng);
        let (ct, _) = encrypt(&pk, &m, &mut OsRng);
        assert_eq!(decrypt(&sk, &ct), m);
        assert_eq!(Ciphertext::from_bytes(&ct.to_bytes()), Some(ct));
    }

    #[test]
    fn embedding_round_trips() {
        for s in ["", "hunter2", "correct horse battery staple!!"] {
            let p = embed(s.as_bytes()).unwrap();
            assert_eq!(unembed(&p).unwrap(), s.as_bytes());
        }
        assert!(embed(&[b'a'; 31]).is_err());
    }
}
