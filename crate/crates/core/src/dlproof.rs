//! One-out-of-many discrete-log proof: given a base `h` and a list
//! `C_0..C_{n-1}` (n a power of two), prove knowledge of `ℓ` and `w` with
//! `C_ℓ = h^w` without revealing `ℓ`. Groth-Kohlweiss construction with the
//! index committed bit by bit under a Pedersen key `(g, H)`; Fiat-Shamir
//! over the context, `h` and the ordered list.
//!
//! Encoding: `version ‖ m ‖ m×(c_l, c_a, c_b) ‖ m×c_d ‖ m×(f, z_a, z_b) ‖ z`
//! with 33-byte points and 32-byte scalars, so the size is `2 + 228m + 32`.

use std::sync::OnceLock;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::group::{POINT_LEN, SCALAR_LEN};
use crate::crypto::{hash_to_group, msm, Point, Scalar};

const VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DlProofError {
    #[error("list length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("list element at the index is not h^w")]
    WrongWitness,
}

fn commit_base() -> Point {
    static H: OnceLock<Point> = OnceLock::new();
    *H.get_or_init(|| hash_to_group(b"larch/dlproof/commitment-key"))
}

fn padding_element() -> Point {
    static P: OnceLock<Point> = OnceLock::new();
    *P.get_or_init(|| hash_to_group(b"larch/dlproof/padding"))
}

fn pedersen(v: &Scalar, r: &Scalar) -> Point {
    Point::mul_base(v) + commit_base() * r
}

/// A single-element list is padded to two with a fixed element.
fn normalize(list: &[Point]) -> Result<Vec<Point>, DlProofError> {
    let n = list.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DlProofError::NotPowerOfTwo(n));
    }
    let mut v = list.to_vec();
    if n == 1 {
        v.push(padding_element());
    }
    Ok(v)
}

pub fn proof_len(n: usize) -> usize {
    let m = n.max(2).trailing_zeros() as usize;
    2 + m * (4 * POINT_LEN + 3 * SCALAR_LEN) + SCALAR_LEN
}

struct Commitments {
    c_l: Vec<Point>,
    c_a: Vec<Point>,
    c_b: Vec<Point>,
    c_d: Vec<Point>,
}

fn challenge(context: &[u8], h: &Point, list: &[Point], cm: &Commitments) -> Scalar {
    let mut buf = Vec::with_capacity((list.len() + 4 * cm.c_l.len() + 1) * POINT_LEN + context.len() + 16);
    buf.extend_from_slice(&(context.len() as u64).to_be_bytes());
    buf.extend_from_slice(context);
    buf.extend_from_slice(&h.to_bytes());
    buf.extend_from_slice(&(list.len() as u64).to_be_bytes());
    for p in list.iter().chain(&cm.c_l).chain(&cm.c_a).chain(&cm.c_b).chain(&cm.c_d) {
        buf.extend_from_slice(&p.to_bytes());
    }
    Scalar::from_hash(b"larch/dlproof/challenge", &[&buf])
}

/// Multiplies polynomial `p` (coefficients low to high) by `(u·X + v)`.
fn poly_mul_linear(p: &[Scalar], u: Scalar, v: Scalar) -> Vec<Scalar> {
    let mut out = vec![Scalar::ZERO; p.len() + 1];
    for (k, c) in p.iter().enumerate() {
        out[k] += *c * v;
        out[k + 1] += *c * u;
    }
    out
}

pub fn dlproof_prove<R: RngCore + CryptoRng + ?Sized>(
    index: usize,
    w: &Scalar,
    h: &Point,
    list: &[Point],
    context: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, DlProofError> {
    let list = normalize(list)?;
    let n = list.len();
    if index >= n {
        return Err(DlProofError::IndexOutOfRange(index));
    }
    if list[index] != *h * w {
        return Err(DlProofError::WrongWitness);
    }
    let m = n.trailing_zeros() as usize;
    let bits: Vec<bool> = (0..m).map(|j| (index >> j) & 1 == 1).collect();
    let rand = |rng: &mut R| Scalar::random(rng);
    let r: Vec<Scalar> = (0..m).map(|_| rand(rng)).collect();
    let a: Vec<Scalar> = (0..m).map(|_| rand(rng)).collect();
    let s: Vec<Scalar> = (0..m).map(|_| rand(rng)).collect();
    let t: Vec<Scalar> = (0..m).map(|_| rand(rng)).collect();
    let rho: Vec<Scalar> = (0..m).map(|_| rand(rng)).collect();
    let l: Vec<Scalar> = bits.iter().map(|&b| Scalar::from_u64(b as u64)).collect();

    let c_l: Vec<Point> = (0..m).map(|j| pedersen(&l[j], &r[j])).collect();
    let c_a: Vec<Point> = (0..m).map(|j| pedersen(&a[j], &s[j])).collect();
    let c_b: Vec<Point> = (0..m).map(|j| pedersen(&(l[j] * a[j]), &t[j])).collect();

    // p_i(X) = Π_j f_{j,i_j}(X) with f_{j,1} = l_j X + a_j and
    // f_{j,0} = (1 − l_j) X − a_j.
    let polys: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            (0..m).fold(vec![Scalar::ONE], |p, j| {
                if (i >> j) & 1 == 1 {
                    poly_mul_linear(&p, l[j], a[j])
                } else {
                    poly_mul_linear(&p, Scalar::ONE - l[j], -a[j])
                }
            })
        })
        .collect();
    let c_d: Vec<Point> = (0..m)
        .map(|k| {
            let coeffs: Vec<Scalar> = polys.iter().map(|p| p[k]).collect();
            msm(&coeffs, &list) + *h * rho[k]
        })
        .collect();
    let cm = Commitments { c_l, c_a, c_b, c_d };
    let x = challenge(context, h, &list, &cm);

    let f: Vec<Scalar> = (0..m).map(|j| l[j] * x + a[j]).collect();
    let z_a: Vec<Scalar> = (0..m).map(|j| r[j] * x + s[j]).collect();
    let z_b: Vec<Scalar> = (0..m).map(|j| r[j] * (x - f[j]) + t[j]).collect();
    let mut xk = Scalar::ONE;
    let mut rho_sum = Scalar::ZERO;
    for rk in &rho {
        rho_sum += *rk * xk;
        xk *= x;
    }
    let z = *w * xk - rho_sum;

    let mut out = Vec::with_capacity(proof_len(n));
    out.push(VERSION);
    out.push(m as u8);
    for j in 0..m {
        for p in [&cm.c_l[j], &cm.c_a[j], &cm.c_b[j]] {
            out.extend_from_slice(&p.to_bytes());
        }
    }
    for p in &cm.c_d {
        out.extend_from_slice(&p.to_bytes());
    }
    for j in 0..m {
        for v in [&f[j], &z_a[j], &z_b[j]] {
            out.extend_from_slice(&v.to_bytes());
        }
    }
    out.extend_from_slice(&z.to_bytes());
    debug_assert_eq!(out.len(), proof_len(n));
    Ok(out)
}

/// Total: malformed input yields `false`.
pub fn dlproof_verify(proof: &[u8], h: &Point, list: &[Point], context: &[u8]) -> bool {
    verify_inner(proof, h, list, context).unwrap_or(false)
}

fn verify_inner(proof: &[u8], h: &Point, list: &[Point], context: &[u8]) -> Option<bool> {
    let list = normalize(list).ok()?;
    let n = list.len();
    let m = n.trailing_zeros() as usize;
    if proof.len() != proof_len(n) || proof[0] != VERSION || proof[1] as usize != m {
        return Some(false);
    }
    let mut pos = 2;
    let mut point = || {
        let p = Point::from_slice(&proof[pos..pos + POINT_LEN]);
        pos += POINT_LEN;
        p
    };
    let mut c_l = Vec::with_capacity(m);
    let mut c_a = Vec::with_capacity(m);
    let mut c_b = Vec::with_capacity(m);
    for _ in 0..m {
        c_l.push(point()?);
        c_a.push(point()?);
        c_b.push(point()?);
    }
    let c_d: Vec<Point> = (0..m).map(|_| point()).collect::<Option<_>>()?;
    let mut scalar = || {
        let s = Scalar::from_slice(&proof[pos..pos + SCALAR_LEN]);
        pos += SCALAR_LEN;
        s
    };
    let mut f = Vec::with_capacity(m);
    let mut z_a = Vec::with_capacity(m);
    let mut z_b = Vec::with_capacity(m);
    for _ in 0..m {
        f.push(scalar()?);
        z_a.push(scalar()?);
        z_b.push(scalar()?);
    }
    let z = scalar()?;

    let cm = Commitments { c_l, c_a, c_b, c_d };
    let x = challenge(context, h, &list, &cm);
    for j in 0..m {
        if cm.c_l[j] * x + cm.c_a[j] != pedersen(&f[j], &z_a[j]) {
            return Some(false);
        }
        if cm.c_l[j] * (x - f[j]) + cm.c_b[j] != commit_base() * z_b[j] {
            return Some(false);
        }
    }
    // Π C_i^{p_i(x)} · Π c_d_k^{−x^k} · h^{−z} = 1
    let f0: Vec<Scalar> = f.iter().map(|fj| x - *fj).collect();
    let mut scalars: Vec<Scalar> = (0..n)
        .map(|i| (0..m).fold(Scalar::ONE, |acc, j| acc * if (i >> j) & 1 == 1 { f[j] } else { f0[j] }))
        .collect();
    let mut points = list.clone();
    let mut xk = Scalar::ONE;
    for d in &cm.c_d {
        scalars.push(-xk);
        points.push(*d);
        xk *= x;
    }
    scalars.push(-z);
    points.push(*h);
    Some(msm(&scalars, &points).is_identity())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::OsRng;

    fn setup(n: usize, idx: usize) -> (Point, Vec<Point>, Scalar) {
        let h = Point::random(&mut OsRng);
        let w = Scalar::random_nonzero(&mut OsRng);
        let mut list: Vec<Point> = (0..n).map(|_| Point::random(&mut OsRng)).collect();
        list[idx] = h * w;
        (h, list, w)
    }

    #[test]
    fn degenerate_single_element() {
        let (h, list, w) = setup(1, 0);
        let p = dlproof_prove(0, &w, &h, &list, b"c", &mut OsRng).unwrap();
        assert!(dlproof_verify(&p, &h, &list, b"c"));
    }

    #[test]
    fn every_index_of_eight_verifies_and_order_is_bound() {
        for idx in 0..8 {
            let (h, mut list, w) = setup(8, idx);
            let p = dlproof_prove(idx, &w, &h, &list, b"ctx", &mut OsRng).unwrap();
            assert!(dlproof_verify(&p, &h, &list, b"ctx"));
            assert!(!dlproof_verify(&p, &h, &list, b"other"));
            list.swap(idx, (idx + 1) % 8);
            assert!(!dlproof_verify(&p, &h, &list, b"ctx"));
        }
    }

    #[test]
    fn refuses_bad_preconditions() {
        let (h, list, w) = setup(4, 2);
        assert_eq!(dlproof_prove(1, &w, &h, &list, b"", &mut OsRng), Err(DlProofError::WrongWitness));
        assert_eq!(dlproof_prove(4, &w, &h, &list, b"", &mut OsRng), Err(DlProofError::IndexOutOfRange(4)));
        assert_eq!(dlproof_prove(0, &w, &h, &list[..3], b"", &mut OsRng), Err(DlProofError::NotPowerOfTwo(3)));
        let p = dlproof_prove(2, &w, &h, &list, b"", &mut OsRng).unwrap();
        assert!(!dlproof_verify(&p, &h, &list[..2], b""));
        assert!(!dlproof_verify(&p[..p.len() - 1], &h, &list, b""));
        assert!(!dlproof_verify(&p, &Point::random(&mut OsRng), &list, b""));
    }

    #[test]
    fn size_grows_by_a_fixed_increment() {
        let len = |n: usize| {
            let (h, list, w) = setup(n, n - 1);
            dlproof_prove(n - 1, &w, &h, &list, b"", &mut OsRng).unwrap().len()
        };
        let (a, b, c) = (len(8), len(16), len(32));
        assert_eq!(b - a, c - b);
        assert_eq!(b, proof_len(16));
        assert_eq!(proof_len(512), 2 + 9 * 228 + 32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn flipped_byte_is_rejected(logn in 1usize..4, pos in any::<prop::sample::Index>(), mask in 1u8..) {
            let n = 1 << logn;
            let (h, list, w) = setup(n, n / 2);
            let mut p = dlproof_prove(n / 2, &w, &h, &list, b"", &mut OsRng).unwrap();
            let i = pos.index(p.len());
            p[i] ^= mask;
            prop_assert!(!dlproof_verify(&p, &h, &list, b""));
        }
    }
}
