//! P-256 scalars and group elements.
//!
//! Thin newtypes over the `p256` arithmetic backend. Scalars serialize as 32
//! big-endian bytes, points as 33-byte SEC1 compressed encodings with the
//! identity written as 33 zero bytes.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use p256::elliptic_curve::bigint::U256;
use p256::elliptic_curve::group::prime::PrimeCurveAffine;
use p256::elliptic_curve::group::{Group, GroupEncoding};
use p256::elliptic_curve::ops::Reduce;
use p256::elliptic_curve::point::AffineCoordinates;
use p256::elliptic_curve::{Field, PrimeField};
use p256::{AffinePoint, FieldBytes, ProjectivePoint};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

pub const SCALAR_LEN: usize = 32;
pub const POINT_LEN: usize = 33;

/// Element of Z_q for the P-256 group order q.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct Scalar(pub(crate) p256::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(p256::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(p256::Scalar::ONE);

    /// Uniform sample by rejection from 256-bit strings.
    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Scalar {
        loop {
            let mut buf = [0u8; 32];
            rng.fill_bytes(&mut buf);
            if let Some(s) = Scalar::from_bytes(&buf) {
                return s;
            }
        }
    }

    /// Uniform non-zero sample.
    pub fn random_nonzero<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Scalar {
        loop {
            let s = Scalar::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    /// Canonical decoding; `None` when the integer is not below q.
    pub fn from_bytes(bytes: &[u8; 32]) -> Option<Scalar> {
        Option::from(p256::Scalar::from_repr(FieldBytes::clone_from_slice(bytes))).map(Scalar)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Scalar> {
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Scalar::from_bytes(&arr)
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_repr().into()
    }

    /// Interprets 32 bytes as a big-endian integer and reduces it mod q.
    /// This is the digest-to-scalar map used by ECDSA.
    pub fn reduce_bytes(bytes: &[u8; 32]) -> Scalar {
        Scalar(<p256::Scalar as Reduce<U256>>::reduce_bytes(
            &FieldBytes::clone_from_slice(bytes),
        ))
    }

    /// Hash-derived scalar: SHA-256 over the parts and a counter, retried
    /// until the output is below q.
    pub fn from_hash(domain: &[u8], parts: &[&[u8]]) -> Scalar {
        for ctr in 0u32.. {
            let mut h = Sha256::new();
            h.update((domain.len() as u32).to_be_bytes());
            h.update(domain);
            for p in parts {
                h.update((p.len() as u64).to_be_bytes());
                h.update(p);
            }
            h.update(ctr.to_be_bytes());
            let out: [u8; 32] = h.finalize().into();
            if let Some(s) = Scalar::from_bytes(&out) {
                return s;
            }
        }
        unreachable!("counter space exhausted")
    }

    pub fn from_u64(v: u64) -> Scalar {
        Scalar(p256::Scalar::from(v))
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }

    pub fn invert(&self) -> Option<Scalar> {
        Option::from(self.0.invert()).map(Scalar)
    }

    pub fn square(&self) -> Scalar {
        Scalar(self.0.square())
    }

    pub fn pow_u64(&self, mut e: u64) -> Scalar {
        let mut base = *self;
        let mut acc = Scalar::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                Scalar(self.0 $op rhs.0)
            }
        }
        impl $assign_trait for Scalar {
            fn $assign_method(&mut self, rhs: Scalar) {
                self.0 = self.0 $op rhs.0;
            }
        }
    };
}

scalar_binop!(Add, add, AddAssign, add_assign, +);
scalar_binop!(Sub, sub, SubAssign, sub_assign, -);
scalar_binop!(Mul, mul, MulAssign, mul_assign, *);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |a, b| a + b)
    }
}

/// Element of the P-256 group, including the identity.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Point(pub(crate) ProjectivePoint);

impl Point {
    pub fn generator() -> Point {
        Point(ProjectivePoint::GENERATOR)
    }

    pub fn identity() -> Point {
        Point(ProjectivePoint::IDENTITY)
    }

    /// g^s.
    pub fn mul_base(s: &Scalar) -> Point {
        Point(ProjectivePoint::GENERATOR * s.0)
    }

    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Point {
        Point::mul_base(&Scalar::random_nonzero(rng))
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.0.is_identity())
    }

    pub fn to_bytes(&self) -> [u8; POINT_LEN] {
        if self.is_identity() {
            return [0u8; POINT_LEN];
        }
        let enc = self.0.to_affine().to_bytes();
        let mut out = [0u8; POINT_LEN];
        out.copy_from_slice(&enc);
        out
    }

    /// Decodes a compressed point; rejects off-curve and non-canonical input.
    pub fn from_bytes(bytes: &[u8; POINT_LEN]) -> Option<Point> {
        if bytes.iter().all(|&b| b == 0) {
            return Some(Point::identity());
        }
        if bytes[0] != 0x02 && bytes[0] != 0x03 {
            return None;
        }
        let repr = p256::CompressedPoint::clone_from_slice(bytes);
        let affine: Option<AffinePoint> = AffinePoint::from_bytes(&repr).into();
        affine.map(|a| Point(a.to_curve()))
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Point> {
        let arr: [u8; POINT_LEN] = bytes.try_into().ok()?;
        Point::from_bytes(&arr)
    }

    /// Decoding that also rejects the identity.
    pub fn from_bytes_nonidentity(bytes: &[u8; POINT_LEN]) -> Option<Point> {
        Point::from_bytes(bytes).filter(|p| !p.is_identity())
    }

    /// The ECDSA conversion function: affine x-coordinate reduced mod q.
    /// The identity maps to zero.
    pub fn conversion(&self) -> Scalar {
        if self.is_identity() {
            return Scalar::ZERO;
        }
        let x = self.0.to_affine().x();
        Scalar(<p256::Scalar as Reduce<U256>>::reduce_bytes(&x))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", hex::encode(self.to_bytes()))
    }
}

impl Default for Point {
    fn default() -> Self {
        Point::identity()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Point> for Point {
    type Output = Point;
    fn add(self, rhs: &'a Point) -> Point {
        Point(self.0 + rhs.0)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.0 += rhs.0;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point(self.0 - rhs.0)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(-self.0)
    }
}

impl Mul<Scalar> for Point {
    type Output = Point;
    fn mul(self, rhs: Scalar) -> Point {
        Point(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Scalar> for Point {
    type Output = Point;
    fn mul(self, rhs: &'a Scalar) -> Point {
        Point(self.0 * rhs.0)
    }
}

impl Sum for Point {
    fn sum<I: Iterator<Item = Point>>(iter: I) -> Point {
        iter.fold(Point::identity(), |a, b| a + b)
    }
}

/// Deterministic map from byte strings to non-identity group elements.
///
/// Try-and-increment: SHA-256(input ‖ ctr) is taken as an x-coordinate with
/// even y until it lands on the curve.
pub fn hash_to_group(input: &[u8]) -> Point {
    for ctr in 0u32.. {
        let mut h = Sha256::new();
        h.update(input);
        h.update(ctr.to_be_bytes());
        let x: [u8; 32] = h.finalize().into();
        let mut enc = [0u8; POINT_LEN];
        enc[0] = 0x02;
        enc[1..].copy_from_slice(&x);
        if let Some(p) = Point::from_bytes_nonidentity(&enc) {
            return p;
        }
    }
    unreachable!("counter space exhausted")
}

/// Multi-scalar multiplication Σ sᵢ·Pᵢ using bucketed windows.
pub fn msm(scalars: &[Scalar], points: &[Point]) -> Point {
    assert_eq!(scalars.len(), points.len(), "msm length mismatch");
    let n = scalars.len();
    if n == 0 {
        return Point::identity();
    }
    if n < 8 {
        return scalars.iter().zip(points).map(|(s, p)| *p * s).sum();
    }
    let c: usize = match n {
        0..=31 => 3,
        32..=127 => 4,
        128..=511 => 5,
        512..=2047 => 6,
        _ => 8,
    };
    let digits: Vec<[u8; 32]> = scalars.iter().map(Scalar::to_bytes).collect();
    let windows = 256usize.div_ceil(c);
    let mut acc = ProjectivePoint::IDENTITY;
    for w in (0..windows).rev() {
        for _ in 0..c {
            acc = acc.double();
        }
        let mut buckets = vec![ProjectivePoint::IDENTITY; (1 << c) - 1];
        for (d, p) in digits.iter().zip(points) {
            let v = window_value(d, w * c, c);
            if v != 0 {
                buckets[v - 1] += p.0;
            }
        }
        let mut running = ProjectivePoint::IDENTITY;
        let mut sum = ProjectivePoint::IDENTITY;
        for b in buckets.iter().rev() {
            running += b;
            sum += running;
        }
        acc += sum;
    }
    Point(acc)
}

/// Bits [start, start+width) of a big-endian 256-bit integer.
fn window_value(be: &[u8; 32], start: usize, width: usize) -> usize {
    let mut v = 0usize;
    for i in 0..width {
        let bit = start + i;
        if bit >= 256 {
            break;
        }
        let byte = be[31 - bit / 8];
        if (byte >> (bit % 8)) & 1 == 1 {
            v |= 1 << i;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;
    use std::collections::HashSet;

    #[test]
    fn scalar_roundtrip_and_reduction() {
        let s = Scalar::random(&mut OsRng);
        assert_eq!(Scalar::from_bytes(&s.to_bytes()), Some(s));
        // q itself is not canonical
        let q = hex_arr("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551");
        assert_eq!(Scalar::from_bytes(&q), None);
        assert!(Scalar::reduce_bytes(&q).is_zero());
    }

    #[test]
    fn point_encoding_roundtrip() {
        let p = Point::random(&mut OsRng);
        assert_eq!(Point::from_bytes(&p.to_bytes()), Some(p));
        assert_eq!(Point::from_bytes(&[0u8; 33]), Some(Point::identity()));
        let mut bad = p.to_bytes();
        bad[0] = 0x05;
        assert_eq!(Point::from_bytes(&bad), None);
    }

    #[test]
    fn hash_to_group_is_deterministic_and_valid() {
        let a = hash_to_group(b"example.com");
        assert_eq!(a, hash_to_group(b"example.com"));
        assert!(!a.is_identity());
        assert_ne!(a, hash_to_group(b"example.org"));
    }

    #[test]
    fn hash_to_group_no_collisions_over_10k_inputs() {
        let mut seen = HashSet::new();
        for i in 0u32..10_000 {
            let p = hash_to_group(&i.to_be_bytes());
            assert!(!p.is_identity());
            assert!(seen.insert(p.to_bytes()), "collision at {i}");
        }
    }

    #[test]
    fn msm_matches_naive_sum() {
        for n in [0usize, 1, 5, 9, 40, 200, 600] {
            let scalars: Vec<Scalar> = (0..n).map(|_| Scalar::random(&mut OsRng)).collect();
            let points: Vec<Point> = (0..n).map(|_| Point::random(&mut OsRng)).collect();
            let naive: Point = scalars.iter().zip(&points).map(|(s, p)| *p * s).sum();
            assert_eq!(msm(&scalars, &points), naive, "n = {n}");
        }
    }

    #[test]
    fn conversion_of_generator_is_its_x_coordinate() {
        // x-coordinate of the P-256 base point is below q, so no reduction occurs.
        let gx = hex_arr("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296");
        assert_eq!(Point::generator().conversion(), Scalar::from_bytes(&gx).unwrap());
        assert!(Point::identity().conversion().is_zero());
    }

    fn hex_arr(s: &str) -> [u8; 32] {
        hex::decode(s).unwrap().try_into().unwrap()
    }
}
