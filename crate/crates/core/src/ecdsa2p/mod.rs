//! Two-party ECDSA with client-generated presignatures.
//!
//! The signing key is `x + y`: `x` belongs to the log (one per client),
//! `y` to the client (one per relying party), and `pk = g^x · g^y`.
//! A presignature carries `t = f(g^r)`, additive shares of `r⁻¹`, of a MAC
//! key `α` and of `α·r⁻¹`, and an authenticated Beaver triple. Signing is one
//! exchange of `(d_i, e_i)` followed by a MAC-checked opening of `s`.
//!
//! Party 0 is the log, party 1 the client.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::prg::prg_expand;
use crate::crypto::{commit, verify_commitment, Commitment, Point, Scalar, Signature};

pub const LOG_HALF_LEN: usize = 6 * 32;
const BATCH_VERSION: u8 = 1;
const BATCH_HEADER: usize = 1 + 8 + 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Ecdsa2pError {
    #[error("public share is the identity")]
    IdentityKey,
    #[error("presignature {0} was already used")]
    Reuse(u64),
    #[error("presignature {0} is void")]
    Void(u64),
    #[error("MAC check failed")]
    Abort,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Party {
    Log = 0,
    Client = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogSigningKey {
    pub x: Scalar,
    pub big_x: Point,
}

pub fn log_key_gen<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> LogSigningKey {
    let x = Scalar::random_nonzero(rng);
    LogSigningKey { x, big_x: Point::mul_base(&x) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClientCredentialKey {
    pub y: Scalar,
    pub pk: Point,
}

pub fn client_key_gen<R: RngCore + CryptoRng + ?Sized>(
    big_x: &Point,
    rng: &mut R,
) -> Result<ClientCredentialKey, Ecdsa2pError> {
    if big_x.is_identity() {
        return Err(Ecdsa2pError::IdentityKey);
    }
    let y = Scalar::random_nonzero(rng);
    Ok(ClientCredentialKey { y, pk: *big_x + Point::mul_base(&y) })
}

/// One party's share of a presignature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PresigHalf {
    pub t: Scalar,
    pub r: Scalar,
    pub r_hat: Scalar,
    pub alpha: Scalar,
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    pub f: Scalar,
    pub g: Scalar,
    pub h: Scalar,
}

/// The explicit part of the log's half; the rest is re-derived from the
/// batch's log seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressedLogHalf {
    pub t: Scalar,
    pub r_hat: Scalar,
    pub c: Scalar,
    pub f: Scalar,
    pub g: Scalar,
    pub h: Scalar,
}

impl CompressedLogHalf {
    /// `t = 0` marks a void index.
    pub const VOID: CompressedLogHalf = CompressedLogHalf {
        t: Scalar::ZERO,
        r_hat: Scalar::ZERO,
        c: Scalar::ZERO,
        f: Scalar::ZERO,
        g: Scalar::ZERO,
        h: Scalar::ZERO,
    };

    pub fn is_void(&self) -> bool {
        self.t.is_zero()
    }

    pub fn to_bytes(&self) -> [u8; LOG_HALF_LEN] {
        let mut out = [0u8; LOG_HALF_LEN];
        for (i, s) in [self.t, self.r_hat, self.c, self.f, self.g, self.h].iter().enumerate() {
            out[32 * i..32 * i + 32].copy_from_slice(&s.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<CompressedLogHalf> {
        if bytes.len() != LOG_HALF_LEN {
            return None;
        }
        let s = |i: usize| Scalar::from_slice(&bytes[32 * i..32 * i + 32]);
        Some(CompressedLogHalf { t: s(0)?, r_hat: s(1)?, c: s(2)?, f: s(3)?, g: s(4)?, h: s(5)? })
    }
}

fn client_prg(seed: &[u8; 32], index: u64) -> [Scalar; 9] {
    prg_expand(seed, index, 9).try_into().expect("nine scalars")
}

fn log_prg(seed: &[u8; 32], index: u64) -> [Scalar; 4] {
    prg_expand(seed, index, 4).try_into().expect("four scalars")
}

/// The client's half, entirely derived from its batch seed.
pub fn client_half(seed: &[u8; 32], index: u64, t: Scalar) -> PresigHalf {
    let [r, r_hat, alpha, a, b, c, f, g, h] = client_prg(seed, index);
    PresigHalf { t, r, r_hat, alpha, a, b, c, f, g, h }
}

/// The log's half: `r, α, a, b` from the log seed, the rest explicit.
pub fn log_half(seed: &[u8; 32], index: u64, explicit: &CompressedLogHalf) -> PresigHalf {
    let [r, alpha, a, b] = log_prg(seed, index);
    let e = explicit;
    PresigHalf { t: e.t, r, r_hat: e.r_hat, alpha, a, b, c: e.c, f: e.f, g: e.g, h: e.h }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PresigBatch {
    pub start: u64,
    pub client_seed: [u8; 32],
    pub log_seed: [u8; 32],
    /// `t` per index; zero for void indices.
    pub ts: Vec<Scalar>,
    pub log_halves: Vec<CompressedLogHalf>,
}

fn derive_seed(master: &[u8; 32], label: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"larch/presign/");
    h.update(label);
    h.update(master);
    h.finalize().into()
}

/// Deals `count` presignatures for indices `start..start+count`. An index
/// whose `r⁻¹` or `t` would be zero is marked void and never used.
pub fn presign_batch(master: &[u8; 32], start: u64, count: usize) -> PresigBatch {
    let client_seed = derive_seed(master, b"client");
    let log_seed = derive_seed(master, b"log");
    let mut ts = Vec::with_capacity(count);
    let mut log_halves = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let idx = start + i;
        let [r1, r_hat1, alpha1, a1, b1, c1, f1, g1, h1] = client_prg(&client_seed, idx);
        let [r0, alpha0, a0, b0] = log_prg(&log_seed, idx);
        let r_inv = r0 + r1;
        let t = r_inv.invert().map(|r| Point::mul_base(&r).conversion()).unwrap_or(Scalar::ZERO);
        if t.is_zero() {
            ts.push(Scalar::ZERO);
            log_halves.push(CompressedLogHalf::VOID);
            continue;
        }
        let alpha = alpha0 + alpha1;
        let (a, b) = (a0 + a1, b0 + b1);
        let c = a * b;
        ts.push(t);
        log_halves.push(CompressedLogHalf {
            t,
            r_hat: alpha * r_inv - r_hat1,
            c: c - c1,
            f: alpha * a - f1,
            g: alpha * b - g1,
            h: alpha * c - h1,
        });
    }
    PresigBatch { start, client_seed, log_seed, ts, log_halves }
}

/// Batch file: `version ‖ start u64 ‖ count u32 ‖ count × 192-byte log halves`.
pub fn encode_batch_file(start: u64, halves: &[CompressedLogHalf]) -> Vec<u8> {
    let mut out = Vec::with_capacity(BATCH_HEADER + halves.len() * LOG_HALF_LEN);
    out.push(BATCH_VERSION);
    out.extend_from_slice(&start.to_be_bytes());
    out.extend_from_slice(&(halves.len() as u32).to_be_bytes());
    for h in halves {
        out.extend_from_slice(&h.to_bytes());
    }
    out
}

pub fn decode_batch_file(bytes: &[u8]) -> Result<(u64, Vec<CompressedLogHalf>), Ecdsa2pError> {
    if bytes.len() < BATCH_HEADER || bytes[0] != BATCH_VERSION {
        return Err(Ecdsa2pError::Malformed("presignature batch header"));
    }
    let start = u64::from_be_bytes(bytes[1..9].try_into().unwrap());
    let count = u32::from_be_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let body = &bytes[BATCH_HEADER..];
    if body.len() != count * LOG_HALF_LEN {
        return Err(Ecdsa2pError::Malformed("presignature batch length"));
    }
    let halves = body
        .chunks_exact(LOG_HALF_LEN)
        .map(CompressedLogHalf::from_bytes)
        .collect::<Option<Vec<_>>>()
        .ok_or(Ecdsa2pError::Malformed("presignature entry"))?;
    Ok((start, halves))
}

/// Indices already consumed by one party.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsedIndices(BTreeSet<u64>);

impl UsedIndices {
    pub fn new() -> UsedIndices {
        UsedIndices::default()
    }

    pub fn contains(&self, index: u64) -> bool {
        self.0.contains(&index)
    }

    pub fn mark(&mut self, index: u64) -> Result<(), Ecdsa2pError> {
        if self.0.insert(index) {
            Ok(())
        } else {
            Err(Ecdsa2pError::Reuse(index))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Round1Msg {
    pub d: Scalar,
    pub e: Scalar,
}

impl Round1Msg {
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.d.to_bytes());
        out[32..].copy_from_slice(&self.e.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Round1Msg> {
        if bytes.len() != 64 {
            return None;
        }
        Some(Round1Msg { d: Scalar::from_slice(&bytes[..32])?, e: Scalar::from_slice(&bytes[32..])? })
    }
}

#[derive(Clone, Debug)]
pub struct SignShareState {
    pub party: Party,
    pub index: u64,
    half: PresigHalf,
    pub mine: Round1Msg,
}

/// `d_i = r_i − a_i`, `e_i = key_i − b_i`. Marks `index` used first, so a
/// second attempt fails before any message exists.
pub fn sign_round1(
    party: Party,
    index: u64,
    half: &PresigHalf,
    key_share: &Scalar,
    used: &mut UsedIndices,
) -> Result<(Round1Msg, SignShareState), Ecdsa2pError> {
    if half.t.is_zero() {
        return Err(Ecdsa2pError::Void(index));
    }
    used.mark(index)?;
    let mine = Round1Msg { d: half.r - half.a, e: *key_share - half.b };
    Ok((mine, SignShareState { party, index, half: *half, mine }))
}

/// Output of round 2: signature and MAC shares plus the opened `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignShares {
    pub party: Party,
    pub t: Scalar,
    pub s: Scalar,
    pub s_hat: Scalar,
    pub d_hat: Scalar,
    pub alpha: Scalar,
    pub d: Scalar,
}

/// `z_i = [i=0]·de + d·b_i + e·a_i + c_i`,
/// `ẑ_i = de·α_i + d·g_i + e·f_i + h_i`,
/// `s_i = r_i·H + z_i·t`, `ŝ_i = r̂_i·H + ẑ_i·t`, `d̂_i = r̂_i − f_i`.
pub fn sign_round2(state: &SignShareState, other: &Round1Msg, digest: &Scalar) -> SignShares {
    let p = &state.half;
    let d = state.mine.d + other.d;
    let e = state.mine.e + other.e;
    let de = d * e;
    let mut z = d * p.b + e * p.a + p.c;
    if state.party == Party::Log {
        z += de;
    }
    let z_hat = de * p.alpha + d * p.g + e * p.f + p.h;
    SignShares {
        party: state.party,
        t: p.t,
        s: p.r * digest + z * p.t,
        s_hat: p.r_hat * digest + z_hat * p.t,
        d_hat: p.r_hat - p.f,
        alpha: p.alpha,
        d,
    }
}

impl SignShares {
    /// `(σ_i, τ_i) = (ŝ_i − α_i·s, d̂_i − α_i·d)` for the opened `s`.
    pub fn mac_shares(&self, s: &Scalar) -> (Scalar, Scalar) {
        (self.s_hat - self.alpha * s, self.d_hat - self.alpha * self.d)
    }
}

/// Final check given both parties' MAC shares.
pub fn check_opening(
    t: Scalar,
    s: Scalar,
    mine: (Scalar, Scalar),
    theirs: (Scalar, Scalar),
) -> Result<Signature, Ecdsa2pError> {
    let sigma = mine.0 + theirs.0;
    let tau = mine.1 + theirs.1;
    if !sigma.is_zero() || !tau.is_zero() || s.is_zero() || t.is_zero() {
        return Err(Ecdsa2pError::Abort);
    }
    Ok(Signature { r: t, s })
}

/// Both parties' round-2 outputs opened together.
pub fn open_check(a: &SignShares, b: &SignShares) -> Result<Signature, Ecdsa2pError> {
    if a.d != b.d || a.t != b.t || a.party == b.party {
        return Err(Ecdsa2pError::Abort);
    }
    let s = a.s + b.s;
    check_opening(a.t, s, a.mac_shares(&s), b.mac_shares(&s))
}

fn mac_commit_key(sigma: &Scalar, tau: &Scalar) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"larch/mac-open");
    h.update(sigma.to_bytes());
    h.update(tau.to_bytes());
    h.finalize().into()
}

/// Commitment to `(σ, τ)` for the commit-then-reveal opening.
pub fn commit_mac<R: RngCore + CryptoRng + ?Sized>(sigma: &Scalar, tau: &Scalar, rng: &mut R) -> (Commitment, [u8; 32]) {
    let mut nonce = [0u8; 32];
    rng.fill_bytes(&mut nonce);
    let cm = commit(&mac_commit_key(sigma, tau), &nonce).expect("32-byte inputs");
    (cm, nonce)
}

pub fn verify_mac_commitment(cm: &Commitment, sigma: &Scalar, tau: &Scalar, nonce: &[u8; 32]) -> bool {
    verify_commitment(cm, &mac_commit_key(sigma, tau), nonce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::ecdsa::{message_scalar, verify_digest};
    use proptest::prelude::*;
    use rand::rngs::OsRng;

    fn halves(batch: &PresigBatch, i: usize) -> (PresigHalf, PresigHalf) {
        let idx = batch.start + i as u64;
        (log_half(&batch.log_seed, idx, &batch.log_halves[i]), client_half(&batch.client_seed, idx, batch.ts[i]))
    }

    fn sign(lk: &LogSigningKey, ck: &ClientCredentialKey, p0: &PresigHalf, p1: &PresigHalf, h: &Scalar) -> (SignShares, SignShares) {
        let (m0, s0) = sign_round1(Party::Log, 0, p0, &lk.x, &mut UsedIndices::new()).unwrap();
        let (m1, s1) = sign_round1(Party::Client, 0, p1, &ck.y, &mut UsedIndices::new()).unwrap();
        (sign_round2(&s0, &m1, h), sign_round2(&s1, &m0, h))
    }

    #[test]
    fn presignature_invariants_hold() {
        let batch = presign_batch(&[9; 32], 100, 8);
        for i in 0..8 {
            let (p0, p1) = halves(&batch, i);
            let r_inv = p0.r + p1.r;
            let alpha = p0.alpha + p1.alpha;
            let (a, b, c) = (p0.a + p1.a, p0.b + p1.b, p0.c + p1.c);
            assert_eq!(Point::mul_base(&r_inv.invert().unwrap()).conversion(), p0.t);
            assert_eq!(p0.r_hat + p1.r_hat, alpha * r_inv);
            assert_eq!(a * b, c);
            assert_eq!(p0.f + p1.f, alpha * a);
            assert_eq!(p0.g + p1.g, alpha * b);
            assert_eq!(p0.h + p1.h, alpha * c);
        }
    }

    #[test]
    fn batch_file_round_trip() {
        let batch = presign_batch(&[1; 32], 7, 3);
        let file = encode_batch_file(batch.start, &batch.log_halves);
        assert_eq!(file.len(), 13 + 3 * LOG_HALF_LEN);
        assert_eq!(decode_batch_file(&file).unwrap(), (7, batch.log_halves.clone()));
        assert!(decode_batch_file(&file[..file.len() - 1]).is_err());
    }

    #[test]
    fn honest_signature_verifies_and_matches_formula() {
        let lk = log_key_gen(&mut OsRng);
        let ck = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
        let batch = presign_batch(&[3; 32], 0, 1);
        let (p0, p1) = halves(&batch, 0);
        let h = message_scalar(b"hello");
        let (a, b) = sign(&lk, &ck, &p0, &p1, &h);
        let sig = open_check(&a, &b).unwrap();
        let expected = (p0.r + p1.r) * (h + p0.t * (lk.x + ck.y));
        assert_eq!(sig.s, expected);
        assert!(verify_digest(&ck.pk, &h, &sig));
        assert_eq!(a.s_hat + b.s_hat, (a.alpha + b.alpha) * (a.s + b.s));
    }

    #[test]
    fn tampering_aborts() {
        let lk = log_key_gen(&mut OsRng);
        let ck = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
        let batch = presign_batch(&[4; 32], 0, 1);
        let (p0, p1) = halves(&batch, 0);
        let h = message_scalar(b"m");
        let (mut a, b) = sign(&lk, &ck, &p0, &p1, &h);
        a.s += Scalar::ONE;
        assert_eq!(open_check(&a, &b), Err(Ecdsa2pError::Abort));

        let (m0, s0) = sign_round1(Party::Log, 0, &p0, &lk.x, &mut UsedIndices::new()).unwrap();
        let (mut m1, s1) = sign_round1(Party::Client, 0, &p1, &ck.y, &mut UsedIndices::new()).unwrap();
        m1.d += Scalar::ONE;
        let a = sign_round2(&s0, &m1, &h);
        let mut b = sign_round2(&s1, &m0, &h);
        b.d = a.d;
        assert_eq!(open_check(&a, &b), Err(Ecdsa2pError::Abort));
    }

    #[test]
    fn shifted_key_share_signs_under_tweaked_key() {
        let lk = log_key_gen(&mut OsRng);
        let ck = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
        let omega = Scalar::random(&mut OsRng);
        let shifted = ClientCredentialKey { y: ck.y + omega, pk: ck.pk };
        let batch = presign_batch(&[5; 32], 0, 1);
        let (p0, p1) = halves(&batch, 0);
        let h = message_scalar(b"tweak");
        let (a, b) = sign(&lk, &shifted, &p0, &p1, &h);
        let sig = open_check(&a, &b).unwrap();
        assert!(verify_digest(&(ck.pk + Point::mul_base(&omega)), &h, &sig));
        assert!(!verify_digest(&ck.pk, &h, &sig));
    }

    #[test]
    fn reuse_fails_before_any_message() {
        let batch = presign_batch(&[6; 32], 0, 1);
        let (_, p1) = halves(&batch, 0);
        let mut used = UsedIndices::new();
        assert!(sign_round1(Party::Client, 0, &p1, &Scalar::ONE, &mut used).is_ok());
        assert_eq!(sign_round1(Party::Client, 0, &p1, &Scalar::ONE, &mut used).err(), Some(Ecdsa2pError::Reuse(0)));
    }

    #[test]
    fn key_generation() {
        assert_eq!(client_key_gen(&Point::identity(), &mut OsRng), Err(Ecdsa2pError::IdentityKey));
        let lk = log_key_gen(&mut OsRng);
        assert_eq!(Point::mul_base(&lk.x), lk.big_x);
        let a = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
        let b = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
        assert_ne!(a.pk, b.pk);
        assert_eq!(a.pk - lk.big_x, Point::mul_base(&a.y));
        let xs: std::collections::HashSet<[u8; 32]> = (0..1000).map(|_| Scalar::random(&mut OsRng).to_bytes()).collect();
        assert_eq!(xs.len(), 1000);
    }

    #[test]
    fn mac_commitment_binds() {
        let (s, t) = (Scalar::from_u64(5), Scalar::from_u64(6));
        let (cm, n) = commit_mac(&s, &t, &mut OsRng);
        assert!(verify_mac_commitment(&cm, &s, &t, &n));
        assert!(!verify_mac_commitment(&cm, &t, &s, &n));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_keys_and_messages_verify(seed: [u8; 32], msg: Vec<u8>, idx in 0u64..1_000_000) {
            let lk = log_key_gen(&mut OsRng);
            let ck = client_key_gen(&lk.big_x, &mut OsRng).unwrap();
            let batch = presign_batch(&seed, idx, 1);
            let (p0, p1) = halves(&batch, 0);
            let h = message_scalar(&msg);
            let (a, b) = sign(&lk, &ck, &p0, &p1, &h);
            let sig = open_check(&a, &b).unwrap();
            prop_assert!(verify_digest(&(lk.big_x + Point::mul_base(&ck.y)), &h, &sig));
        }
    }
}
