//! Non-interactive zero-knowledge proofs for Boolean circuits by
//! MPC-in-the-head (three-party, ZKB++ style, Fiat-Shamir).
//!
//! The relation is a circuit whose first `witness_blocks` input blocks are
//! the witness and whose remaining blocks are public. A statement holds when
//! every output bit is 1.

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{eval_plaintext, BooleanCircuit, GateOp};
use crate::crypto::prg::prg_bytes;

const VERSION: u8 = 1;
const SEED_LEN: usize = 16;
const HEADER_LEN: usize = 1 + 2 + 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ZkError {
    #[error("{what}: expected {expected} bits, got {got}")]
    InputLength { what: &'static str, expected: usize, got: usize },
    #[error("witness does not satisfy the relation")]
    Unsatisfied,
    #[error("repetition count must be between 1 and 65535")]
    Params,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZkParams {
    pub reps: usize,
}

impl ZkParams {
    /// Fast profile for tests; soundness error about 2^-11.7.
    pub const TEST: ZkParams = ZkParams { reps: 20 };
    /// Soundness error (2/3)^137 < 2^-80.
    pub const PROD: ZkParams = ZkParams { reps: 137 };

    pub fn soundness_bits(&self) -> f64 {
        self.reps as f64 * (1.5f64).log2()
    }
}

#[derive(Clone, Copy)]
pub struct Relation<'a> {
    pub circuit: &'a BooleanCircuit,
    pub witness_blocks: usize,
}

impl Relation<'_> {
    pub fn witness_len(&self) -> usize {
        self.circuit.input_blocks()[..self.witness_blocks].iter().sum()
    }

    pub fn public_len(&self) -> usize {
        self.circuit.num_inputs() - self.witness_len()
    }

    fn rep_len(&self) -> usize {
        32 + 2 * SEED_LEN + self.witness_len().div_ceil(8) + self.circuit.and_count().div_ceil(8)
    }

    /// Exact proof size; affine in the repetition count.
    pub fn proof_len(&self, params: ZkParams) -> usize {
        HEADER_LEN + params.reps * (4 + self.rep_len())
    }
}

fn get_bit(bytes: &[u8], i: usize) -> u8 {
    (bytes[i / 8] >> (i % 8)) & 1
}

fn set_bit(bytes: &mut [u8], i: usize, v: u8) {
    bytes[i / 8] |= (v & 1) << (i % 8);
}

fn pack(bits: impl Iterator<Item = u8>, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len.div_ceil(8)];
    for (i, b) in bits.enumerate() {
        set_bit(&mut out, i, b);
    }
    out
}

/// Unused high bits of the final byte must be zero.
fn padding_is_clean(bytes: &[u8], bits: usize) -> bool {
    bits.is_multiple_of(8) || bytes.last().is_none_or(|b| b >> (bits % 8) == 0)
}

fn tape(seed: &[u8; SEED_LEN], rep: u16, party: u8, bits: usize) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"larch/zk/tape");
    h.update(seed);
    h.update(rep.to_be_bytes());
    h.update([party]);
    let key: [u8; 32] = h.finalize().into();
    prg_bytes(&key, 0, bits.div_ceil(8))
}

fn view_commitment(
    rep: u16,
    party: u8,
    seed: &[u8; SEED_LEN],
    x2: Option<&[u8]>,
    and_bits: &[u8],
    out: &[u8],
) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"larch/zk/view");
    h.update(rep.to_be_bytes());
    h.update([party]);
    h.update(seed);
    if let Some(x2) = x2 {
        h.update(x2);
    }
    h.update(and_bits);
    h.update(out);
    h.finalize().into()
}

struct RepTranscript {
    commits: [[u8; 32]; 3],
    outs: [Vec<u8>; 3],
}

fn challenge_hash(rel: &Relation, public: &[bool], context: &[u8], reps: &[RepTranscript]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"larch/zk/challenge");
    h.update(rel.circuit.digest());
    h.update((rel.witness_blocks as u64).to_be_bytes());
    h.update((context.len() as u64).to_be_bytes());
    h.update(context);
    h.update((public.len() as u64).to_be_bytes());
    h.update(pack(public.iter().map(|&b| b as u8), public.len()));
    h.update((reps.len() as u64).to_be_bytes());
    for r in reps {
        for c in &r.commits {
            h.update(c);
        }
        for o in &r.outs {
            h.update(o);
        }
    }
    h.finalize().into()
}

/// Trits in {0,1,2} from 2-bit chunks of `h`, rehashing as needed.
fn challenges(h: &[u8; 32], reps: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(reps);
    let mut cur = *h;
    loop {
        for byte in cur {
            for shift in [6, 4, 2, 0] {
                let t = (byte >> shift) & 3;
                if t < 3 {
                    out.push(t);
                    if out.len() == reps {
                        return out;
                    }
                }
            }
        }
        cur = Sha256::digest(cur).into();
    }
}

fn check_inputs(rel: &Relation, public: &[bool]) -> Result<(), ZkError> {
    if public.len() != rel.public_len() {
        return Err(ZkError::InputLength { what: "public input", expected: rel.public_len(), got: public.len() });
    }
    Ok(())
}

fn rotate(v: u8) -> u8 {
    ((v >> 1) | (v << 2)) & 7
}

pub fn prove<R: RngCore + CryptoRng + ?Sized>(
    rel: &Relation,
    witness: &[bool],
    public: &[bool],
    context: &[u8],
    params: ZkParams,
    rng: &mut R,
) -> Result<Vec<u8>, ZkError> {
    if params.reps == 0 || params.reps > u16::MAX as usize {
        return Err(ZkError::Params);
    }
    let w_len = rel.witness_len();
    if witness.len() != w_len {
        return Err(ZkError::InputLength { what: "witness", expected: w_len, got: witness.len() });
    }
    check_inputs(rel, public)?;
    let c = rel.circuit;
    let full: Vec<bool> = witness.iter().chain(public).copied().collect();
    let out = eval_plaintext(c, &full).map_err(|_| ZkError::Unsatisfied)?;
    if !out.iter().all(|&b| b) {
        return Err(ZkError::Unsatisfied);
    }

    let n_and = c.and_count();
    let tape_bits = w_len + n_and;
    let out_wires = c.output_wires();
    let n_out = out_wires.len();

    struct RepState {
        seeds: [[u8; SEED_LEN]; 3],
        x2: Vec<u8>,
        and_bits: [Vec<u8>; 3],
    }

    let mut states = Vec::with_capacity(params.reps);
    let mut transcripts = Vec::with_capacity(params.reps);
    let mut wires = vec![0u8; c.wire_count()];
    for rep in 0..params.reps {
        let rep16 = rep as u16;
        let mut seeds = [[0u8; SEED_LEN]; 3];
        for s in &mut seeds {
            rng.fill_bytes(s);
        }
        let tapes: [Vec<u8>; 3] = std::array::from_fn(|p| tape(&seeds[p], rep16, p as u8, tape_bits));

        let mut x2 = vec![0u8; w_len.div_ceil(8)];
        for (i, &w) in witness.iter().enumerate() {
            let s0 = get_bit(&tapes[0], i);
            let s1 = get_bit(&tapes[1], i);
            let s2 = w as u8 ^ s0 ^ s1;
            set_bit(&mut x2, i, s2);
            wires[i] = s0 | (s1 << 1) | (s2 << 2);
        }
        for (j, &p) in public.iter().enumerate() {
            wires[w_len + j] = p as u8;
        }

        let mut and_bits: [Vec<u8>; 3] = std::array::from_fn(|_| vec![0u8; n_and.div_ceil(8)]);
        let mut k = 0;
        for g in c.gates() {
            let (a, b) = (wires[g.a as usize], wires[g.b as usize]);
            wires[g.out as usize] = match g.op {
                GateOp::Xor => a ^ b,
                GateOp::Inv => a ^ 1,
                GateOp::And => {
                    let t = w_len + k;
                    let r = get_bit(&tapes[0], t) | (get_bit(&tapes[1], t) << 1) | (get_bit(&tapes[2], t) << 2);
                    let z = (a & b) ^ (rotate(a) & b) ^ (a & rotate(b)) ^ r ^ rotate(r);
                    for (p, bits) in and_bits.iter_mut().enumerate() {
                        set_bit(bits, k, z >> p);
                    }
                    k += 1;
                    z
                }
            };
        }
        let outs: [Vec<u8>; 3] =
            std::array::from_fn(|p| pack(out_wires.clone().map(|w| (wires[w] >> p) & 1), n_out));
        let commits: [[u8; 32]; 3] = std::array::from_fn(|p| {
            let x2 = (p == 2).then_some(&x2[..]);
            view_commitment(rep16, p as u8, &seeds[p], x2, &and_bits[p], &outs[p])
        });
        transcripts.push(RepTranscript { commits, outs });
        states.push(RepState { seeds, x2, and_bits });
    }

    let h = challenge_hash(rel, public, context, &transcripts);
    let es = challenges(&h, params.reps);
    let mut proof = Vec::with_capacity(rel.proof_len(params));
    proof.push(VERSION);
    proof.extend_from_slice(&(params.reps as u16).to_be_bytes());
    proof.extend_from_slice(&h);
    let rep_len = rel.rep_len() as u32;
    for ((st, tr), &e) in states.iter().zip(&transcripts).zip(&es) {
        let (e, e1, e2) = (e as usize, (e as usize + 1) % 3, (e as usize + 2) % 3);
        proof.extend_from_slice(&rep_len.to_be_bytes());
        proof.extend_from_slice(&tr.commits[e2]);
        proof.extend_from_slice(&st.seeds[e]);
        proof.extend_from_slice(&st.seeds[e1]);
        if e == 2 || e1 == 2 {
            proof.extend_from_slice(&st.x2);
        } else {
            proof.extend(std::iter::repeat_n(0u8, st.x2.len()));
        }
        proof.extend_from_slice(&st.and_bits[e1]);
    }
    debug_assert_eq!(proof.len(), rel.proof_len(params));
    Ok(proof)
}

/// Total: any malformed or non-verifying input yields `false`.
pub fn verify(rel: &Relation, public: &[bool], context: &[u8], proof: &[u8]) -> bool {
    verify_inner(rel, public, context, proof).unwrap_or(false)
}

fn verify_inner(rel: &Relation, public: &[bool], context: &[u8], proof: &[u8]) -> Option<bool> {
    check_inputs(rel, public).ok()?;
    if proof.len() < HEADER_LEN || proof[0] != VERSION {
        return Some(false);
    }
    let reps = u16::from_be_bytes([proof[1], proof[2]]) as usize;
    if reps == 0 {
        return Some(false);
    }
    let params = ZkParams { reps };
    if proof.len() != rel.proof_len(params) {
        return Some(false);
    }
    let h: [u8; 32] = proof[3..HEADER_LEN].try_into().ok()?;
    let es = challenges(&h, reps);

    let c = rel.circuit;
    let w_len = rel.witness_len();
    let n_and = c.and_count();
    let x2_len = w_len.div_ceil(8);
    let and_len = n_and.div_ceil(8);
    let out_wires = c.output_wires();
    let n_out = out_wires.len();
    let ones = pack(std::iter::repeat_n(1u8, n_out), n_out);
    let rep_len = rel.rep_len();

    let mut wires = vec![0u8; c.wire_count()];
    let mut transcripts = Vec::with_capacity(reps);
    let mut pos = HEADER_LEN;
    for (rep, &e) in es.iter().enumerate() {
        let rep16 = rep as u16;
        let len = u32::from_be_bytes(proof[pos..pos + 4].try_into().ok()?) as usize;
        if len != rep_len {
            return Some(false);
        }
        let block = &proof[pos + 4..pos + 4 + rep_len];
        pos += 4 + rep_len;
        let c_e2: [u8; 32] = block[..32].try_into().ok()?;
        let seed_e: [u8; SEED_LEN] = block[32..32 + SEED_LEN].try_into().ok()?;
        let seed_e1: [u8; SEED_LEN] = block[32 + SEED_LEN..32 + 2 * SEED_LEN].try_into().ok()?;
        let x2 = &block[32 + 2 * SEED_LEN..32 + 2 * SEED_LEN + x2_len];
        let and_e1 = &block[32 + 2 * SEED_LEN + x2_len..];

        let (e, e1, e2) = (e as usize, (e as usize + 1) % 3, (e as usize + 2) % 3);
        let uses_x2 = e == 2 || e1 == 2;
        if (!uses_x2 && x2.iter().any(|&b| b != 0)) || !padding_is_clean(x2, w_len) || !padding_is_clean(and_e1, n_and) {
            return Some(false);
        }
        let tape_bits = w_len + n_and;
        let tape_e = tape(&seed_e, rep16, e as u8, tape_bits);
        let tape_e1 = tape(&seed_e1, rep16, e1 as u8, tape_bits);
        let input_share = |party: usize, t: &[u8], i: usize| if party == 2 { get_bit(x2, i) } else { get_bit(t, i) };

        // bit 0 holds party e, bit 1 holds party e+1
        for (i, w) in wires[..w_len].iter_mut().enumerate() {
            *w = input_share(e, &tape_e, i) | (input_share(e1, &tape_e1, i) << 1);
        }
        let zero_mask: u8 = if e == 0 { 1 } else if e1 == 0 { 2 } else { 0 };
        for (j, &p) in public.iter().enumerate() {
            wires[w_len + j] = if p { zero_mask } else { 0 };
        }
        let mut and_e = vec![0u8; and_len];
        let mut k = 0;
        for g in c.gates() {
            let (a, b) = (wires[g.a as usize], wires[g.b as usize]);
            wires[g.out as usize] = match g.op {
                GateOp::Xor => a ^ b,
                GateOp::Inv => a ^ zero_mask,
                GateOp::And => {
                    let t = w_len + k;
                    let (xa, xb) = (a & 1, a >> 1);
                    let (ya, yb) = (b & 1, b >> 1);
                    let z = (xa & ya) ^ (xb & ya) ^ (xa & yb) ^ get_bit(&tape_e, t) ^ get_bit(&tape_e1, t);
                    set_bit(&mut and_e, k, z);
                    let z1 = get_bit(and_e1, k);
                    k += 1;
                    z | (z1 << 1)
                }
            };
        }
        let out_e = pack(out_wires.clone().map(|w| wires[w] & 1), n_out);
        let out_e1 = pack(out_wires.clone().map(|w| wires[w] >> 1), n_out);
        let out_e2: Vec<u8> = ones.iter().zip(&out_e).zip(&out_e1).map(|((o, a), b)| o ^ a ^ b).collect();

        let x2_of = |p: usize| (p == 2).then_some(x2);
        let mut commits = [[0u8; 32]; 3];
        commits[e] = view_commitment(rep16, e as u8, &seed_e, x2_of(e), &and_e, &out_e);
        commits[e1] = view_commitment(rep16, e1 as u8, &seed_e1, x2_of(e1), and_e1, &out_e1);
        commits[e2] = c_e2;
        let mut outs: [Vec<u8>; 3] = Default::default();
        outs[e] = out_e;
        outs[e1] = out_e1;
        outs[e2] = out_e2;
        transcripts.push(RepTranscript { commits, outs });
    }
    Some(challenge_hash(rel, public, context, &transcripts) == h)
}
