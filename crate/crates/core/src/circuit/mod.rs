//! Boolean circuits in Bristol Fashion form.
//!
//! A circuit is a topologically ordered list of XOR/AND/INV gates over dense
//! wire ids. Input wires come first, grouped into input blocks; the last wires
//! are the outputs, grouped into output blocks. Bits of byte strings are laid
//! out most-significant-bit first, bytes in order.

mod bristol;
pub mod builder;
pub mod chacha;
pub mod fido2;
pub mod sha256;
pub mod totp;

use std::sync::OnceLock;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bristol::{parse_bristol, to_bristol};
pub use builder::{Bit, Builder, Word};
pub use fido2::build_fido2_circuit;
pub use totp::build_totp_circuit;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid circuit: gate {gate}: {reason}")]
    Invalid { gate: usize, reason: String },
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("invalid circuit parameters: {0}")]
    Params(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateOp {
    Xor,
    And,
    Inv,
}

/// One gate. For `Inv`, `b` equals `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub op: GateOp,
    pub a: u32,
    pub b: u32,
    pub out: u32,
}

#[derive(Debug)]
pub struct BooleanCircuit {
    wire_count: usize,
    gates: Vec<Gate>,
    input_blocks: Vec<usize>,
    output_blocks: Vec<usize>,
    and_count: usize,
    digest: OnceLock<[u8; 32]>,
}

impl Clone for BooleanCircuit {
    fn clone(&self) -> Self {
        BooleanCircuit {
            wire_count: self.wire_count,
            gates: self.gates.clone(),
            input_blocks: self.input_blocks.clone(),
            output_blocks: self.output_blocks.clone(),
            and_count: self.and_count,
            digest: OnceLock::new(),
        }
    }
}

impl PartialEq for BooleanCircuit {
    fn eq(&self, other: &Self) -> bool {
        self.wire_count == other.wire_count
            && self.gates == other.gates
            && self.input_blocks == other.input_blocks
            && self.output_blocks == other.output_blocks
    }
}

impl Eq for BooleanCircuit {}

impl BooleanCircuit {
    /// Validates wire numbering: inputs occupy `[0, n_in)`, every gate reads
    /// already-defined wires, no wire is written twice, and the last
    /// `n_out` wires are defined.
    pub fn new(
        wire_count: usize,
        gates: Vec<Gate>,
        input_blocks: Vec<usize>,
        output_blocks: Vec<usize>,
    ) -> Result<BooleanCircuit, CircuitError> {
        let n_in: usize = input_blocks.iter().sum();
        let n_out: usize = output_blocks.iter().sum();
        let invalid = |gate: usize, reason: String| CircuitError::Invalid { gate, reason };
        if n_in > wire_count || n_out > wire_count {
            return Err(invalid(0, format!("{n_in} inputs / {n_out} outputs exceed {wire_count} wires")));
        }
        if u32::try_from(wire_count).is_err() {
            return Err(invalid(0, "too many wires".into()));
        }
        let mut defined = vec![false; wire_count];
        defined[..n_in].iter_mut().for_each(|d| *d = true);
        let mut and_count = 0;
        for (i, g) in gates.iter().enumerate() {
            for w in [g.a, g.b] {
                let w = w as usize;
                if w >= wire_count {
                    return Err(invalid(i, format!("input wire {w} out of range")));
                }
                if !defined[w] {
                    return Err(invalid(i, format!("input wire {w} read before it is written")));
                }
            }
            if g.op == GateOp::Inv && g.a != g.b {
                return Err(invalid(i, "INV gate with two distinct inputs".into()));
            }
            let o = g.out as usize;
            if o >= wire_count {
                return Err(invalid(i, format!("output wire {o} out of range")));
            }
            if defined[o] {
                return Err(invalid(i, format!("wire {o} written twice")));
            }
            defined[o] = true;
            if g.op == GateOp::And {
                and_count += 1;
            }
        }
        if let Some(w) = (wire_count - n_out..wire_count).find(|&w| !defined[w]) {
            return Err(invalid(gates.len(), format!("output wire {w} is never written")));
        }
        Ok(BooleanCircuit {
            wire_count,
            gates,
            input_blocks,
            output_blocks,
            and_count,
            digest: OnceLock::new(),
        })
    }

    pub fn wire_count(&self) -> usize {
        self.wire_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_blocks(&self) -> &[usize] {
        &self.input_blocks
    }

    pub fn output_blocks(&self) -> &[usize] {
        &self.output_blocks
    }

    pub fn num_inputs(&self) -> usize {
        self.input_blocks.iter().sum()
    }

    pub fn num_outputs(&self) -> usize {
        self.output_blocks.iter().sum()
    }

    pub fn and_count(&self) -> usize {
        self.and_count
    }

    /// First wire id of input block `i`.
    pub fn input_offset(&self, block: usize) -> usize {
        self.input_blocks[..block].iter().sum()
    }

    /// Wire ids of output block `i`.
    pub fn output_range(&self, block: usize) -> std::ops::Range<usize> {
        let start = self.wire_count - self.num_outputs() + self.output_blocks[..block].iter().sum::<usize>();
        start..start + self.output_blocks[block]
    }

    /// Position of output block `i` within the full output vector.
    pub fn output_block_span(&self, block: usize) -> std::ops::Range<usize> {
        let start: usize = self.output_blocks[..block].iter().sum();
        start..start + self.output_blocks[block]
    }

    pub fn output_wires(&self) -> std::ops::Range<usize> {
        self.wire_count - self.num_outputs()..self.wire_count
    }

    /// Structural fingerprint used to bind proofs and sessions to a circuit.
    pub fn digest(&self) -> [u8; 32] {
        *self.digest.get_or_init(|| {
            let mut h = Sha256::new();
            h.update(b"larch/circuit/v1");
            h.update((self.wire_count as u64).to_be_bytes());
            for blocks in [&self.input_blocks, &self.output_blocks] {
                h.update((blocks.len() as u64).to_be_bytes());
                for b in blocks.iter() {
                    h.update((*b as u64).to_be_bytes());
                }
            }
            let mut buf = Vec::with_capacity(self.gates.len() * 13);
            for g in &self.gates {
                buf.push(g.op as u8);
                buf.extend_from_slice(&g.a.to_le_bytes());
                buf.extend_from_slice(&g.b.to_le_bytes());
                buf.extend_from_slice(&g.out.to_le_bytes());
            }
            h.update(&buf);
            h.finalize().into()
        })
    }
}

/// Reference gate-by-gate evaluator.
pub fn eval_plaintext(c: &BooleanCircuit, inputs: &[bool]) -> Result<Vec<bool>, CircuitError> {
    let n_in = c.num_inputs();
    if inputs.len() != n_in {
        return Err(CircuitError::InputLength { expected: n_in, got: inputs.len() });
    }
    let mut wires = vec![false; c.wire_count];
    wires[..n_in].copy_from_slice(inputs);
    for g in &c.gates {
        let (a, b) = (wires[g.a as usize], wires[g.b as usize]);
        wires[g.out as usize] = match g.op {
            GateOp::Xor => a ^ b,
            GateOp::And => a & b,
            GateOp::Inv => !a,
        };
    }
    Ok(wires[c.output_wires()].to_vec())
}

/// Parameters fixing message layouts inside the statement circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitParams {
    pub rp_id_len: usize,
    pub chal_len: usize,
    pub key_len: usize,
    pub commit_nonce_len: usize,
    pub stream_nonce_len: usize,
    pub totp_id_len: usize,
    /// Registered relying-party slots in the TOTP circuit.
    pub n: usize,
}

impl CircuitParams {
    pub const FIDO2: CircuitParams = CircuitParams {
        rp_id_len: 32,
        chal_len: 32,
        key_len: 32,
        commit_nonce_len: 32,
        stream_nonce_len: 12,
        totp_id_len: 16,
        n: 1,
    };

    pub fn totp(n: usize) -> CircuitParams {
        CircuitParams { n, ..CircuitParams::FIDO2 }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.n == 0 || !self.n.is_power_of_two() {
            return Err(CircuitError::Params(format!("n = {} is not a power of two", self.n)));
        }
        let fixed = [
            (self.rp_id_len, 32, "rp_id_len"),
            (self.chal_len, 32, "chal_len"),
            (self.key_len, 32, "key_len"),
            (self.commit_nonce_len, 32, "commit_nonce_len"),
            (self.stream_nonce_len, 12, "stream_nonce_len"),
            (self.totp_id_len, 16, "totp_id_len"),
        ];
        for (got, want, name) in fixed {
            if got != want {
                return Err(CircuitError::Params(format!("{name} must be {want}, got {got}")));
            }
        }
        Ok(())
    }
}

/// Smallest power of two that is at least `n` (and at least 1).
pub fn padded_slots(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect()
}

/// Packs bits MSB-first; a trailing partial byte is zero-filled.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i))))
        .collect()
}
