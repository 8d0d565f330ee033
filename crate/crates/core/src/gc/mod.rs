//! Semi-honest Yao garbled circuits: free-XOR, point-and-permute and
//! three-row garbled AND tables. Row keys are derived with SHA-256.

pub mod ot;
pub mod session;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{BooleanCircuit, GateOp};

pub const LABEL_LEN: usize = 16;
pub type Label = [u8; LABEL_LEN];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GcError {
    #[error("{what}: expected {expected}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
    #[error("output label {0} decodes to neither value")]
    BadLabel(usize),
    #[error("malformed group element in oblivious transfer")]
    BadPoint,
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error("unexpected message: {0}")]
    Protocol(String),
}

fn xor(a: &Label, b: &Label) -> Label {
    std::array::from_fn(|i| a[i] ^ b[i])
}

fn color(l: &Label) -> u8 {
    l[0] & 1
}

fn row_key(a: &Label, b: &Label, gate: u64) -> Label {
    let mut h = Sha256::new();
    h.update(a);
    h.update(b);
    h.update(gate.to_be_bytes());
    let d = h.finalize();
    d[..LABEL_LEN].try_into().expect("16-byte prefix")
}

fn decode_hash(wire: usize, l: &Label) -> Label {
    let mut h = Sha256::new();
    h.update(b"larch/gc/decode");
    h.update((wire as u64).to_be_bytes());
    h.update(l);
    let d = h.finalize();
    d[..LABEL_LEN].try_into().expect("16-byte prefix")
}

/// Garbled AND tables in gate order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledTables(pub Vec<[Label; 3]>);

impl GarbledTables {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|t| t.iter().flatten().copied()).collect()
    }

    pub fn from_bytes(c: &BooleanCircuit, bytes: &[u8]) -> Result<GarbledTables, GcError> {
        let want = c.and_count() * 3 * LABEL_LEN;
        if bytes.len() != want {
            return Err(GcError::Length { what: "garbled tables", expected: want, got: bytes.len() });
        }
        Ok(GarbledTables(
            bytes
                .chunks_exact(3 * LABEL_LEN)
                .map(|row| std::array::from_fn(|i| row[i * LABEL_LEN..(i + 1) * LABEL_LEN].try_into().unwrap()))
                .collect(),
        ))
    }
}

/// Everything the garbler keeps: the global offset and zero labels.
pub struct GarblerSecrets {
    delta: Label,
    input_zero: Vec<Label>,
    output_zero: Vec<Label>,
    output_first_wire: usize,
}

impl GarblerSecrets {
    pub fn input_label(&self, wire: usize, bit: bool) -> Label {
        if bit {
            xor(&self.input_zero[wire], &self.delta)
        } else {
            self.input_zero[wire]
        }
    }

    pub fn input_pair(&self, wire: usize) -> (Label, Label) {
        (self.input_label(wire, false), self.input_label(wire, true))
    }

    /// Decode map for output positions `range` (indices into the output vector).
    pub fn decode_map(&self, range: std::ops::Range<usize>) -> Vec<(Label, Label)> {
        range
            .map(|i| {
                let w = self.output_first_wire + i;
                let l0 = self.output_zero[i];
                (decode_hash(w, &l0), decode_hash(w, &xor(&l0, &self.delta)))
            })
            .collect()
    }

    /// Decodes labels returned by the evaluator for output positions
    /// starting at `start`. A label matching neither value is an error.
    pub fn decode_labels(&self, start: usize, labels: &[Label]) -> Result<Vec<bool>, GcError> {
        labels
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let l0 = &self.output_zero[start + j];
                if l == l0 {
                    Ok(false)
                } else if *l == xor(l0, &self.delta) {
                    Ok(true)
                } else {
                    Err(GcError::BadLabel(start + j))
                }
            })
            .collect()
    }
}

/// Garbles `c` deterministically from `seed`.
pub fn garble(c: &BooleanCircuit, seed: &[u8; 32]) -> (GarbledTables, GarblerSecrets) {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    let mut delta: Label = rng.gen();
    delta[0] |= 1;
    let n_in = c.num_inputs();
    let mut zero = vec![[0u8; LABEL_LEN]; c.wire_count()];
    for z in zero.iter_mut().take(n_in) {
        *z = rng.gen();
    }
    let mut tables = Vec::with_capacity(c.and_count());
    for (gid, g) in c.gates().iter().enumerate() {
        let (a0, b0) = (zero[g.a as usize], zero[g.b as usize]);
        zero[g.out as usize] = match g.op {
            GateOp::Xor => xor(&a0, &b0),
            GateOp::Inv => xor(&a0, &delta),
            GateOp::And => {
                let (pa, pb) = (color(&a0), color(&b0));
                let a1 = xor(&a0, &delta);
                let b1 = xor(&b0, &delta);
                // Label on a wire with colour c carries value c ^ p.
                let by_color = |l0: &Label, l1: &Label, p: u8, c: u8| if c == p { *l0 } else { *l1 };
                let gid = gid as u64;
                let k00 = row_key(&by_color(&a0, &a1, pa, 0), &by_color(&b0, &b1, pb, 0), gid);
                let v00 = pa & pb;
                let out0 = if v00 == 1 { xor(&k00, &delta) } else { k00 };
                let mut t = [[0u8; LABEL_LEN]; 3];
                for (row, (ca, cb)) in [(0u8, 1u8), (1, 0), (1, 1)].into_iter().enumerate() {
                    let k = row_key(&by_color(&a0, &a1, pa, ca), &by_color(&b0, &b1, pb, cb), gid);
                    let v = (ca ^ pa) & (cb ^ pb);
                    let out = if v == 1 { xor(&out0, &delta) } else { out0 };
                    t[row] = xor(&k, &out);
                }
                tables.push(t);
                out0
            }
        };
    }
    let outs = c.output_wires();
    let output_first_wire = outs.start;
    let secrets = GarblerSecrets {
        delta,
        input_zero: zero[..n_in].to_vec(),
        output_zero: zero[outs].to_vec(),
        output_first_wire,
    };
    (GarbledTables(tables), secrets)
}

/// Evaluates with one label per input wire; returns one label per output.
pub fn evaluate(c: &BooleanCircuit, tables: &GarbledTables, inputs: &[Label]) -> Result<Vec<Label>, GcError> {
    if inputs.len() != c.num_inputs() {
        return Err(GcError::Length { what: "input labels", expected: c.num_inputs(), got: inputs.len() });
    }
    if tables.0.len() != c.and_count() {
        return Err(GcError::Length { what: "garbled tables", expected: c.and_count(), got: tables.0.len() });
    }
    let mut w = vec![[0u8; LABEL_LEN]; c.wire_count()];
    w[..inputs.len()].copy_from_slice(inputs);
    let mut k = 0;
    for (gid, g) in c.gates().iter().enumerate() {
        let (a, b) = (w[g.a as usize], w[g.b as usize]);
        w[g.out as usize] = match g.op {
            GateOp::Xor => xor(&a, &b),
            GateOp::Inv => a,
            GateOp::And => {
                let key = row_key(&a, &b, gid as u64);
                let row = (color(&a) << 1) | color(&b);
                let t = &tables.0[k];
                k += 1;
                if row == 0 {
                    key
                } else {
                    xor(&key, &t[row as usize - 1])
                }
            }
        };
    }
    Ok(w[c.output_wires()].to_vec())
}

/// Decodes output labels at positions starting at `start` with a map from
/// [`GarblerSecrets::decode_map`].
pub fn decode(c: &BooleanCircuit, start: usize, map: &[(Label, Label)], labels: &[Label]) -> Result<Vec<bool>, GcError> {
    if map.len() != labels.len() {
        return Err(GcError::Length { what: "decode map", expected: labels.len(), got: map.len() });
    }
    let first = c.output_wires().start + start;
    map.iter()
        .zip(labels)
        .enumerate()
        .map(|(j, ((h0, h1), l))| {
            let h = decode_hash(first + j, l);
            if h == *h0 {
                Ok(false)
            } else if h == *h1 {
                Ok(true)
            } else {
                Err(GcError::BadLabel(start + j))
            }
        })
        .collect()
}
