//! Programmatic circuit construction with constant folding.

use super::{BooleanCircuit, Gate, GateOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    Const(bool),
    Wire(u32),
}

impl Bit {
    pub const ZERO: Bit = Bit::Const(false);
    pub const ONE: Bit = Bit::Const(true);
}

/// 32-bit word, least significant bit first.
pub type Word = [Bit; 32];

#[derive(Debug, Default)]
pub struct Builder {
    next: u32,
    n_inputs: u32,
    gates: Vec<Gate>,
    input_blocks: Vec<usize>,
}

impl Builder {
    pub fn new() -> Builder {
        Builder::default()
    }

    /// Allocates an input block. All inputs must be declared before any gate.
    pub fn input_block(&mut self, len: usize) -> Vec<Bit> {
        assert!(self.gates.is_empty(), "inputs must be declared before gates");
        let start = self.next;
        self.next += len as u32;
        self.n_inputs = self.next;
        self.input_blocks.push(len);
        (start..self.next).map(Bit::Wire).collect()
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.op == GateOp::And).count()
    }

    fn push(&mut self, op: GateOp, a: u32, b: u32) -> Bit {
        let out = self.next;
        self.next += 1;
        self.gates.push(Gate { op, a, b, out });
        Bit::Wire(out)
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x ^ y),
            (Bit::Const(false), w) | (w, Bit::Const(false)) => w,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => self.not(w),
            (Bit::Wire(x), Bit::Wire(y)) if x == y => Bit::ZERO,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(GateOp::Xor, x, y),
        }
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x & y),
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::ZERO,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => w,
            (Bit::Wire(x), Bit::Wire(y)) if x == y => a,
            (Bit::Wire(x), Bit::Wire(y)) => self.push(GateOp::And, x, y),
        }
    }

    pub fn not(&mut self, a: Bit) -> Bit {
        match a {
            Bit::Const(x) => Bit::Const(!x),
            Bit::Wire(x) => self.push(GateOp::Inv, x, x),
        }
    }

    pub fn or(&mut self, a: Bit, b: Bit) -> Bit {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `if s { t } else { f }` with one AND.
    pub fn mux(&mut self, s: Bit, t: Bit, f: Bit) -> Bit {
        let d = self.xor(t, f);
        let m = self.and(s, d);
        self.xor(f, m)
    }

    pub fn xor_bits(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect()
    }

    pub fn and_all(&mut self, bits: &[Bit]) -> Bit {
        // Balanced tree keeps depth logarithmic; the AND count is the same.
        match bits.len() {
            0 => Bit::ONE,
            1 => bits[0],
            n => {
                let (l, r) = bits.split_at(n / 2);
                let l = self.and_all(l);
                let r = self.and_all(r);
                self.and(l, r)
            }
        }
    }

    pub fn or_all(&mut self, bits: &[Bit]) -> Bit {
        bits.iter().fold(Bit::ZERO, |acc, &b| self.or(acc, b))
    }

    /// 1 iff the two bit strings are equal.
    pub fn eq_bits(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        assert_eq!(a.len(), b.len());
        let same: Vec<Bit> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = self.xor(x, y);
                self.not(d)
            })
            .collect();
        self.and_all(&same)
    }

    pub fn xor_w(&mut self, a: &Word, b: &Word) -> Word {
        std::array::from_fn(|i| self.xor(a[i], b[i]))
    }

    pub fn and_w(&mut self, a: &Word, b: &Word) -> Word {
        std::array::from_fn(|i| self.and(a[i], b[i]))
    }

    /// Ripple-carry addition mod 2^32, one AND per carry.
    pub fn add_w(&mut self, a: &Word, b: &Word) -> Word {
        let mut out = [Bit::ZERO; 32];
        let mut carry = Bit::ZERO;
        for i in 0..32 {
            let ac = self.xor(a[i], carry);
            let bc = self.xor(b[i], carry);
            out[i] = self.xor(ac, b[i]);
            if i < 31 {
                let t = self.and(ac, bc);
                carry = self.xor(carry, t);
            }
        }
        out
    }

    /// Copies a sub-circuit in, returning its output bits.
    pub fn inline(&mut self, c: &BooleanCircuit, inputs: &[Bit]) -> Vec<Bit> {
        assert_eq!(inputs.len(), c.num_inputs(), "inline input arity");
        let mut map = vec![Bit::ZERO; c.wire_count()];
        map[..inputs.len()].copy_from_slice(inputs);
        for g in c.gates() {
            let (a, b) = (map[g.a as usize], map[g.b as usize]);
            map[g.out as usize] = match g.op {
                GateOp::Xor => self.xor(a, b),
                GateOp::And => self.and(a, b),
                GateOp::Inv => self.not(a),
            };
        }
        map[c.output_wires()].to_vec()
    }

    /// Emits the circuit. Dead gates are dropped and wires renumbered so
    /// that outputs are the final wires in block order. Outputs that are
    /// constants, inputs or repeats get a copy gate.
    pub fn finish(mut self, outputs: &[Vec<Bit>]) -> BooleanCircuit {
        let n_in = self.n_inputs;
        let flat: Vec<Bit> = outputs.iter().flatten().copied().collect();
        let mut zero: Option<u32> = None;
        let mut claimed = std::collections::HashSet::new();
        let mut out_wires = Vec::with_capacity(flat.len());
        for &bit in &flat {
            let w = match bit {
                Bit::Wire(w) if w >= n_in && claimed.insert(w) => w,
                other => {
                    assert!(n_in > 0, "constant outputs need at least one input wire");
                    let z = *zero.get_or_insert_with(|| match self.push(GateOp::Xor, 0, 0) {
                        Bit::Wire(z) => z,
                        Bit::Const(_) => unreachable!(),
                    });
                    let copied = match other {
                        Bit::Const(false) => self.push(GateOp::Xor, z, z),
                        Bit::Const(true) => self.push(GateOp::Inv, z, z),
                        Bit::Wire(w) => self.push(GateOp::Xor, w, z),
                    };
                    match copied {
                        Bit::Wire(w) => {
                            claimed.insert(w);
                            w
                        }
                        Bit::Const(_) => unreachable!(),
                    }
                }
            };
            out_wires.push(w);
        }

        let total = self.next as usize;
        let mut live = vec![false; total];
        for &w in &out_wires {
            live[w as usize] = true;
        }
        let mut kept = Vec::new();
        for g in self.gates.iter().rev() {
            if live[g.out as usize] {
                live[g.a as usize] = true;
                live[g.b as usize] = true;
                kept.push(*g);
            }
        }
        kept.reverse();

        const UNMAPPED: u32 = u32::MAX;
        let mut map = vec![UNMAPPED; total];
        for (i, m) in map.iter_mut().enumerate().take(n_in as usize) {
            *m = i as u32;
        }
        let n_wires = n_in as usize + kept.len();
        let first_out = (n_wires - out_wires.len()) as u32;
        for (i, &w) in out_wires.iter().enumerate() {
            map[w as usize] = first_out + i as u32;
        }
        let mut next = n_in;
        for g in &kept {
            if map[g.out as usize] == UNMAPPED {
                map[g.out as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, first_out);
        let gates = kept
            .iter()
            .map(|g| Gate { op: g.op, a: map[g.a as usize], b: map[g.b as usize], out: map[g.out as usize] })
            .collect();
        let output_blocks = outputs.iter().map(Vec::len).collect();
        BooleanCircuit::new(n_wires, gates, self.input_blocks, output_blocks)
            .expect("builder emits well-formed circuits")
    }
}

pub fn const_word(v: u32) -> Word {
    std::array::from_fn(|i| Bit::Const((v >> i) & 1 == 1))
}

pub fn rotr(x: &Word, n: usize) -> Word {
    std::array::from_fn(|i| x[(i + n) % 32])
}

pub fn rotl(x: &Word, n: usize) -> Word {
    rotr(x, (32 - n % 32) % 32)
}

pub fn shr(x: &Word, n: usize) -> Word {
    std::array::from_fn(|i| if i + n < 32 { x[i + n] } else { Bit::ZERO })
}

/// Word from 4 bytes of MSB-first bits, big-endian byte order.
pub fn word_be(bits: &[Bit]) -> Word {
    assert_eq!(bits.len(), 32);
    std::array::from_fn(|i| bits[31 - i])
}

pub fn word_to_bits_be(w: &Word) -> Vec<Bit> {
    (0..32).map(|i| w[31 - i]).collect()
}

/// Word from 4 bytes of MSB-first bits, little-endian byte order.
pub fn word_le(bits: &[Bit]) -> Word {
    assert_eq!(bits.len(), 32);
    std::array::from_fn(|i| bits[(i / 8) * 8 + 7 - i % 8])
}

pub fn word_to_bits_le(w: &Word) -> Vec<Bit> {
    (0..32).map(|j| w[(j / 8) * 8 + 7 - j % 8]).collect()
}

pub fn const_bits(bytes: &[u8]) -> Vec<Bit> {
    super::bytes_to_bits(bytes).into_iter().map(Bit::Const).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{bits_to_bytes, bytes_to_bits, eval_plaintext};
    use proptest::prelude::*;

    fn word_circuit(f: impl Fn(&mut Builder, &Word, &Word) -> Word) -> BooleanCircuit {
        let mut b = Builder::new();
        let x = b.input_block(32);
        let y = b.input_block(32);
        let (x, y) = (word_be(&x), word_be(&y));
        let z = f(&mut b, &x, &y);
        let out = word_to_bits_be(&z);
        b.finish(&[out])
    }

    fn run_word(c: &BooleanCircuit, x: u32, y: u32) -> u32 {
        let mut inp = bytes_to_bits(&x.to_be_bytes());
        inp.extend(bytes_to_bits(&y.to_be_bytes()));
        let out = bits_to_bytes(&eval_plaintext(c, &inp).unwrap());
        u32::from_be_bytes(out.try_into().unwrap())
    }

    #[test]
    fn adder_uses_31_and_gates() {
        let c = word_circuit(|b, x, y| b.add_w(x, y));
        assert_eq!(c.and_count(), 31);
    }

    #[test]
    fn constant_outputs_and_passthrough() {
        let mut b = Builder::new();
        let x = b.input_block(2);
        let c = b.finish(&[vec![Bit::ONE, x[1], Bit::ZERO, x[1]]]);
        for v in 0..4u8 {
            let inp = [v & 1 == 1, v & 2 == 2];
            assert_eq!(eval_plaintext(&c, &inp).unwrap(), vec![true, inp[1], false, inp[1]]);
        }
    }

    #[test]
    fn dead_code_is_removed() {
        let mut b = Builder::new();
        let x = b.input_block(2);
        let _unused = b.and(x[0], x[1]);
        let used = b.xor(x[0], x[1]);
        let c = b.finish(&[vec![used]]);
        assert_eq!(c.gates().len(), 1);
        assert_eq!(c.and_count(), 0);
    }

    #[test]
    fn le_word_round_trip() {
        let mut b = Builder::new();
        let x = b.input_block(32);
        let w = word_le(&x);
        let one = const_word(1);
        let s = b.add_w(&w, &one);
        let c = b.finish(&[word_to_bits_le(&s)]);
        let inp = bytes_to_bits(&0x01020304u32.to_le_bytes());
        let out = bits_to_bytes(&eval_plaintext(&c, &inp).unwrap());
        assert_eq!(u32::from_le_bytes(out.try_into().unwrap()), 0x01020305);
    }

    proptest! {
        #[test]
        fn word_ops_match_native(x: u32, y: u32, n in 0usize..32) {
            let add = word_circuit(|b, x, y| b.add_w(x, y));
            prop_assert_eq!(run_word(&add, x, y), x.wrapping_add(y));
            let and = word_circuit(|b, x, y| b.and_w(x, y));
            prop_assert_eq!(run_word(&and, x, y), x & y);
            let rot = word_circuit(move |b, x, y| { let r = rotr(x, n); b.xor_w(&r, &shr(y, n)) });
            prop_assert_eq!(run_word(&rot, x, y), x.rotate_right(n as u32) ^ (y >> n));
            let rl = word_circuit(move |_, x, _| rotl(x, n));
            prop_assert_eq!(run_word(&rl, x, y), x.rotate_left(n as u32));
        }

        #[test]
        fn mux_and_eq(a: bool, t: bool, f: bool, x: u8, y: u8) {
            let mut b = Builder::new();
            let i = b.input_block(3);
            let m = b.mux(i[0], i[1], i[2]);
            let c = b.finish(&[vec![m]]);
            prop_assert_eq!(eval_plaintext(&c, &[a, t, f]).unwrap(), vec![if a { t } else { f }]);

            let mut b = Builder::new();
            let p = b.input_block(8);
            let q = b.input_block(8);
            let e = b.eq_bits(&p, &q);
            let c = b.finish(&[vec![e]]);
            let mut inp = bytes_to_bits(&[x]);
            inp.extend(bytes_to_bits(&[y]));
            prop_assert_eq!(eval_plaintext(&c, &inp).unwrap(), vec![x == y]);
        }
    }
}
