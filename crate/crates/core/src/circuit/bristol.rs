//! Bristol Fashion text format.
//!
//! ```text
//! ngates nwires
//! niv  n_1 .. n_niv
//! nov  m_1 .. m_nov
//!
//! 2 1 a b out XOR|AND
//! 1 1 a out INV
//! ```

use std::fmt::Write as _;

use super::{BooleanCircuit, CircuitError, Gate, GateOp};

pub fn parse_bristol(text: &str) -> Result<BooleanCircuit, CircuitError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let err = |line: usize, reason: String| CircuitError::Parse { line, reason };
    let numbers = |line: usize, s: &str| -> Result<Vec<usize>, CircuitError> {
        s.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| err(line, format!("expected an integer, got {t:?}"))))
            .collect()
    };

    let (l1, header) = lines.next().ok_or_else(|| err(1, "empty circuit".into()))?;
    let header = numbers(l1, header)?;
    let [ngates, nwires] = header[..] else {
        return Err(err(l1, "header must be \"ngates nwires\"".into()));
    };

    let mut block_line = |what: &str| -> Result<(usize, Vec<usize>), CircuitError> {
        let (ln, text) = lines.next().ok_or_else(|| err(l1, format!("missing {what} line")))?;
        let nums = numbers(ln, text)?;
        match nums.split_first() {
            Some((&count, sizes)) if count == sizes.len() => Ok((ln, sizes.to_vec())),
            _ => Err(err(ln, format!("malformed {what} line"))),
        }
    };
    let (_, input_blocks) = block_line("input-block")?;
    let (_, output_blocks) = block_line("output-block")?;

    let mut gates = Vec::with_capacity(ngates);
    let mut gate_lines = Vec::with_capacity(ngates);
    for (ln, text) in lines {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let (op_tok, nums) = tokens.split_last().ok_or_else(|| err(ln, "empty gate line".into()))?;
        let nums = numbers(ln, &nums.join(" "))?;
        let op = match *op_tok {
            "XOR" => GateOp::Xor,
            "AND" => GateOp::And,
            "INV" => GateOp::Inv,
            other => return Err(err(ln, format!("unknown gate op {other:?}"))),
        };
        let (nin, nout) = match nums[..] {
            [nin, nout, ..] => (nin, nout),
            _ => return Err(err(ln, "gate line must start with \"nin nout\"".into())),
        };
        let want_in = if op == GateOp::Inv { 1 } else { 2 };
        if nin != want_in || nout != 1 {
            return Err(err(ln, format!("{op_tok} takes {want_in} inputs and 1 output, got {nin} and {nout}")));
        }
        if nums.len() != 2 + nin + nout {
            return Err(err(ln, format!("expected {} wire ids, got {}", nin + nout, nums.len() - 2)));
        }
        let w = |i: usize| {
            u32::try_from(nums[i]).map_err(|_| err(ln, format!("wire id {} too large", nums[i])))
        };
        let gate = if op == GateOp::Inv {
            Gate { op, a: w(2)?, b: w(2)?, out: w(3)? }
        } else {
            Gate { op, a: w(2)?, b: w(3)?, out: w(4)? }
        };
        gates.push(gate);
        gate_lines.push(ln);
    }
    if gates.len() != ngates {
        return Err(err(l1, format!("header declares {ngates} gates, found {}", gates.len())));
    }
    BooleanCircuit::new(nwires, gates, input_blocks, output_blocks).map_err(|e| match e {
        CircuitError::Invalid { gate, reason } => {
            let line = gate_lines.get(gate).copied().unwrap_or(l1);
            CircuitError::Parse { line, reason }
        }
        other => other,
    })
}

pub fn to_bristol(c: &BooleanCircuit) -> String {
    let mut out = String::with_capacity(c.gates().len() * 16 + 64);
    let blocks = |v: &[usize]| {
        std::iter::once(v.len()).chain(v.iter().copied()).map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(out, "{} {}", c.gates().len(), c.wire_count());
    let _ = writeln!(out, "{}", blocks(c.input_blocks()));
    let _ = writeln!(out, "{}", blocks(c.output_blocks()));
    out.push('\n');
    for g in c.gates() {
        let _ = match g.op {
            GateOp::Xor => writeln!(out, "2 1 {} {} {} XOR", g.a, g.b, g.out),
            GateOp::And => writeln!(out, "2 1 {} {} {} AND", g.a, g.b, g.out),
            GateOp::Inv => writeln!(out, "1 1 {} {} INV", g.a, g.out),
        };
    }
    out
}
