//! Framed two-party garbled-circuit session.
//!
//! The garbler holds the trailing input blocks, the evaluator the leading
//! ones. Each output block is owned by one side: garbler-owned outputs are
//! returned as labels and decoded by the garbler; evaluator-owned outputs are
//! decoded with a map the garbler sends last, so the garbler can act on its
//! own outputs before the evaluator learns anything.
//!
//! Frame: `kind u8 ‖ session id [16] ‖ seq u32 ‖ len u32 ‖ payload`, integers
//! big-endian. `seq` counts frames in both directions from 0.

use std::sync::Arc;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::ot::{OtReceiver, OtSender};
use super::{decode, evaluate, garble, GarbledTables, GarblerSecrets, GcError, Label, LABEL_LEN};
use crate::circuit::BooleanCircuit;

pub const SESSION_ID_LEN: usize = 16;
const FRAME_HEADER: usize = 1 + SESSION_ID_LEN + 4 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    SessionOpen = 1,
    GarbleBlob = 2,
    OtRound1 = 3,
    OtRound2 = 4,
    OtRound3 = 5,
    EvalLabelsBack = 6,
    IntegritySig = 7,
    LogOutputBits = 8,
    Reject = 9,
}

impl FrameKind {
    fn from_u8(v: u8) -> Option<FrameKind> {
        use FrameKind::*;
        Some(match v {
            1 => SessionOpen,
            2 => GarbleBlob,
            3 => OtRound1,
            4 => OtRound2,
            5 => OtRound3,
            6 => EvalLabelsBack,
            7 => IntegritySig,
            8 => LogOutputBits,
            9 => Reject,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub session: [u8; SESSION_ID_LEN],
    pub seq: u32,
    pub payload: Vec<u8>,
}

pub fn encode_frames(frames: &[Frame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(frames.iter().map(|f| FRAME_HEADER + f.payload.len()).sum());
    for f in frames {
        out.push(f.kind as u8);
        out.extend_from_slice(&f.session);
        out.extend_from_slice(&f.seq.to_be_bytes());
        out.extend_from_slice(&(f.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&f.payload);
    }
    out
}

pub fn decode_frames(mut bytes: &[u8]) -> Result<Vec<Frame>, GcError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < FRAME_HEADER {
            return Err(GcError::Frame("truncated frame header".into()));
        }
        let kind = FrameKind::from_u8(bytes[0]).ok_or_else(|| GcError::Frame(format!("unknown kind {}", bytes[0])))?;
        let session = bytes[1..1 + SESSION_ID_LEN].try_into().unwrap();
        let seq = u32::from_be_bytes(bytes[17..21].try_into().unwrap());
        let len = u32::from_be_bytes(bytes[21..25].try_into().unwrap()) as usize;
        let rest = &bytes[FRAME_HEADER..];
        if rest.len() < len {
            return Err(GcError::Frame("truncated frame payload".into()));
        }
        frames.push(Frame { kind, session, seq, payload: rest[..len].to_vec() });
        bytes = &rest[len..];
    }
    Ok(frames)
}

/// Session id plus the running frame counter.
#[derive(Clone, Debug)]
pub struct Channel {
    pub id: [u8; SESSION_ID_LEN],
    next: u32,
}

impl Channel {
    pub fn new(id: [u8; SESSION_ID_LEN]) -> Channel {
        Channel { id, next: 0 }
    }

    pub fn send(&mut self, kind: FrameKind, payload: Vec<u8>) -> Frame {
        let f = Frame { kind, session: self.id, seq: self.next, payload };
        self.next += 1;
        f
    }

    pub fn recv<'f>(&mut self, f: &'f Frame, kind: FrameKind) -> Result<&'f [u8], GcError> {
        if f.session != self.id {
            return Err(GcError::Protocol("frame for another session".into()));
        }
        if f.kind != kind || f.seq != self.next {
            return Err(GcError::Protocol(format!(
                "expected {kind:?} #{}, got {:?} #{}",
                self.next, f.kind, f.seq
            )));
        }
        self.next += 1;
        Ok(&f.payload)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionLayout {
    pub evaluator_input_blocks: usize,
    /// One entry per output block: true if the evaluator decodes it.
    pub evaluator_outputs: Vec<bool>,
}

impl SessionLayout {
    fn evaluator_inputs(&self, c: &BooleanCircuit) -> usize {
        c.input_blocks()[..self.evaluator_input_blocks].iter().sum()
    }

    fn positions(&self, c: &BooleanCircuit, evaluator: bool) -> Vec<std::ops::Range<usize>> {
        (0..c.output_blocks().len())
            .filter(|&b| self.evaluator_outputs[b] == evaluator)
            .map(|b| c.output_block_span(b))
            .collect()
    }

    fn check(&self, c: &BooleanCircuit) -> Result<(), GcError> {
        if self.evaluator_input_blocks > c.input_blocks().len() || self.evaluator_outputs.len() != c.output_blocks().len() {
            return Err(GcError::Protocol("session layout does not fit the circuit".into()));
        }
        Ok(())
    }
}

fn put_labels(labels: &[Label]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + labels.len() * LABEL_LEN);
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    labels.iter().for_each(|l| out.extend_from_slice(l));
    out
}

fn get_labels(bytes: &[u8], expected: usize, what: &'static str) -> Result<Vec<Label>, GcError> {
    let want = 4 + expected * LABEL_LEN;
    if bytes.len() < 4 || u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize != expected || bytes.len() != want {
        return Err(GcError::Length { what, expected: want, got: bytes.len() });
    }
    Ok(bytes[4..].chunks_exact(LABEL_LEN).map(|c| c.try_into().unwrap()).collect())
}

fn split_blocks(bits: Vec<bool>, spans: &[std::ops::Range<usize>]) -> Vec<Vec<bool>> {
    let mut it = bits.into_iter();
    spans.iter().map(|r| it.by_ref().take(r.len()).collect()).collect()
}

pub struct GarblerSession {
    pub channel: Channel,
    circuit: Arc<BooleanCircuit>,
    layout: SessionLayout,
    secrets: GarblerSecrets,
    ot: OtSender,
    outputs_decoded: bool,
}

impl GarblerSession {
    /// Garbles and returns the garbled-circuit blob and first OT message.
    pub fn start<R: RngCore + CryptoRng + ?Sized>(
        channel: Channel,
        circuit: Arc<BooleanCircuit>,
        layout: SessionLayout,
        garbler_inputs: &[bool],
        seed: &[u8; 32],
        rng: &mut R,
    ) -> Result<(GarblerSession, Vec<Frame>), GcError> {
        layout.check(&circuit)?;
        let n_e = layout.evaluator_inputs(&circuit);
        let n_g = circuit.num_inputs() - n_e;
        if garbler_inputs.len() != n_g {
            return Err(GcError::Length { what: "garbler inputs", expected: n_g, got: garbler_inputs.len() });
        }
        let (tables, secrets) = garble(&circuit, seed);
        let labels: Vec<Label> =
            garbler_inputs.iter().enumerate().map(|(i, &b)| secrets.input_label(n_e + i, b)).collect();
        let tb = tables.to_bytes();
        let mut blob = Vec::with_capacity(4 + tb.len() + 4 + n_g * LABEL_LEN);
        blob.extend_from_slice(&(tables.0.len() as u32).to_be_bytes());
        blob.extend_from_slice(&tb);
        blob.extend(put_labels(&labels));
        let (ot, ot1) = OtSender::new(rng);
        let mut s = GarblerSession { channel, circuit, layout, secrets, ot, outputs_decoded: false };
        let frames = vec![s.channel.send(FrameKind::GarbleBlob, blob), s.channel.send(FrameKind::OtRound1, ot1)];
        Ok((s, frames))
    }

    pub fn on_ot_round2(&mut self, f: &Frame) -> Result<Frame, GcError> {
        let payload = self.channel.recv(f, FrameKind::OtRound2)?;
        let n_e = self.layout.evaluator_inputs(&self.circuit);
        let pairs: Vec<(Label, Label)> = (0..n_e).map(|i| self.secrets.input_pair(i)).collect();
        let resp = self.ot.respond(payload, &pairs)?;
        Ok(self.channel.send(FrameKind::OtRound3, resp))
    }

    /// Decodes the garbler-owned output blocks, in block order.
    pub fn on_labels_back(&mut self, f: &Frame) -> Result<Vec<Vec<bool>>, GcError> {
        let payload = self.channel.recv(f, FrameKind::EvalLabelsBack)?;
        let spans = self.layout.positions(&self.circuit, false);
        let total: usize = spans.iter().map(|r| r.len()).sum();
        let labels = get_labels(payload, total, "returned output labels")?;
        let mut bits = Vec::with_capacity(total);
        let mut at = 0;
        for r in &spans {
            bits.extend(self.secrets.decode_labels(r.start, &labels[at..at + r.len()])?);
            at += r.len();
        }
        self.outputs_decoded = true;
        Ok(split_blocks(bits, &spans))
    }

    /// Releases the evaluator's decode map. Only valid after the garbler
    /// has decoded its own outputs.
    pub fn output_bits(&mut self) -> Result<Frame, GcError> {
        if !self.outputs_decoded {
            return Err(GcError::Protocol("output map requested before labels were returned".into()));
        }
        let spans = self.layout.positions(&self.circuit, true);
        let mut payload = Vec::new();
        let map: Vec<(Label, Label)> = spans.iter().flat_map(|r| self.secrets.decode_map(r.clone())).collect();
        payload.extend_from_slice(&(map.len() as u32).to_be_bytes());
        for (h0, h1) in map {
            payload.extend_from_slice(&h0);
            payload.extend_from_slice(&h1);
        }
        Ok(self.channel.send(FrameKind::LogOutputBits, payload))
    }
}

pub struct EvaluatorSession {
    pub channel: Channel,
    circuit: Arc<BooleanCircuit>,
    layout: SessionLayout,
    inputs: Vec<bool>,
    tables: Option<GarbledTables>,
    garbler_labels: Vec<Label>,
    ot: Option<OtReceiver>,
    own_output_labels: Vec<Label>,
}

impl EvaluatorSession {
    pub fn new(
        channel: Channel,
        circuit: Arc<BooleanCircuit>,
        layout: SessionLayout,
        inputs: &[bool],
    ) -> Result<EvaluatorSession, GcError> {
        layout.check(&circuit)?;
        let n_e = layout.evaluator_inputs(&circuit);
        if inputs.len() != n_e {
            return Err(GcError::Length { what: "evaluator inputs", expected: n_e, got: inputs.len() });
        }
        Ok(EvaluatorSession {
            channel,
            circuit,
            layout,
            inputs: inputs.to_vec(),
            tables: None,
            garbler_labels: Vec::new(),
            ot: None,
            own_output_labels: Vec::new(),
        })
    }

    pub fn on_setup<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        blob: &Frame,
        ot1: &Frame,
        rng: &mut R,
    ) -> Result<Frame, GcError> {
        let payload = self.channel.recv(blob, FrameKind::GarbleBlob)?;
        let c = &self.circuit;
        let t_len = c.and_count() * 3 * LABEL_LEN;
        if payload.len() < 4 + t_len || u32::from_be_bytes(payload[..4].try_into().unwrap()) as usize != c.and_count() {
            return Err(GcError::Length { what: "garbled circuit blob", expected: 4 + t_len, got: payload.len() });
        }
        let tables = GarbledTables::from_bytes(c, &payload[4..4 + t_len])?;
        let n_g = c.num_inputs() - self.inputs.len();
        self.garbler_labels = get_labels(&payload[4 + t_len..], n_g, "garbler input labels")?;
        self.tables = Some(tables);
        let p1 = self.channel.recv(ot1, FrameKind::OtRound1)?;
        let (ot, msg) = OtReceiver::new(p1, &self.inputs, rng)?;
        self.ot = Some(ot);
        Ok(self.channel.send(FrameKind::OtRound2, msg))
    }

    /// Evaluates and returns the labels of the garbler-owned outputs.
    pub fn on_ot_round3(&mut self, f: &Frame) -> Result<Frame, GcError> {
        let payload = self.channel.recv(f, FrameKind::OtRound3)?;
        let ot = self.ot.take().ok_or_else(|| GcError::Protocol("OT round 3 before setup".into()))?;
        let mut labels = ot.finish(payload)?;
        labels.extend_from_slice(&self.garbler_labels);
        let tables = self.tables.take().ok_or_else(|| GcError::Protocol("no garbled tables".into()))?;
        let out = evaluate(&self.circuit, &tables, &labels)?;
        let theirs: Vec<Label> =
            self.layout.positions(&self.circuit, false).into_iter().flat_map(|r| out[r].to_vec()).collect();
        self.own_output_labels =
            self.layout.positions(&self.circuit, true).into_iter().flat_map(|r| out[r].to_vec()).collect();
        Ok(self.channel.send(FrameKind::EvalLabelsBack, put_labels(&theirs)))
    }

    /// Decodes the evaluator-owned output blocks, in block order.
    pub fn on_output_bits(&mut self, f: &Frame) -> Result<Vec<Vec<bool>>, GcError> {
        let payload = self.channel.recv(f, FrameKind::LogOutputBits)?;
        let spans = self.layout.positions(&self.circuit, true);
        let total: usize = spans.iter().map(|r| r.len()).sum();
        let want = 4 + total * 2 * LABEL_LEN;
        if payload.len() != want || u32::from_be_bytes(payload[..4].try_into().unwrap()) as usize != total {
            return Err(GcError::Length { what: "output decode map", expected: want, got: payload.len() });
        }
        let map: Vec<(Label, Label)> = payload[4..]
            .chunks_exact(2 * LABEL_LEN)
            .map(|c| (c[..LABEL_LEN].try_into().unwrap(), c[LABEL_LEN..].try_into().unwrap()))
            .collect();
        let mut bits = Vec::with_capacity(total);
        let mut at = 0;
        for r in &spans {
            bits.extend(decode(
                &self.circuit,
                r.start,
                &map[at..at + r.len()],
                &self.own_output_labels[at..at + r.len()],
            )?);
            at += r.len();
        }
        Ok(split_blocks(bits, &spans))
    }
}

pub struct SessionResult {
    pub evaluator_outputs: Vec<Vec<bool>>,
    pub garbler_outputs: Vec<Vec<bool>>,
    pub transcript: Vec<Frame>,
}

/// Runs both sides in-process with seeded randomness.
pub fn run_session(
    circuit: Arc<BooleanCircuit>,
    layout: SessionLayout,
    evaluator_inputs: &[bool],
    garbler_inputs: &[bool],
    garble_seed: &[u8; 32],
    rng_seed: u64,
) -> Result<SessionResult, GcError> {
    let mut g_rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut e_rng = ChaCha20Rng::seed_from_u64(rng_seed ^ 0x5eed);
    let id = [0u8; SESSION_ID_LEN];
    let mut g_ch = Channel::new(id);
    let mut e_ch = Channel::new(id);
    // Frame 0 stands in for the mechanism-specific open request.
    let open = e_ch.send(FrameKind::SessionOpen, Vec::new());
    g_ch.recv(&open, FrameKind::SessionOpen)?;
    let mut transcript = vec![open];

    let (mut g, setup) = GarblerSession::start(g_ch, circuit.clone(), layout.clone(), garbler_inputs, garble_seed, &mut g_rng)?;
    let mut e = EvaluatorSession::new(e_ch, circuit, layout, evaluator_inputs)?;
    let ot2 = e.on_setup(&setup[0], &setup[1], &mut e_rng)?;
    transcript.extend(setup);
    let ot3 = g.on_ot_round2(&ot2)?;
    let back = e.on_ot_round3(&ot3)?;
    let garbler_outputs = g.on_labels_back(&back)?;
    // The integrity-signature slot is unused here; skip it on both sides.
    let sig = e.channel.send(FrameKind::IntegritySig, Vec::new());
    g.channel.recv(&sig, FrameKind::IntegritySig)?;
    let out = g.output_bits()?;
    let evaluator_outputs = e.on_output_bits(&out)?;
    transcript.extend([ot2, ot3, back, sig, out]);
    Ok(SessionResult { evaluator_outputs, garbler_outputs, transcript })
}
