//! Full run records: what was sent, what the channel did, what was acked.
//!
//! Transcripts serialize to a line-oriented text format, one record per
//! transmission, byte-stable for golden-file tests.

use std::fmt;

use crate::channel::{AckState, ChannelState};
use crate::expr::LinExpr;
use crate::field::Field;

/// Protocol phase a transmission belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Shared key generation phase.
    KeyGen,
    /// Per-receiver key generation segment (distribution-independent scheme).
    KeyGenSeg(usize),
    /// Encrypted one-time-pad delivery for the given intended receiver.
    Encrypted(usize),
    /// XOR-coded delivery of side-information packets.
    Xor,
    /// Plain retransmission to a single receiver.
    Arq(usize),
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::KeyGen => write!(f, "key"),
            Phase::KeyGenSeg(j) => write!(f, "key{}", j + 1),
            Phase::Encrypted(j) => write!(f, "enc{}", j + 1),
            Phase::Xor => write!(f, "xor"),
            Phase::Arq(j) => write!(f, "arq{}", j + 1),
        }
    }
}

impl Phase {
    pub fn parse(s: &str) -> Result<Phase, String> {
        let idx = |rest: &str| -> Result<usize, String> {
            let i: usize = rest.parse().map_err(|_| format!("bad phase {s:?}"))?;
            if i == 0 {
                return Err(format!("bad phase {s:?}"));
            }
            Ok(i - 1)
        };
        if s == "key" {
            Ok(Phase::KeyGen)
        } else if s == "xor" {
            Ok(Phase::Xor)
        } else if let Some(rest) = s.strip_prefix("key") {
            Ok(Phase::KeyGenSeg(idx(rest)?))
        } else if let Some(rest) = s.strip_prefix("enc") {
            Ok(Phase::Encrypted(idx(rest)?))
        } else if let Some(rest) = s.strip_prefix("arq") {
            Ok(Phase::Arq(idx(rest)?))
        } else {
            Err(format!("bad phase {s:?}"))
        }
    }
}

/// One transmission: the symbolic packet, the true state, the acked state.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub index: usize,
    pub expr: LinExpr,
    pub state: ChannelState,
    pub ack: AckState,
    pub phase: Phase,
}

/// Complete run record plus the protocol internals the audit needs.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub k: usize,
    /// Field exponent m the run used.
    pub field_m: u32,
    /// Packet length L (metadata; the symbolic trace is length-independent).
    pub packet_len: usize,
    /// Message packets per receiver.
    pub n_packets: Vec<usize>,
    /// Number of source-randomness basis packets drawn.
    pub rand_count: usize,
    pub records: Vec<Record>,
    /// Encrypted message packets per receiver (U_B, U_C and the honest-scheme
    /// equivalents), in message order.
    pub encrypted: Vec<Vec<LinExpr>>,
    /// Side-information queues: for receiver j, indices into `encrypted[j]`
    /// awaiting coded delivery (Q_B, Q_C).
    pub queues: Vec<Vec<usize>>,
}

impl Transcript {
    pub fn new(k: usize, field_m: u32, packet_len: usize, n_packets: Vec<usize>) -> Self {
        Transcript {
            k,
            field_m,
            packet_len,
            n_packets,
            rand_count: 0,
            records: Vec::new(),
            encrypted: vec![Vec::new(); k],
            queues: vec![Vec::new(); k],
        }
    }

    pub fn push(&mut self, expr: LinExpr, state: ChannelState, ack: AckState, phase: Phase) {
        let index = self.records.len();
        self.records.push(Record { index, expr, state, ack, phase });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Serialize: a header line, then `i|phase|expr|state|ack` per record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let n_list: Vec<String> = self.n_packets.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!(
            "transcript k={} m={} L={} N={} rand={}\n",
            self.k,
            self.field_m,
            self.packet_len,
            n_list.join(","),
            self.rand_count
        ));
        for r in &self.records {
            out.push_str(&format!(
                "{}|{}|{}|{}|{}\n",
                r.index + 1,
                r.phase,
                r.expr.to_text(),
                r.state.to_text(self.k),
                r.ack.to_text(self.k)
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Transcript, String> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or("empty transcript")?;
        let rest = header.strip_prefix("transcript ").ok_or("line 1: missing transcript header")?;
        let mut k = None;
        let mut m = None;
        let mut l = None;
        let mut n_packets = None;
        let mut rand_count = None;
        for part in rest.split_whitespace() {
            let (key, val) = part.split_once('=').ok_or("line 1: malformed header field")?;
            match key {
                "k" => k = Some(val.parse().map_err(|e| format!("line 1: k: {e}"))?),
                "m" => m = Some(val.parse().map_err(|e| format!("line 1: m: {e}"))?),
                "L" => l = Some(val.parse().map_err(|e| format!("line 1: L: {e}"))?),
                "N" => {
                    let ns: Result<Vec<usize>, _> =
                        val.split(',').map(|s| s.parse::<usize>()).collect();
                    n_packets = Some(ns.map_err(|e| format!("line 1: N: {e}"))?);
                }
                "rand" => rand_count = Some(val.parse().map_err(|e| format!("line 1: rand: {e}"))?),
                other => return Err(format!("line 1: unknown header field {other:?}")),
            }
        }
        let k = k.ok_or("line 1: missing k")?;
        let mut t = Transcript::new(
            k,
            m.ok_or("line 1: missing m")?,
            l.ok_or("line 1: missing L")?,
            n_packets.ok_or("line 1: missing N")?,
        );
        t.rand_count = rand_count.ok_or("line 1: missing rand")?;
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 5 {
                return Err(format!("line {lineno}: expected 5 fields, got {}", fields.len()));
            }
            let phase = Phase::parse(fields[1]).map_err(|e| format!("line {lineno}: {e}"))?;
            let expr = LinExpr::from_text(fields[2]).map_err(|e| format!("line {lineno}: {e}"))?;
            let state = ChannelState::from_text(fields[3]).map_err(|e| format!("line {lineno}: {e}"))?;
            let ack = ChannelState::from_text(fields[4]).map_err(|e| format!("line {lineno}: {e}"))?;
            t.push(expr, state, ack, phase);
        }
        Ok(t)
    }

    pub fn field(&self) -> Field {
        Field::new(self.field_m).expect("transcript field exponent")
    }
}

/// Per-trial outcome summary; leakage fields are filled by the audit.
#[derive(Debug, Clone, Default)]
pub struct TrialReport {
    pub decoded: Vec<bool>,
    pub error: Vec<bool>,
    pub dishonest: Vec<bool>,
    /// Transmissions used per phase tag, in first-use order.
    pub phase_tx: Vec<(Phase, usize)>,
    pub keys_generated: Vec<usize>,
    pub keys_consumed: Vec<usize>,
    /// Leaked message dimensions toward each receiver's complement
    /// (observer set = everyone else, target = that receiver's message).
    pub leaked_dims: Vec<Option<usize>>,
}

impl TrialReport {
    pub fn new(k: usize) -> Self {
        TrialReport {
            decoded: vec![false; k],
            error: vec![false; k],
            dishonest: vec![false; k],
            phase_tx: Vec::new(),
            keys_generated: vec![0; k],
            keys_consumed: vec![0; k],
            leaked_dims: vec![None; k],
        }
    }

    pub fn count_phase(&mut self, phase: Phase) {
        if let Some(slot) = self.phase_tx.iter_mut().find(|(p, _)| *p == phase) {
            slot.1 += 1;
        } else {
            self.phase_tx.push((phase, 1));
        }
    }

    pub fn total_tx(&self) -> usize {
        self.phase_tx.iter().map(|(_, n)| n).sum()
    }
}
