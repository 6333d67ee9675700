//! The K = 2 scheme that tolerates lying acknowledgments.
//!
//! Feedback is public but unauthenticated: a receiver may deny packets he got
//! or claim packets he missed. The scheme answers with privacy amplification
//! (an MDS compression of the key source, so partial knowledge of the source
//! reveals nothing about the key) and with accounting: each encrypted-ARQ step
//! has a transmission cap, and a receiver whose acknowledgment count at the
//! cap falls below the statistically plausible minimum is declared dishonest
//! and cut off, after which the other receiver is served by plain ARQ.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

use crate::channel::{joint_stats, AckState, ChannelState, ErasureModel, RngSeed, StateSampler};
use crate::expr::{combine_linear, Basis, LinExpr};
use crate::field::{mds_generator, mds_parity_check, Field, FieldError};

use super::params::{dishonesty_threshold, DisParams, DishonestParams};
use super::strategy::{apply_strategy, AckStrategy, AckView};
use super::transcript::{Phase, Transcript, TrialReport};
use super::{MessageSpec, ProtocolError};

/// Compress `source` packets into `key_len` key packets through the parity
/// check of a (source.len(), source.len()-key_len) MDS code. Any key_len of
/// the sources determine the key; knowing fewer reveals nothing.
pub fn derive_key_mds(
    field: &Field,
    source: &[LinExpr],
    key_len: usize,
) -> Result<Vec<LinExpr>, FieldError> {
    let n = source.len();
    assert!(key_len <= n, "key longer than its source");
    if key_len == 0 {
        return Ok(Vec::new());
    }
    let h = mds_parity_check(field, n, n - key_len)?;
    Ok(combine_linear(field, &h.matrix, source))
}

/// Stretch `key` to `n` packets with the generator of an (n, key.len()) MDS
/// code: any key.len() of the outputs are linearly independent over the key.
pub fn expand_key(field: &Field, key: &[LinExpr], n: usize) -> Result<Vec<LinExpr>, FieldError> {
    if key.len() >= n {
        return Ok(key[..n].to_vec());
    }
    let g = mds_generator(field, n, key.len())?;
    Ok(combine_linear(field, &g.matrix.transpose(), key))
}

/// End-to-end pad coefficients: row l gives the coefficients of the l-th
/// expanded key packet over the k_1 raw source packets, i.e. the product of
/// the expansion generator and the derivation parity check. The matrix only
/// depends on (field, N, k_B, k_1), so it is computed once and shared across
/// trials; per trial the sources just relabel its columns.
fn pad_matrix(
    field: &Field,
    n: usize,
    k_b: usize,
    k_1: usize,
) -> Result<Arc<crate::field::Matrix>, FieldError> {
    type Cache = Mutex<HashMap<(u32, usize, usize, usize), Arc<crate::field::Matrix>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (field.exponent(), n, k_b, k_1);
    if let Some(c) = cache.lock().unwrap().get(&key) {
        return Ok(c.clone());
    }
    let h = mds_parity_check(field, k_1, k_1 - k_b)?.matrix; // k_b x k_1
    let c = if k_b >= n {
        // Expansion truncates; the pad rows are the first n key derivations.
        crate::field::Matrix::from_rows((0..n).map(|r| h.row(r).to_vec()).collect())
    } else {
        let g = mds_generator(field, n, k_b)?.matrix; // k_b x n
        g.transpose().matmul(field, &h)?
    };
    let c = Arc::new(c);
    cache.lock().unwrap().insert(key, c.clone());
    Ok(c)
}

/// Run the full eight-step scheme with a single key-generation phase.
pub fn run_dishonest(
    spec: &MessageSpec,
    model: &ErasureModel,
    params: &DishonestParams,
    strategies: [AckStrategy; 2],
    seed: RngSeed,
) -> Result<(Transcript, TrialReport), ProtocolError> {
    let mut r = Runner::new(spec, model, params, strategies, seed)?;
    let acked = r.key_phase(params.n_1, Phase::KeyGen);
    let sources = [take_sources(&acked[0], params.k_1), take_sources(&acked[1], params.k_2)];
    r.finish(params, sources)
}

/// Variant with two disjoint key-generation segments: Bob's key is built only
/// from the first segment, Calvin's only from the second, so the two keys
/// live on disjoint randomness.
pub fn run_dis(
    spec: &MessageSpec,
    model: &ErasureModel,
    params: &DisParams,
    strategies: [AckStrategy; 2],
    seed: RngSeed,
) -> Result<(Transcript, TrialReport), ProtocolError> {
    let mut r = Runner::new(spec, model, &params.base, strategies, seed)?;
    // The disjoint segments are longer than the single shared key phase the
    // base budget assumes; extend the global cap by the difference.
    r.cap = params.base.n - params.base.n_1 + params.n_1_1 + params.n_1_2;
    let seg1 = r.key_phase(params.n_1_1, Phase::KeyGenSeg(0));
    let seg2 = r.key_phase(params.n_1_2, Phase::KeyGenSeg(1));
    let sources =
        [take_sources(&seg1[0], params.base.k_1), take_sources(&seg2[1], params.base.k_2)];
    r.finish(&params.base, sources)
}

/// First `k` acknowledged key packets, or None if the phase fell short.
fn take_sources(acked: &[(usize, bool)], k: usize) -> Option<Vec<(usize, bool)>> {
    (acked.len() >= k).then(|| acked[..k].to_vec())
}

struct Runner {
    field: Field,
    sampler: StateSampler,
    t: Transcript,
    report: TrialReport,
    strategies: [AckStrategy; 2],
    receptions: [Vec<bool>; 2],
    acks: [Vec<bool>; 2],
    ack_masks: Vec<u32>,
    /// Global transmission budget n.
    cap: usize,
    script_done: bool,
    /// (delta_1, delta_2, delta_12) when the model admits them; scripted
    /// traces get no dishonesty verdicts.
    deltas: Option<(f64, f64, f64)>,
    /// Encrypted packets each receiver actually holds, as (owner, index).
    have: [HashSet<(usize, usize)>; 2],
    /// True delivery of each receiver's own message packets.
    delivered: [Vec<bool>; 2],
    /// Delivery as Alice believes it from acks.
    delivered_ack: [Vec<bool>; 2],
    n_packets: [usize; 2],
}

impl Runner {
    fn new(
        spec: &MessageSpec,
        model: &ErasureModel,
        params: &DishonestParams,
        strategies: [AckStrategy; 2],
        seed: RngSeed,
    ) -> Result<Runner, ProtocolError> {
        if spec.k() != 2 {
            return Err(ProtocolError::UnsupportedReceivers { k: spec.k() });
        }
        if model.receivers() != 2 {
            return Err(ProtocolError::ReceiverMismatch { got: 2, want: model.receivers() });
        }
        let n1 = spec.n_packets[0];
        let n2 = spec.n_packets[1];
        // The MDS constructions need distinct nonzero points up to the code
        // length, so grow the field beyond the default exponent if needed.
        let longest = params.k_1.max(params.k_2).max(n1).max(n2);
        let m = Field::exponent_for(spec.field_m, longest + 1);
        let field = Field::new(m)?;
        let deltas = joint_stats(model)
            .ok()
            .map(|s| (s.delta_of(0b01), s.delta_of(0b10), s.delta_of(0b11)));
        Ok(Runner {
            field,
            sampler: StateSampler::new(model.clone(), seed),
            t: Transcript::new(2, m, spec.packet_len, spec.n_packets.clone()),
            report: TrialReport::new(2),
            strategies,
            receptions: [Vec::new(), Vec::new()],
            acks: [Vec::new(), Vec::new()],
            ack_masks: Vec::new(),
            cap: params.n,
            script_done: false,
            deltas,
            have: [HashSet::new(), HashSet::new()],
            delivered: [vec![false; n1], vec![false; n2]],
            delivered_ack: [vec![false; n1], vec![false; n2]],
            n_packets: [n1, n2],
        })
    }

    fn budget_left(&self) -> bool {
        self.t.len() < self.cap && !self.script_done
    }

    /// One transmission round: sample the true state, collect both acks
    /// causally, record everything.
    fn round(&mut self, expr: &LinExpr, phase: Phase) -> Option<(ChannelState, AckState)> {
        let state = match self.sampler.sample_state() {
            Ok(s) => s,
            Err(_) => {
                self.script_done = true;
                return None;
            }
        };
        let mut ack = ChannelState::empty();
        for r in 0..2 {
            let received = state.contains(r);
            let coin = self.sampler.gen_f64();
            let view = AckView {
                me: r,
                received,
                phase,
                own_receptions: &self.receptions[r],
                own_acks: &self.acks[r],
                others_acks: &self.ack_masks,
            };
            if apply_strategy(&self.strategies[r], &view, coin) {
                ack.insert(r);
            }
        }
        for r in 0..2 {
            self.receptions[r].push(state.contains(r));
            self.acks[r].push(ack.contains(r));
        }
        self.ack_masks.push(ack.mask());
        self.t.push(expr.clone(), state, ack, phase);
        self.report.count_phase(phase);
        Some((state, ack))
    }

    /// Transmit fresh random packets; return per receiver the acknowledged
    /// packets as (randomness index, truly received).
    fn key_phase(&mut self, rounds: usize, phase: Phase) -> [Vec<(usize, bool)>; 2] {
        let mut acked: [Vec<(usize, bool)>; 2] = [Vec::new(), Vec::new()];
        for _ in 0..rounds {
            if !self.budget_left() {
                break;
            }
            let idx = self.t.rand_count;
            self.t.rand_count += 1;
            let expr = LinExpr::unit(Basis::Rand { index: idx });
            let Some((state, ack)) = self.round(&expr, phase) else { break };
            for r in 0..2 {
                if ack.contains(r) {
                    acked[r].push((idx, state.contains(r)));
                }
            }
        }
        acked
    }

    /// Steps 4-8: derive and expand keys, encrypted ARQ per receiver with
    /// verdicts, then XOR delivery of the side-information queues.
    fn finish(
        mut self,
        params: &DishonestParams,
        sources: [Option<Vec<(usize, bool)>>; 2],
    ) -> Result<(Transcript, TrialReport), ProtocolError> {
        let key_lens = [params.k_b, params.k_c];
        let mut key_ok = [false; 2];
        let mut encrypted: [Vec<LinExpr>; 2] = [Vec::new(), Vec::new()];
        for j in 0..2 {
            if self.n_packets[j] == 0 {
                key_ok[j] = true;
                continue;
            }
            let Some(src) = &sources[j] else {
                self.report.error[j] = true;
                continue;
            };
            self.report.keys_generated[j] = src.len();
            key_ok[j] = src.iter().all(|&(_, truly)| truly);
            let key_len = key_lens[j].min(src.len());
            self.report.keys_consumed[j] = key_len;
            let pads = pad_matrix(&self.field, self.n_packets[j], key_len, src.len())?;
            for l in 0..self.n_packets[j] {
                // Sources arrive in increasing randomness order and Msg sorts
                // before Rand, so the term list is already sorted.
                let mut terms = vec![(Basis::Msg { receiver: j, index: l }, 1)];
                for (c, &(idx, _)) in src.iter().enumerate() {
                    let v = pads.get(l, c);
                    if v != 0 {
                        terms.push((Basis::Rand { index: idx }, v));
                    }
                }
                encrypted[j].push(LinExpr::from_sorted_terms(terms));
            }
            self.t.encrypted[j] = encrypted[j].clone();
        }

        // Steps 6 and 7: sequential ARQ of each receiver's encrypted packets,
        // a round advancing when anyone acks.
        let step_caps = [params.n_2_1, params.n_2_2];
        let mut queues: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for j in 0..2 {
            if self.n_packets[j] == 0 || self.report.error[j] {
                continue;
            }
            match self.encrypted_step(j, &encrypted[j], step_caps[j]) {
                StepOutcome::Complete(masks) => {
                    let other = 1 - j;
                    for (l, mask) in masks.iter().enumerate() {
                        if *mask == (1 << other) as u32 {
                            queues[j].push(l);
                        }
                    }
                    self.t.queues[j] = queues[j].clone();
                }
                StepOutcome::CapHit { masks, full } => {
                    // Low ack counts are evidence only after the step ran its
                    // full budget; a global-cap stop proves nothing.
                    if full {
                        self.verdicts(j, &masks);
                    }
                    if self.report.dishonest.iter().any(|&d| d) {
                        // Serve whoever is still in good standing by plain
                        // ARQ and end the run.
                        for h in 0..2 {
                            if !self.report.dishonest[h]
                                && self.n_packets[h] > 0
                                && !self.report.error[h]
                            {
                                self.arq_serve(h, &encrypted[h]);
                            }
                        }
                        return Ok(self.seal(key_ok));
                    }
                    // Cap exhausted with no one to blame: give up on this
                    // receiver, keep serving the other.
                    self.report.error[j] = true;
                }
                StepOutcome::Stopped => {
                    self.report.error[j] = true;
                }
            }
        }

        self.xor_phase(&encrypted, queues);
        Ok(self.seal(key_ok))
    }

    /// ARQ the packets of receiver `j` in index order until each is acked by
    /// either receiver; returns the advancing ack mask per packet.
    fn encrypted_step(&mut self, j: usize, enc: &[LinExpr], cap: usize) -> StepOutcome {
        let mut masks = vec![0u32; enc.len()];
        let mut rounds = 0usize;
        for (l, expr) in enc.iter().enumerate() {
            loop {
                if rounds >= cap || self.t.len() >= self.cap {
                    return StepOutcome::CapHit { masks, full: rounds >= cap };
                }
                let Some((state, ack)) = self.round(expr, Phase::Encrypted(j)) else {
                    return StepOutcome::Stopped;
                };
                rounds += 1;
                for r in 0..2 {
                    if state.contains(r) {
                        self.have[r].insert((j, l));
                    }
                }
                if state.contains(j) {
                    self.delivered[j][l] = true;
                }
                if !ack.is_empty() {
                    masks[l] = ack.mask();
                    if ack.contains(j) {
                        self.delivered_ack[j][l] = true;
                    }
                    break;
                }
            }
        }
        StepOutcome::Complete(masks)
    }

    /// At a step cap, a receiver acknowledging fewer distinct packets than
    /// the channel statistics make plausible is declared dishonest.
    fn verdicts(&mut self, j: usize, masks: &[u32]) {
        let Some((d1, d2, d12)) = self.deltas else { return };
        let own = [d1, d2];
        for r in 0..2 {
            let count = masks.iter().filter(|&&m| m & (1 << r) != 0).count();
            let thr = dishonesty_threshold(self.n_packets[j], own[r], d12, 1.0);
            // dishonesty_threshold(n, delta_own, d1, d2) divides by
            // 1 - d1*d2; pass the joint erasure probability directly so
            // correlated models use their true delta_12.
            if count < thr {
                self.report.dishonest[r] = true;
            }
        }
    }

    /// Post-verdict service: plain ARQ of every packet the honest receiver
    /// has not acknowledged, within the global budget.
    fn arq_serve(&mut self, h: usize, enc: &[LinExpr]) {
        for l in 0..enc.len() {
            if self.delivered_ack[h][l] {
                continue;
            }
            loop {
                if !self.budget_left() {
                    self.report.error[h] = true;
                    return;
                }
                let Some((state, ack)) = self.round(&enc[l], Phase::Arq(h)) else {
                    self.report.error[h] = true;
                    return;
                };
                if state.contains(h) {
                    self.delivered[h][l] = true;
                    self.have[h].insert((h, l));
                }
                if ack.contains(h) {
                    self.delivered_ack[h][l] = true;
                    break;
                }
            }
        }
    }

    /// Step 8: XOR one pending packet of each receiver while both queues are
    /// nonempty; each receiver's ack advances his own queue. A lone queue
    /// drains by plain ARQ.
    fn xor_phase(&mut self, encrypted: &[Vec<LinExpr>; 2], queues: [Vec<usize>; 2]) {
        let mut pos = [0usize; 2];
        let active = [!self.report.error[0], !self.report.error[1]];
        loop {
            let rem: Vec<bool> =
                (0..2).map(|j| active[j] && pos[j] < queues[j].len()).collect();
            if !rem[0] && !rem[1] {
                break;
            }
            if !self.budget_left() {
                for j in 0..2 {
                    if rem[j] {
                        self.report.error[j] = true;
                    }
                }
                break;
            }
            let pending =
                [rem[0].then(|| queues[0][pos[0]]), rem[1].then(|| queues[1][pos[1]])];
            let (expr, phase) = match pending {
                [Some(lb), Some(lc)] => {
                    (encrypted[0][lb].xor(&self.field, &encrypted[1][lc]), Phase::Xor)
                }
                [Some(lb), None] => (encrypted[0][lb].clone(), Phase::Arq(0)),
                [None, Some(lc)] => (encrypted[1][lc].clone(), Phase::Arq(1)),
                [None, None] => unreachable!(),
            };
            let Some((state, ack)) = self.round(&expr, phase) else { continue };
            for r in 0..2 {
                let Some(l) = pending[r] else { continue };
                if state.contains(r) {
                    // An XOR is useful only to a receiver holding the
                    // companion packet; plain repeats always are.
                    let usable = match pending[1 - r] {
                        Some(companion) => self.have[r].contains(&(1 - r, companion)),
                        None => true,
                    };
                    if usable {
                        self.delivered[r][l] = true;
                        self.have[r].insert((r, l));
                    }
                }
                if ack.contains(r) {
                    self.delivered_ack[r][l] = true;
                    pos[r] += 1;
                }
            }
        }
    }

    fn seal(mut self, key_ok: [bool; 2]) -> (Transcript, TrialReport) {
        for j in 0..2 {
            if self.n_packets[j] > 0
                && !self.report.error[j]
                && !self.report.dishonest[j]
                && !self.delivered_ack[j].iter().all(|&d| d)
            {
                self.report.error[j] = true;
            }
            self.report.decoded[j] = !self.report.error[j]
                && key_ok[j]
                && self.delivered[j].iter().all(|&d| d);
        }
        (self.t, self.report)
    }
}

enum StepOutcome {
    /// Every packet acknowledged; advancing ack mask per packet.
    Complete(Vec<u32>),
    /// `full` distinguishes the per-step cap from a global-budget stop.
    CapHit { masks: Vec<u32>, full: bool },
    /// Scripted states ran out.
    Stopped,
}
