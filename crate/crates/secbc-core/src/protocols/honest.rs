//! The two-phase scheme for honest-but-curious receivers.
//!
//! Phase 1 transmits random packets; a packet received by exactly one
//! receiver becomes a key packet shared with that receiver. Phase 2 one-time
//! pads each message packet, reusing a key packet until some other receiver
//! observes a ciphertext under it, then delivers leftover side-information
//! packets with XOR coding (K = 2) or plain ARQ (K >= 3).

use crate::channel::{ChannelState, ErasureModel, RngSeed, StateSampler};
use crate::expr::{Basis, LinExpr};
use crate::field::Field;

use super::params::HonestParams;
use super::transcript::{Phase, Transcript, TrialReport};
use super::{MessageSpec, ProtocolError};

/// Run the honest-but-curious scheme. Receivers acknowledge truthfully, so
/// the acked state always equals the true state.
pub fn run_honest(
    spec: &MessageSpec,
    model: &ErasureModel,
    params: &HonestParams,
    seed: RngSeed,
) -> Result<(Transcript, TrialReport), ProtocolError> {
    let k = spec.k();
    if model.receivers() != k {
        return Err(ProtocolError::ReceiverMismatch { got: k, want: model.receivers() });
    }
    let field = Field::new(spec.field_m)?;
    let mut sampler = StateSampler::new(model.clone(), seed);
    let mut transcript = Transcript::new(k, spec.field_m, spec.packet_len, spec.n_packets.clone());
    let mut report = TrialReport::new(k);

    // Scripted traces end the run early instead of failing it.
    let mut script_done = false;
    let sample = |sampler: &mut StateSampler, done: &mut bool| -> Option<ChannelState> {
        match sampler.sample_state() {
            Ok(s) => Some(s),
            Err(_) => {
                *done = true;
                None
            }
        }
    };

    // Phase 1: key generation. K_j is the first k_j random packets received
    // only by receiver j.
    let mut keys: Vec<Vec<LinExpr>> = vec![Vec::new(); k];
    'keygen: for _ in 0..params.n1 {
        let Some(state) = sample(&mut sampler, &mut script_done) else {
            break 'keygen;
        };
        let expr = LinExpr::unit(Basis::Rand { index: transcript.rand_count });
        transcript.rand_count += 1;
        transcript.push(expr, state, state, Phase::KeyGen);
        report.count_phase(Phase::KeyGen);
        if state.count() == 1 {
            let j = state.iter(k).next().unwrap();
            if keys[j].len() < params.key_len[j] {
                keys[j].push(LinExpr::unit(Basis::Rand {
                    index: transcript.rand_count - 1,
                }));
            }
        }
    }
    for j in 0..k {
        report.keys_generated[j] = keys[j].len();
        if keys[j].len() < params.key_len[j] {
            report.error[j] = true;
        }
    }

    // Phase 2a: one-time-pad delivery with key reuse.
    let mut phase2_tx = 0usize;
    let mut delivered: Vec<Vec<bool>> = spec.n_packets.iter().map(|&n| vec![false; n]).collect();
    for j in 0..k {
        if report.error[j] || script_done {
            continue;
        }
        let mut cursor = 0usize; // index of the key packet in use
        let mut used = 0usize;
        'messages: for l in 0..spec.n_packets[j] {
            if cursor >= keys[j].len() {
                report.error[j] = true;
                break 'messages;
            }
            used = used.max(cursor + 1);
            let mut expr = LinExpr::unit(Basis::Msg { receiver: j, index: l });
            expr.add_scaled(&field, &keys[j][cursor], 1);
            transcript.encrypted[j].push(expr.clone());
            let enc_idx = transcript.encrypted[j].len() - 1;
            loop {
                if phase2_tx >= params.phase2_cap {
                    report.error[j] = true;
                    break 'messages;
                }
                let Some(state) = sample(&mut sampler, &mut script_done) else {
                    report.error[j] = true;
                    break 'messages;
                };
                phase2_tx += 1;
                transcript.push(expr.clone(), state, state, Phase::Encrypted(j));
                report.count_phase(Phase::Encrypted(j));
                if state.is_empty() {
                    continue; // nobody received, repeat
                }
                if state.contains(j) {
                    delivered[j][l] = true;
                } else {
                    // Held only by other receivers: side information for the
                    // coded delivery step.
                    transcript.queues[j].push(enc_idx);
                }
                // Key reuse rule: keep the key only if no other receiver saw
                // this ciphertext.
                if !(state.count() == 1 && state.contains(j)) {
                    cursor += 1;
                }
                break;
            }
        }
        report.keys_consumed[j] = used;
    }

    // Phase 2b: deliver the queued side-information packets.
    if k == 2 {
        run_xor_phase(
            &field,
            &mut transcript,
            &mut report,
            &mut delivered,
            &mut sampler,
            &mut script_done,
            &mut phase2_tx,
            params.phase2_cap,
        );
    } else {
        // K >= 3: plain ARQ per packet to its intended receiver. Secure but
        // rate-suboptimal; the coded-delivery generalization is out of scope.
        for j in 0..k {
            if report.error[j] {
                continue;
            }
            let queue = transcript.queues[j].clone();
            'queue: for enc_idx in queue {
                let expr = transcript.encrypted[j][enc_idx].clone();
                loop {
                    if phase2_tx >= params.phase2_cap || script_done {
                        report.error[j] = true;
                        break 'queue;
                    }
                    let Some(state) = sample(&mut sampler, &mut script_done) else {
                        report.error[j] = true;
                        break 'queue;
                    };
                    phase2_tx += 1;
                    transcript.push(expr.clone(), state, state, Phase::Arq(j));
                    report.count_phase(Phase::Arq(j));
                    if state.contains(j) {
                        let l = message_index(&expr, j);
                        delivered[j][l] = true;
                        break;
                    }
                }
            }
        }
    }

    for j in 0..k {
        report.decoded[j] = !report.error[j] && delivered[j].iter().all(|&d| d);
    }
    Ok((transcript, report))
}

/// K = 2 coded delivery: XOR a pending packet of each receiver while both
/// queues have pending entries, then fall back to plain repetition.
#[allow(clippy::too_many_arguments)]
fn run_xor_phase(
    field: &Field,
    transcript: &mut Transcript,
    report: &mut TrialReport,
    delivered: &mut [Vec<bool>],
    sampler: &mut StateSampler,
    script_done: &mut bool,
    phase2_tx: &mut usize,
    cap: usize,
) {
    let pending: Vec<Vec<usize>> = (0..2)
        .map(|j| if report.error[j] { Vec::new() } else { transcript.queues[j].clone() })
        .collect();
    let mut pos = [0usize; 2];
    loop {
        let rem: Vec<bool> = (0..2).map(|j| pos[j] < pending[j].len()).collect();
        if !rem[0] && !rem[1] {
            break;
        }
        if *phase2_tx >= cap || *script_done {
            for j in 0..2 {
                if rem[j] {
                    report.error[j] = true;
                }
            }
            break;
        }
        let (expr, phase) = if rem[0] && rem[1] {
            let a = transcript.encrypted[0][pending[0][pos[0]]].clone();
            let b = transcript.encrypted[1][pending[1][pos[1]]].clone();
            (a.xor(field, &b), Phase::Xor)
        } else {
            let j = if rem[0] { 0 } else { 1 };
            (transcript.encrypted[j][pending[j][pos[j]]].clone(), Phase::Arq(j))
        };
        let Some(state) = sampler.sample_state().ok() else {
            *script_done = true;
            continue;
        };
        *phase2_tx += 1;
        transcript.push(expr, state, state, phase);
        report.count_phase(phase);
        for j in 0..2 {
            if state.contains(j) && pos[j] < pending[j].len() {
                let enc_idx = pending[j][pos[j]];
                let l = message_index(&transcript.encrypted[j][enc_idx], j);
                delivered[j][l] = true;
                pos[j] += 1;
            }
        }
    }
}

/// The message index an encrypted packet carries for its intended receiver.
fn message_index(expr: &LinExpr, receiver: usize) -> usize {
    expr.terms()
        .find_map(|(b, _)| match b {
            Basis::Msg { receiver: r, index } if *r == receiver => Some(*index),
            _ => None,
        })
        .expect("encrypted packet carries its message term")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelState;
    use crate::protocols::params::honest_params;

    fn table_one_script() -> ErasureModel {
        // States of the worked example: B, BC, C | C, C, none, B, BC.
        let s = |ix: &[usize]| ChannelState::from_indices(ix);
        ErasureModel::scripted(
            2,
            vec![
                s(&[0]),
                s(&[0, 1]),
                s(&[1]),
                s(&[1]),
                s(&[1]),
                s(&[]),
                s(&[0]),
                s(&[0, 1]),
            ],
        )
    }

    #[test]
    fn table_one_trace() {
        let spec = MessageSpec::new(vec![1, 2]);
        let params = HonestParams { key_len: vec![1, 1], n1: 3, phase2_cap: 100 };
        let (t, report) =
            run_honest(&spec, &table_one_script(), &params, RngSeed { seed: 0, stream: 0 }).unwrap();
        assert_eq!(t.len(), 8);
        let f = t.field();
        // X_4 = W_{1,1} + K_{B,1} with K_{B,1} = X_1.
        let mut x4 = LinExpr::unit(Basis::Msg { receiver: 0, index: 0 });
        x4.add_scaled(&f, &LinExpr::unit(Basis::Rand { index: 0 }), 1);
        assert_eq!(t.records[3].expr, x4);
        // X_5 = W_{2,1} + K_{C,1} with K_{C,1} = X_3.
        let mut x5 = LinExpr::unit(Basis::Msg { receiver: 1, index: 0 });
        x5.add_scaled(&f, &LinExpr::unit(Basis::Rand { index: 2 }), 1);
        assert_eq!(t.records[4].expr, x5);
        // X_6 = W_{2,2} + K_{C,1}, X_7 repeats it.
        let mut x6 = LinExpr::unit(Basis::Msg { receiver: 1, index: 1 });
        x6.add_scaled(&f, &LinExpr::unit(Basis::Rand { index: 2 }), 1);
        assert_eq!(t.records[5].expr, x6);
        assert_eq!(t.records[6].expr, x6);
        // X_8 = X_4 + X_7.
        assert_eq!(t.records[7].expr, x4.xor(&f, &x6));
        assert!(report.decoded.iter().all(|&d| d));
        assert!(!report.error.iter().any(|&e| e));
    }

    #[test]
    fn all_erasure_script_declares_errors() {
        let model = ErasureModel::scripted(2, vec![ChannelState::empty(); 20]);
        let spec = MessageSpec::new(vec![2, 2]);
        let params = HonestParams { key_len: vec![1, 1], n1: 10, phase2_cap: 10 };
        let (_, report) =
            run_honest(&spec, &model, &params, RngSeed { seed: 0, stream: 0 }).unwrap();
        assert!(report.error.iter().all(|&e| e));
        assert!(!report.decoded.iter().any(|&d| d));
    }

    #[test]
    fn single_receiver_perfect_channel() {
        // K=1, delta=0: every key-phase packet is a key, one key serves the
        // whole message, everything is delivered first try.
        let model = ErasureModel::independent(vec![0.0]).unwrap();
        let spec = MessageSpec::new(vec![5]);
        let params = honest_params(&spec.n_packets, &model).unwrap();
        let (t, report) = run_honest(&spec, &model, &params, RngSeed { seed: 1, stream: 0 }).unwrap();
        assert!(report.decoded[0]);
        assert_eq!(report.keys_consumed[0], 1);
        assert_eq!(t.len(), params.n1 + 5);
    }

    #[test]
    fn deterministic_given_seed() {
        let model = ErasureModel::independent(vec![0.5, 0.5]).unwrap();
        let spec = MessageSpec::new(vec![20, 20]);
        let params = honest_params(&spec.n_packets, &model).unwrap();
        let run = || {
            let (t, _) =
                run_honest(&spec, &model, &params, RngSeed { seed: 5, stream: 2 }).unwrap();
            t.to_text()
        };
        assert_eq!(run(), run());
    }
}
