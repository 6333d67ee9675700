//! Acknowledgment strategies, honest and adversarial.
//!
//! A strategy is a causal decision rule: the ack for round i may depend on the
//! receiver's own receptions and acks so far, on the other receivers' acks
//! through round i-1, and on private randomness. The built-in battery below is
//! the adversary test set; the security definitions quantify over all
//! strategies, these are the ones the harness exercises.

use super::transcript::Phase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AckStrategy {
    /// Ack exactly the packets actually received.
    Honest,
    /// Never ack anything.
    AlwaysDeny,
    /// Ack every transmission, received or not.
    AlwaysClaim,
    /// Flip the honest ack independently with probability p.
    FlipWithProb(f64),
    /// Deny everything during key generation, honest afterwards.
    DenyKeyPhase,
    /// Deny receipt of side-information packets (encrypted packets intended
    /// for the other receiver), honest on everything else.
    GreedyDenySideInfo,
}

/// The causal view a strategy may read when acking the current round.
#[derive(Debug, Clone, Copy)]
pub struct AckView<'a> {
    /// This receiver's index.
    pub me: usize,
    /// Whether this receiver got the current transmission.
    pub received: bool,
    /// Phase tag of the current transmission.
    pub phase: Phase,
    /// This receiver's receptions in previous rounds.
    pub own_receptions: &'a [bool],
    /// This receiver's acks in previous rounds.
    pub own_acks: &'a [bool],
    /// All receivers' ack masks through the previous round.
    pub others_acks: &'a [u32],
}

/// The ack bit for the current round; `coin` is a fresh uniform draw from the
/// receiver's private randomness.
pub fn apply_strategy(strategy: &AckStrategy, view: &AckView<'_>, coin: f64) -> bool {
    match strategy {
        AckStrategy::Honest => view.received,
        AckStrategy::AlwaysDeny => false,
        AckStrategy::AlwaysClaim => true,
        AckStrategy::FlipWithProb(p) => {
            if coin < *p {
                !view.received
            } else {
                view.received
            }
        }
        AckStrategy::DenyKeyPhase => match view.phase {
            Phase::KeyGen | Phase::KeyGenSeg(_) => false,
            _ => view.received,
        },
        AckStrategy::GreedyDenySideInfo => match view.phase {
            Phase::Encrypted(j) | Phase::Arq(j) if j != view.me => false,
            _ => view.received,
        },
    }
}

impl AckStrategy {
    pub fn is_honest(&self) -> bool {
        matches!(self, AckStrategy::Honest)
    }

    /// The six-strategy adversary battery used by the harness.
    pub fn battery() -> Vec<AckStrategy> {
        vec![
            AckStrategy::Honest,
            AckStrategy::AlwaysDeny,
            AckStrategy::AlwaysClaim,
            AckStrategy::FlipWithProb(0.25),
            AckStrategy::DenyKeyPhase,
            AckStrategy::GreedyDenySideInfo,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            AckStrategy::Honest => "honest".into(),
            AckStrategy::AlwaysDeny => "always-deny".into(),
            AckStrategy::AlwaysClaim => "always-claim".into(),
            AckStrategy::FlipWithProb(p) => format!("flip-{p}"),
            AckStrategy::DenyKeyPhase => "deny-key-phase".into(),
            AckStrategy::GreedyDenySideInfo => "greedy-deny-side-info".into(),
        }
    }

    pub fn parse(s: &str) -> Result<AckStrategy, String> {
        match s {
            "honest" => Ok(AckStrategy::Honest),
            "always-deny" => Ok(AckStrategy::AlwaysDeny),
            "always-claim" => Ok(AckStrategy::AlwaysClaim),
            "deny-key-phase" => Ok(AckStrategy::DenyKeyPhase),
            "greedy-deny-side-info" => Ok(AckStrategy::GreedyDenySideInfo),
            other => {
                if let Some(p) = other.strip_prefix("flip-") {
                    let p: f64 = p.parse().map_err(|e| format!("bad flip probability: {e}"))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(format!("flip probability {p} outside [0,1]"));
                    }
                    Ok(AckStrategy::FlipWithProb(p))
                } else {
                    Err(format!("unknown strategy {other:?}"))
                }
            }
        }
    }
}
