//! The 1-to-K broadcast erasure channel with per-transmission state.
//!
//! A transmission either arrives intact at a receiver or is erased; the state
//! of round i is the subset of receivers with correct reception. Models:
//! independent per-receiver erasure probabilities, an arbitrary joint
//! distribution over receiver subsets, or a scripted state sequence for
//! deterministic trace tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::expr::LinExpr;

pub const MAX_RECEIVERS: usize = 16;

/// Subset of receivers (zero-based indices) that received a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelState {
    mask: u32,
}

impl ChannelState {
    pub fn empty() -> Self {
        ChannelState { mask: 0 }
    }

    pub fn from_mask(mask: u32) -> Self {
        ChannelState { mask }
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut mask = 0;
        for &i in indices {
            assert!(i < MAX_RECEIVERS, "receiver index out of range");
            mask |= 1 << i;
        }
        ChannelState { mask }
    }

    pub fn full(k: usize) -> Self {
        ChannelState { mask: (1u32 << k) - 1 }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, receiver: usize) -> bool {
        self.mask & (1 << receiver) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn iter(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let mask = self.mask;
        (0..k).filter(move |i| mask & (1 << i) != 0)
    }

    pub fn insert(&mut self, receiver: usize) {
        self.mask |= 1 << receiver;
    }

    /// Compact text form, e.g. `{1,2}` with one-based receiver numbers.
    pub fn to_text(&self, k: usize) -> String {
        let inside: Vec<String> = self.iter(k).map(|i| (i + 1).to_string()).collect();
        format!("{{{}}}", inside.join(","))
    }

    pub fn from_text(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let inner = s
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| format!("bad state {s:?}"))?;
        let mut out = ChannelState::empty();
        if inner.is_empty() {
            return Ok(out);
        }
        for part in inner.split(',') {
            let i: usize = part.trim().parse().map_err(|e| format!("bad state {s:?}: {e}"))?;
            if i == 0 || i > MAX_RECEIVERS {
                return Err(format!("receiver {i} out of range"));
            }
            out.insert(i - 1);
        }
        Ok(out)
    }
}

/// The acknowledged state of a round; for honest receivers it equals the true
/// state, a dishonest receiver may make them differ.
pub type AckState = ChannelState;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("erasure probability {0} outside [0,1]")]
    BadProbability(f64),
    #[error("joint distribution has {got} entries, expected 2^{k}")]
    BadJointSize { got: usize, k: usize },
    #[error("joint probabilities sum to {0}, expected 1")]
    BadJointSum(f64),
    #[error("scripted state sequence exhausted after {0} states")]
    ScriptExhausted(usize),
    #[error("operation requires a stochastic model, got a scripted one")]
    ScriptedModel,
    #[error("receiver count {0} exceeds the supported maximum {MAX_RECEIVERS}")]
    TooManyReceivers(usize),
}

/// Erasure behavior of the channel.
#[derive(Debug, Clone)]
pub enum ErasureModel {
    /// Each receiver j erases independently with probability `delta[j]`.
    Independent { delta: Vec<f64> },
    /// `prob[mask]` is the probability that exactly the receivers in `mask`
    /// receive; indexed over all 2^K subsets.
    Joint { k: usize, prob: Vec<f64> },
    /// Fixed state sequence, consumed in order.
    Scripted { k: usize, states: Vec<ChannelState> },
}

impl ErasureModel {
    pub fn independent(delta: Vec<f64>) -> Result<Self, ChannelError> {
        if delta.len() > MAX_RECEIVERS {
            return Err(ChannelError::TooManyReceivers(delta.len()));
        }
        for &d in &delta {
            if !(0.0..=1.0).contains(&d) || d.is_nan() {
                return Err(ChannelError::BadProbability(d));
            }
        }
        Ok(ErasureModel::Independent { delta })
    }

    pub fn joint(k: usize, prob: Vec<f64>) -> Result<Self, ChannelError> {
        if k > MAX_RECEIVERS {
            return Err(ChannelError::TooManyReceivers(k));
        }
        if prob.len() != 1 << k {
            return Err(ChannelError::BadJointSize { got: prob.len(), k });
        }
        for &p in &prob {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(ChannelError::BadProbability(p));
            }
        }
        let sum: f64 = prob.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ChannelError::BadJointSum(sum));
        }
        Ok(ErasureModel::Joint { k, prob })
    }

    pub fn scripted(k: usize, states: Vec<ChannelState>) -> Self {
        ErasureModel::Scripted { k, states }
    }

    pub fn receivers(&self) -> usize {
        match self {
            ErasureModel::Independent { delta } => delta.len(),
            ErasureModel::Joint { k, .. } => *k,
            ErasureModel::Scripted { k, .. } => *k,
        }
    }
}

/// Marginal statistics of a stochastic erasure model.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStats {
    pub k: usize,
    /// `erase_all[mask]` = probability that every receiver in `mask` erases.
    pub erase_all: Vec<f64>,
    /// `only[j]` = probability that exactly receiver j receives.
    pub only: Vec<f64>,
}

impl JointStats {
    /// Erasure probability jointly experienced by the receiver set `mask`.
    pub fn delta_of(&self, mask: u32) -> f64 {
        self.erase_all[mask as usize]
    }
}

/// delta_N and p_j per the model; errors on scripted models.
pub fn joint_stats(model: &ErasureModel) -> Result<JointStats, ChannelError> {
    let k = model.receivers();
    let subset_prob: Vec<f64> = match model {
        ErasureModel::Independent { delta } => {
            // Probability that exactly `mask` receives.
            (0..1u32 << k)
                .map(|mask| {
                    (0..k)
                        .map(|j| if mask & (1 << j) != 0 { 1.0 - delta[j] } else { delta[j] })
                        .product()
                })
                .collect()
        }
        ErasureModel::Joint { prob, .. } => prob.clone(),
        ErasureModel::Scripted { .. } => return Err(ChannelError::ScriptedModel),
    };
    let mut erase_all = vec![0.0; 1 << k];
    for (n, slot) in erase_all.iter_mut().enumerate() {
        // All of `n` erased: sum over received sets disjoint from n.
        *slot = subset_prob
            .iter()
            .enumerate()
            .filter(|(recv, _)| recv & n == 0)
            .map(|(_, p)| p)
            .sum();
    }
    let only = (0..k).map(|j| subset_prob[1 << j]).collect();
    Ok(JointStats { k, erase_all, only })
}

/// Draws channel states; one sampler per trial, seeded by (seed, stream).
pub struct StateSampler {
    model: ErasureModel,
    rng: ChaCha12Rng,
    script_pos: usize,
}

/// Seed plus per-trial substream id; identical pairs reproduce identical
/// state sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl StateSampler {
    pub fn new(model: ErasureModel, seed: RngSeed) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.seed);
        rng.set_stream(seed.stream);
        StateSampler { model, rng, script_pos: 0 }
    }

    pub fn receivers(&self) -> usize {
        self.model.receivers()
    }

    pub fn sample_state(&mut self) -> Result<ChannelState, ChannelError> {
        match &self.model {
            ErasureModel::Independent { delta } => {
                let mut state = ChannelState::empty();
                for (j, &d) in delta.iter().enumerate() {
                    if self.rng.gen::<f64>() >= d {
                        state.insert(j);
                    }
                }
                Ok(state)
            }
            ErasureModel::Joint { k, prob } => {
                let u: f64 = self.rng.gen();
                let mut acc = 0.0;
                for (mask, &p) in prob.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(ChannelState::from_mask(mask as u32));
                    }
                }
                Ok(ChannelState::full(*k))
            }
            ErasureModel::Scripted { states, .. } => {
                let pos = self.script_pos;
                if pos >= states.len() {
                    return Err(ChannelError::ScriptExhausted(states.len()));
                }
                self.script_pos += 1;
                Ok(states[pos])
            }
        }
    }

    /// Fresh private randomness draw for a receiver strategy.
    pub fn gen_f64(&mut self) -> f64 {
        self.rng.gen()
    }
}

/// Receiver j observes the expression exactly when j is in the state.
pub fn broadcast(expr: &LinExpr, state: ChannelState, k: usize) -> Vec<Option<LinExpr>> {
    (0..k)
        .map(|j| if state.contains(j) { Some(expr.clone()) } else { None })
        .collect()
}
