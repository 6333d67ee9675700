//! Pre-run parameter computation for the three schemes.
//!
//! All closed-form parameters are real-valued; every count is rounded up.
//! Rounding up only adds key slack and phase budget, so it cannot hurt
//! secrecy or decodability.

use thiserror::Error;

use crate::channel::{joint_stats, ChannelError, ErasureModel};

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("receiver {0} has packets to send but zero key-generation rate")]
    NoKeySource(usize),
    #[error("erasure probability {0} must lie strictly inside (0,1) for this scheme")]
    DegenerateDelta(f64),
    #[error("message spec has {got} receivers, model has {want}")]
    ReceiverMismatch { got: usize, want: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn ceil_count(x: f64) -> usize {
    debug_assert!(x > -1e-9, "negative count {x}");
    x.max(0.0).ceil() as usize
}

/// `x + x^(3/4)`, the recurring slack pattern.
fn with_slack(x: f64) -> f64 {
    x + x.powf(0.75)
}

/// Parameters of the honest-but-curious scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HonestParams {
    /// Key length k_j per receiver, in packets.
    pub key_len: Vec<usize>,
    /// Length of the key generation phase, in transmissions.
    pub n1: usize,
    /// Transmission budget for phase 2 (4x its expected length); without a
    /// cap a trial on a pathological channel draw would never terminate.
    pub phase2_cap: usize,
}

/// Key lengths and phase length for the honest scheme; valid for independent
/// models and, by substituting the only-j reception rate, for joint models.
pub fn honest_params(n_packets: &[usize], model: &ErasureModel) -> Result<HonestParams, ParamError> {
    let k = model.receivers();
    if n_packets.len() != k {
        return Err(ParamError::ReceiverMismatch { got: n_packets.len(), want: k });
    }
    let stats = joint_stats(model)?;
    let full = (1u32 << k) - 1;
    let delta_all = stats.delta_of(full);
    let mut key_len = Vec::with_capacity(k);
    for (j, &nj) in n_packets.iter().enumerate() {
        if nj == 0 {
            key_len.push(0);
            continue;
        }
        if stats.only[j] <= 0.0 {
            return Err(ParamError::NoKeySource(j));
        }
        let others_erase = stats.delta_of(full & !(1 << j));
        let base = nj as f64 * (1.0 - others_erase) / (1.0 - delta_all);
        // The asymptotic formula gives 0 for K = 1 (no other receiver ever
        // observes a ciphertext), but the very first packet still needs one
        // key packet.
        key_len.push(ceil_count(with_slack(base)).max(1));
    }
    let mut n1f: f64 = 0.0;
    for (j, &kj) in key_len.iter().enumerate() {
        if kj == 0 {
            continue;
        }
        n1f = n1f.max(with_slack(kj as f64) / stats.only[j]);
    }
    let n1 = ceil_count(n1f);

    // Expected phase 2 length: ARQ deliveries plus coded queue drains.
    let mut expected2 = 0.0;
    for (j, &nj) in n_packets.iter().enumerate() {
        if nj == 0 {
            continue;
        }
        expected2 += nj as f64 / (1.0 - delta_all);
        let miss_but_heard = stats.delta_of(1 << j) - delta_all;
        let delta_j = stats.delta_of(1 << j);
        let queue = nj as f64 * miss_but_heard / (1.0 - delta_all);
        if delta_j < 1.0 {
            expected2 += queue / (1.0 - delta_j);
        }
    }
    let phase2_cap = ceil_count(4.0 * expected2) + 4;
    Ok(HonestParams { key_len, n1, phase2_cap })
}

/// Parameters of the dishonest-user scheme (K = 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DishonestParams {
    pub k_b: usize,
    pub k_c: usize,
    pub k_1: usize,
    pub k_2: usize,
    pub n_1: usize,
    pub n_2_1: usize,
    pub n_2_2: usize,
    /// n'_{2,3}: XOR-phase budget implied by Bob's ARQ bound.
    pub n_2_3_b: usize,
    /// n''_{2,3}: XOR-phase budget implied by Calvin's ARQ bound.
    pub n_2_3_c: usize,
    /// Overall transmission cap.
    pub n: usize,
    /// Privacy-amplification precondition k_B >= 2/delta_2 (and symmetric).
    pub amplification_ok_b: bool,
    pub amplification_ok_c: bool,
}

pub fn dishonest_params(
    n1_packets: usize,
    n2_packets: usize,
    delta_1: f64,
    delta_2: f64,
) -> Result<DishonestParams, ParamError> {
    for d in [delta_1, delta_2] {
        if !(d > 0.0 && d < 1.0) {
            return Err(ParamError::DegenerateDelta(d));
        }
    }
    let d12 = delta_1 * delta_2;
    let key_pair = |n_pk: usize, delta_other: f64, delta_own_of_other: f64| {
        if n_pk == 0 {
            return (0usize, 0usize);
        }
        let kb = ceil_count(with_slack(n_pk as f64 * (1.0 - delta_other) / (1.0 - d12)));
        let k1 = ceil_count(
            kb as f64 / delta_other + (2.0 * kb as f64 / delta_other).powf(0.75) / delta_other,
        );
        let _ = delta_own_of_other;
        (kb, k1)
    };
    let (k_b, k_1) = key_pair(n1_packets, delta_2, delta_1);
    let (k_c, k_2) = key_pair(n2_packets, delta_1, delta_2);
    let n_1 = ceil_count(
        with_slack(k_1 as f64 / (1.0 - delta_1)).max(with_slack(k_2 as f64 / (1.0 - delta_2))),
    );
    let n_2_1 = if n1_packets == 0 { 0 } else { ceil_count(with_slack(n1_packets as f64 / (1.0 - d12))) };
    let n_2_2 = if n2_packets == 0 { 0 } else { ceil_count(with_slack(n2_packets as f64 / (1.0 - d12))) };
    let n_2_3_b = if n1_packets == 0 {
        0
    } else {
        ceil_count((with_slack(n1_packets as f64 / (1.0 - delta_1)) - n_2_1 as f64).max(0.0))
    };
    let n_2_3_c = if n2_packets == 0 {
        0
    } else {
        ceil_count((with_slack(n2_packets as f64 / (1.0 - delta_2)) - n_2_2 as f64).max(0.0))
    };
    let n = n_1 + n_2_1 + n_2_2 + n_2_3_b.max(n_2_3_c);
    Ok(DishonestParams {
        k_b,
        k_c,
        k_1,
        k_2,
        n_1,
        n_2_1,
        n_2_2,
        n_2_3_b,
        n_2_3_c,
        n,
        amplification_ok_b: n1_packets == 0 || k_b as f64 >= 2.0 / delta_2,
        amplification_ok_c: n2_packets == 0 || k_c as f64 >= 2.0 / delta_1,
    })
}

/// Parameters of the distribution-independent scheme: the dishonest-scheme
/// set plus two disjoint key-generation segment lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisParams {
    pub base: DishonestParams,
    pub n_1_1: usize,
    pub n_1_2: usize,
}

pub fn dis_params(
    n1_packets: usize,
    n2_packets: usize,
    delta_1: f64,
    delta_2: f64,
) -> Result<DisParams, ParamError> {
    let base = dishonest_params(n1_packets, n2_packets, delta_1, delta_2)?;
    let n_1_1 =
        if base.k_1 == 0 { 0 } else { ceil_count(with_slack(base.k_1 as f64 / (1.0 - delta_1))) };
    let n_1_2 =
        if base.k_2 == 0 { 0 } else { ceil_count(with_slack(base.k_2 as f64 / (1.0 - delta_2))) };
    Ok(DisParams { base, n_1_1, n_1_2 })
}

/// Step 6/7 dishonesty thresholds: floor of the expected distinct-ack counts.
/// A floor never convicts an honest receiver sitting at expectation.
pub fn dishonesty_threshold(n_packets: usize, delta_own: f64, delta_1: f64, delta_2: f64) -> usize {
    (n_packets as f64 * (1.0 - delta_own) / (1.0 - delta_1 * delta_2)).floor() as usize
}

/// All protocol lengths for one scheme, as used by configs and reports.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeParams {
    Honest(HonestParams),
    Dishonest(DishonestParams),
    Dis(DisParams),
}
