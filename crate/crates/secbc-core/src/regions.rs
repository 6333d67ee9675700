//! Closed-form rate-region predicates and boundary tracing.
//!
//! Four nested regions for K receivers with erasure probabilities delta_j:
//! the non-secure broadcast capacity region, the secret-message region for
//! honest-but-curious receivers (non-secure term plus a key-generation
//! overhead term), the K = 2 region secure against a lying receiver (equal
//! to the honest one), and the achievable region under distribution
//! independent security (both overhead terms in each inequality). All are
//! rational formulas, so membership is decided in double precision with a
//! 1e-12 tolerance.

use crate::channel::{joint_stats, ErasureModel, JointStats};

pub const MEMBERSHIP_TOL: f64 = 1e-12;
pub const BISECTION_TOL: f64 = 1e-9;

/// Target rates in message packets per transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTuple(pub Vec<f64>);

impl RateTuple {
    pub fn new(rates: Vec<f64>) -> Result<Self, RegionError> {
        if let Some(&r) = rates.iter().find(|&&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(RegionError::NegativeRate { rate: r });
        }
        Ok(RateTuple(rates))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("rate {rate} is negative or non-finite")]
    NegativeRate { rate: f64 },
    #[error("erasure probability {delta} outside the valid range for this region")]
    DegenerateDelta { delta: f64 },
    #[error("rate and erasure dimensions differ: {rates} vs {deltas}")]
    DimensionMismatch { rates: usize, deltas: usize },
    #[error("receiver {receiver} has no key source (p_j = 0) but positive rate")]
    NoKeySource { receiver: usize },
    #[error("permutation search over {k} receivers exceeds the K <= 8 guard")]
    TooManyReceivers { k: usize },
    #[error("channel model does not expose erasure statistics")]
    NoStatistics,
}

/// Whether the formula is a capacity characterization at these parameters or
/// only a one-sided bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Exact,
    OuterBoundOnly,
    InnerBoundOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionVerdict {
    pub inside: bool,
    /// LHS of the binding inequality.
    pub value: f64,
    /// The maximizing receiver order (or, for the two-inequality K = 2
    /// regions, which receiver's inequality binds first).
    pub tight_permutation: Vec<usize>,
    pub validity: Validity,
}

impl RegionVerdict {
    fn from_value(value: f64, tight: Vec<usize>, validity: Validity) -> Self {
        RegionVerdict {
            inside: value <= 1.0 + MEMBERSHIP_TOL,
            value,
            tight_permutation: tight,
            validity,
        }
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

fn check_dims(r: &RateTuple, deltas: &[f64]) -> Result<(), RegionError> {
    if r.k() != deltas.len() {
        return Err(RegionError::DimensionMismatch { rates: r.k(), deltas: deltas.len() });
    }
    if r.k() > 8 {
        return Err(RegionError::TooManyReceivers { k: r.k() });
    }
    for (&rate, &d) in r.0.iter().zip(deltas) {
        if !(0.0..=1.0).contains(&d) {
            return Err(RegionError::DegenerateDelta { delta: d });
        }
        if d >= 1.0 && rate > 0.0 {
            return Err(RegionError::DegenerateDelta { delta: d });
        }
    }
    Ok(())
}

/// Permutation term of the broadcast capacity region: the worst receiver
/// order of sum_i R_{pi_i} / (1 - prod_{k<=i} delta_{pi_k}).
fn permutation_max(
    rates: &[f64],
    erased_prefix: impl Fn(&[usize]) -> f64,
) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for p in permutations(rates.len()) {
        let mut sum = 0.0;
        for i in 0..p.len() {
            let rate = rates[p[i]];
            if rate == 0.0 {
                continue;
            }
            sum += rate / (1.0 - erased_prefix(&p[..=i]));
        }
        if sum > best.0 {
            best = (sum, p);
        }
    }
    best
}

/// Capacity region of 1-to-K broadcast without secrecy. Exact for K <= 3,
/// symmetric channels, and one-sidedly fair tuples; an outer bound otherwise.
pub fn in_nonsecure_region(r: &RateTuple, deltas: &[f64]) -> Result<RegionVerdict, RegionError> {
    check_dims(r, deltas)?;
    let (value, tight) =
        permutation_max(&r.0, |prefix| prefix.iter().map(|&j| deltas[j]).product());
    Ok(RegionVerdict::from_value(value, tight, nonsecure_validity(r, deltas)))
}

fn symmetric(deltas: &[f64]) -> bool {
    deltas.windows(2).all(|w| (w[0] - w[1]).abs() < MEMBERSHIP_TOL)
}

fn nonsecure_validity(r: &RateTuple, deltas: &[f64]) -> Validity {
    if r.k() <= 3 || symmetric(deltas) || is_one_sidedly_fair(r, deltas) {
        Validity::Exact
    } else {
        Validity::OuterBoundOnly
    }
}

/// Key-generation overhead of receiver j in the honest secret-message
/// region: R_j (1 - d_rest) / ((1 - d_j) d_rest (1 - d_all)) with d_rest the
/// probability that all other receivers erase.
fn key_overhead(rate: f64, d_j: f64, d_rest: f64, d_all: f64, j: usize) -> Result<f64, RegionError> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    if d_rest <= 0.0 || d_j >= 1.0 {
        // No slot where only receiver j listens: no key can be generated.
        return Err(RegionError::NoKeySource { receiver: j });
    }
    Ok(rate * (1.0 - d_rest) / ((1.0 - d_j) * d_rest * (1.0 - d_all)))
}

/// Secret-message region for honest-but-curious receivers: key overhead of
/// the worst receiver plus the non-secure permutation term.
pub fn in_secure_region(r: &RateTuple, deltas: &[f64]) -> Result<RegionVerdict, RegionError> {
    check_dims(r, deltas)?;
    let d_all: f64 = deltas.iter().product();
    let mut overhead = 0.0f64;
    for j in 0..r.k() {
        let d_rest: f64 =
            deltas.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &d)| d).product();
        overhead = overhead.max(key_overhead(r.0[j], deltas[j], d_rest, d_all, j)?);
    }
    let (perm_value, tight) =
        permutation_max(&r.0, |prefix| prefix.iter().map(|&j| deltas[j]).product());
    Ok(RegionVerdict::from_value(
        overhead + perm_value,
        tight,
        nonsecure_validity(r, deltas),
    ))
}

fn check_open_unit(d: f64) -> Result<(), RegionError> {
    if !(d > 0.0 && d < 1.0) {
        return Err(RegionError::DegenerateDelta { delta: d });
    }
    Ok(())
}

/// K = 2 region secure against a lying receiver (with side information);
/// coincides with the honest region.
pub fn in_dishonest_region(
    r_1: f64,
    r_2: f64,
    d_1: f64,
    d_2: f64,
) -> Result<RegionVerdict, RegionError> {
    check_open_unit(d_1)?;
    check_open_unit(d_2)?;
    let d12 = d_1 * d_2;
    let lhs1 =
        r_1 * (1.0 - d_2) / (d_2 * (1.0 - d_1) * (1.0 - d12)) + r_1 / (1.0 - d_1) + r_2 / (1.0 - d12);
    let lhs2 =
        r_2 * (1.0 - d_1) / (d_1 * (1.0 - d_2) * (1.0 - d12)) + r_1 / (1.0 - d12) + r_2 / (1.0 - d_2);
    let tight = if lhs1 >= lhs2 { vec![0, 1] } else { vec![1, 0] };
    Ok(RegionVerdict::from_value(lhs1.max(lhs2), tight, Validity::Exact))
}

/// K = 2 region achievable with distribution independent security: both key
/// overhead terms charge every inequality. Inner bound only; whether the gap
/// to the lying-receiver region is fundamental is open.
pub fn in_dis_region(
    r_1: f64,
    r_2: f64,
    d_1: f64,
    d_2: f64,
) -> Result<RegionVerdict, RegionError> {
    check_open_unit(d_1)?;
    check_open_unit(d_2)?;
    let d12 = d_1 * d_2;
    let overhead = r_1 * (1.0 - d_2) / (d_2 * (1.0 - d_1) * (1.0 - d12))
        + r_2 * (1.0 - d_1) / (d_1 * (1.0 - d_2) * (1.0 - d12));
    let lhs1 = overhead + r_1 / (1.0 - d_1) + r_2 / (1.0 - d12);
    let lhs2 = overhead + r_1 / (1.0 - d12) + r_2 / (1.0 - d_2);
    let tight = if lhs1 >= lhs2 { vec![0, 1] } else { vec![1, 0] };
    Ok(RegionVerdict::from_value(lhs1.max(lhs2), tight, Validity::InnerBoundOnly))
}

/// Secret-message capacity against a passive eavesdropper with erasure
/// probability `delta_e`, the legitimate receiver erasing with `delta`.
pub fn eavesdropper_capacity(delta: f64, delta_e: f64) -> f64 {
    if delta >= 1.0 {
        return 0.0;
    }
    (1.0 - delta) * delta_e * (1.0 - delta * delta_e) / (1.0 - delta * delta_e * delta_e)
}

/// Outer bound for honest-but-curious receivers under arbitrarily correlated
/// erasures, in terms of the joint erasure probabilities delta_N and the
/// only-j reception probabilities p_j.
pub fn correlated_outer_bound(
    r: &RateTuple,
    model: &ErasureModel,
) -> Result<RegionVerdict, RegionError> {
    let stats: JointStats = joint_stats(model).map_err(|_| RegionError::NoStatistics)?;
    let k = stats.k;
    if r.k() != k {
        return Err(RegionError::DimensionMismatch { rates: r.k(), deltas: k });
    }
    if k > 8 {
        return Err(RegionError::TooManyReceivers { k });
    }
    let full_mask = (1u32 << k) - 1;
    let d_all = stats.delta_of(full_mask);
    let mut overhead = 0.0f64;
    for j in 0..k {
        if r.0[j] == 0.0 {
            continue;
        }
        let p_j = stats.only[j];
        if p_j <= 0.0 {
            return Err(RegionError::NoKeySource { receiver: j });
        }
        let d_rest = stats.delta_of(full_mask & !(1 << j));
        overhead = overhead.max(r.0[j] * (1.0 - d_rest) / (p_j * (1.0 - d_all)));
    }
    let (perm_value, tight) = permutation_max(&r.0, |prefix| {
        let mask = prefix.iter().fold(0u32, |m, &j| m | (1 << j));
        stats.delta_of(mask)
    });
    Ok(RegionVerdict::from_value(overhead + perm_value, tight, Validity::OuterBoundOnly))
}

/// One-sidedly fair: whenever delta_i >= delta_j, also R_i delta_i >= R_j delta_j.
pub fn is_one_sidedly_fair(r: &RateTuple, deltas: &[f64]) -> bool {
    for i in 0..r.k() {
        for j in 0..r.k() {
            if i != j && deltas[i] >= deltas[j] && r.0[i] * deltas[i] < r.0[j] * deltas[j] - MEMBERSHIP_TOL
            {
                return false;
            }
        }
    }
    true
}

/// For each R_1 on the grid, the largest R_2 keeping (R_1, R_2) inside, by
/// bisection to 1e-9; 0 when even R_2 = 0 is outside.
pub fn boundary_trace(
    inside: impl Fn(f64, f64) -> bool,
    r1_grid: &[f64],
) -> Vec<(f64, f64)> {
    r1_grid
        .iter()
        .map(|&r1| {
            if !inside(r1, 0.0) {
                return (r1, 0.0);
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if inside(r1, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (r1, lo)
        })
        .collect()
}

/// Which region a CLI selector or sweep refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Nonsecure,
    Secure,
    Dishonest,
    Dis,
}

impl RegionKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegionKind::Nonsecure => "nonsecure",
            RegionKind::Secure => "secure",
            RegionKind::Dishonest => "dishonest",
            RegionKind::Dis => "dis",
        }
    }

    pub fn parse(s: &str) -> Result<RegionKind, String> {
        match s {
            "nonsecure" => Ok(RegionKind::Nonsecure),
            "secure" => Ok(RegionKind::Secure),
            "dishonest" => Ok(RegionKind::Dishonest),
            "dis" => Ok(RegionKind::Dis),
            other => Err(format!("unknown region {other:?}")),
        }
    }

    /// K = 2 membership predicate for boundary tracing.
    pub fn contains(&self, r_1: f64, r_2: f64, d_1: f64, d_2: f64) -> bool {
        let rt = |r1, r2| RateTuple::new(vec![r1, r2]).unwrap();
        let v = match self {
            RegionKind::Nonsecure => in_nonsecure_region(&rt(r_1, r_2), &[d_1, d_2]),
            RegionKind::Secure => in_secure_region(&rt(r_1, r_2), &[d_1, d_2]),
            RegionKind::Dishonest => in_dishonest_region(r_1, r_2, d_1, d_2),
            RegionKind::Dis => in_dis_region(r_1, r_2, d_1, d_2),
        };
        v.map(|v| v.inside).unwrap_or(false)
    }
}
