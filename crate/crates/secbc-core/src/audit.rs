//! Exact secrecy and decodability audits of a transcript.
//!
//! Because every packet is tracked as a linear expression, "how much does an
//! observer learn about receiver j's message" is a rank statement, not an
//! estimate: with observation matrix rows [A | B] (A = coefficients on the
//! target message packets, B = everything else the observer does not know),
//! the leaked dimension is rank([A|B]) - rank(B). Each leaked dimension is
//! one field symbol's worth (m bits per packet symbol) of information; zero
//! means perfect secrecy of the target message against that observer.
//!
//! The workhorse is a one-pass sparse elimination with pivot preference for
//! non-target rows; the count of pivots forced onto target rows equals the
//! rank difference. A dense reference implementation and a brute-force
//! mutual-information oracle over GF(2) back it in the tests.

use std::collections::{HashMap, HashSet};

use crate::expr::{Basis, LinExpr};
use crate::field::{Field, FieldElem, Matrix};
use crate::protocols::{Phase, Transcript};

/// What the observer is assumed to already know.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Nothing beyond the observed packets: other receivers' messages count
    /// as unknowns that can mask leakage.
    None,
    /// All other receivers' messages are given to the observer (the stronger
    /// secrecy notion); their coefficients drop out of the observations.
    OthersKnown,
}

impl Conditioning {
    pub fn name(&self) -> &'static str {
        match self {
            Conditioning::None => "none",
            Conditioning::OthersKnown => "others-known",
        }
    }

    pub fn parse(s: &str) -> Result<Conditioning, String> {
        match s {
            "none" => Ok(Conditioning::None),
            "others-known" => Ok(Conditioning::OthersKnown),
            other => Err(format!("unknown conditioning {other:?}")),
        }
    }
}

/// Everything the packets received by the observer set reveal, in transmit
/// order with exact repeats removed.
pub fn observed_exprs(t: &Transcript, observer_mask: u32) -> Vec<LinExpr> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in &t.records {
        if rec.state.mask() & observer_mask != 0 && seen.insert(rec.expr.clone()) {
            out.push(rec.expr.clone());
        }
    }
    out
}

/// Sparse column over row ids, sorted by id, no zero coefficients.
type Col = Vec<(u32, FieldElem)>;

/// Incremental elimination over sparse columns. Each incoming column is
/// fully reduced against the stored pivots before insertion; stored columns
/// never change. A stored column can only contain pivot rows of *younger*
/// pivots, so scanning pivots oldest-first reduces an incoming column in a
/// single pass over a dense scratch vector.
///
/// Non-target rows get the small ids and are preferred as pivots, so a
/// column pivots on a target row exactly when its reduction is supported
/// entirely on target rows — a vector of the observation space invisible on
/// the non-target coordinates. The count of such pivots is precisely the
/// rank difference rank([A|B]) - rank(B).
struct SparseElim {
    cols: Vec<Col>,
    /// Pivot row of cols[i], in insertion order.
    pivot_rows: Vec<u32>,
    /// Row ids >= split are target rows.
    split: u32,
    leaked: usize,
    acc: Vec<FieldElem>,
}

impl SparseElim {
    fn new(split: u32, n_rows: usize) -> Self {
        SparseElim {
            cols: Vec::new(),
            pivot_rows: Vec::new(),
            split,
            leaked: 0,
            acc: vec![0; n_rows],
        }
    }

    fn rank(&self) -> usize {
        self.cols.len()
    }

    /// Reduce and insert; returns false for a dependent column.
    fn insert(&mut self, field: &Field, col: Col) -> bool {
        for &(r, v) in &col {
            self.acc[r as usize] = v;
        }
        // Oldest-first: subtracting pivot `age` can only reintroduce rows
        // whose pivots are younger, which the loop has not reached yet.
        for age in 0..self.cols.len() {
            let c = self.acc[self.pivot_rows[age] as usize];
            if c != 0 {
                for &(r, v) in &self.cols[age] {
                    self.acc[r as usize] ^= field.mul(c, v);
                }
            }
        }
        let mut reduced: Col = Vec::new();
        for (r, v) in self.acc.iter_mut().enumerate() {
            if *v != 0 {
                reduced.push((r as u32, *v));
                *v = 0;
            }
        }
        if reduced.is_empty() {
            return false;
        }
        // Smallest row id = preferred pivot; target rows only as a last resort.
        let (prow, pval) = reduced[0];
        if prow >= self.split {
            self.leaked += 1;
        }
        let inv = field.inv(pval);
        for e in reduced.iter_mut() {
            e.1 = field.mul(e.1, inv);
        }
        self.pivot_rows.push(prow);
        self.cols.push(reduced);
        true
    }
}

/// (rank of the observations, leaked dimension about the target message).
pub fn leaked_dimension(
    field: &Field,
    exprs: &[LinExpr],
    target: usize,
    conditioning: Conditioning,
) -> (usize, usize) {
    let keep = |b: &Basis| match b {
        Basis::Msg { receiver, .. } => {
            *receiver == target || conditioning == Conditioning::None
        }
        Basis::Rand { .. } => true,
    };
    let is_target = |b: &Basis| matches!(b, Basis::Msg { receiver, .. } if *receiver == target);
    // Assign non-target rows the low ids so sorted columns prefer them.
    let mut other: Vec<Basis> = Vec::new();
    let mut tgt: Vec<Basis> = Vec::new();
    let mut seen = HashSet::new();
    for e in exprs {
        for (b, _) in e.terms() {
            if keep(b) && seen.insert(*b) {
                if is_target(b) {
                    tgt.push(*b);
                } else {
                    other.push(*b);
                }
            }
        }
    }
    other.sort_unstable();
    tgt.sort_unstable();
    let split = other.len() as u32;
    let id_of: HashMap<Basis, u32> = other
        .iter()
        .chain(tgt.iter())
        .enumerate()
        .map(|(i, b)| (*b, i as u32))
        .collect();
    let mut elim = SparseElim::new(split, other.len() + tgt.len());
    let mut dedup = HashSet::new();
    for e in exprs {
        let mut col: Col = e
            .terms()
            .filter(|(b, _)| keep(b))
            .map(|(b, &v)| (id_of[b], v))
            .collect();
        col.sort_unstable_by_key(|e| e.0);
        if col.is_empty() || !dedup.insert(col.clone()) {
            continue;
        }
        elim.insert(field, col);
    }
    (elim.rank(), elim.leaked)
}

/// Dense observation matrices: one row per observed packet, A holding the
/// coefficients on the target message packets and B everything else unknown
/// to the observer. Reference semantics for [`leaked_dimension`]; quadratic,
/// fine for small systems and tests.
pub fn observation_matrices(
    field: &Field,
    exprs: &[LinExpr],
    target: usize,
    conditioning: Conditioning,
) -> (Matrix, Matrix) {
    let _ = field;
    let is_target = |b: &Basis| matches!(b, Basis::Msg { receiver, .. } if *receiver == target);
    let keep = |b: &Basis| match b {
        Basis::Msg { receiver, .. } => {
            *receiver == target || conditioning == Conditioning::None
        }
        Basis::Rand { .. } => true,
    };
    let mut tgt: Vec<Basis> = Vec::new();
    let mut other: Vec<Basis> = Vec::new();
    let mut seen = HashSet::new();
    for e in exprs {
        for (b, _) in e.terms() {
            if keep(b) && seen.insert(*b) {
                if is_target(b) {
                    tgt.push(*b);
                } else {
                    other.push(*b);
                }
            }
        }
    }
    tgt.sort_unstable();
    other.sort_unstable();
    let mut a = Matrix::zero(exprs.len(), tgt.len());
    let mut b = Matrix::zero(exprs.len(), other.len());
    for (r, e) in exprs.iter().enumerate() {
        for (basis, &v) in e.terms() {
            if !keep(basis) {
                continue;
            }
            if is_target(basis) {
                a.set(r, tgt.binary_search(basis).unwrap(), v);
            } else {
                b.set(r, other.binary_search(basis).unwrap(), v);
            }
        }
    }
    (a, b)
}

/// rank([A|B]) - rank(B) computed densely; the test oracle for the sparse path.
pub fn leaked_dimension_dense(
    field: &Field,
    exprs: &[LinExpr],
    target: usize,
    conditioning: Conditioning,
) -> usize {
    let (a, b) = observation_matrices(field, exprs, target, conditioning);
    let ab = a.hstack(&b).expect("same row count by construction");
    ab.rank(field) - b.rank(field)
}

/// Can `receiver` reconstruct every packet of his own message from what he
/// actually received? True exactly when the revealed dimension about his own
/// message equals its length.
pub fn check_decodable(field: &Field, t: &Transcript, receiver: usize) -> bool {
    let exprs = observed_exprs(t, 1 << receiver);
    let (_, dims) = leaked_dimension(field, &exprs, receiver, Conditioning::None);
    dims == t.n_packets[receiver]
}

/// Distinct encrypted packets of `owner` that `observer` received during the
/// encrypted-delivery phases (XOR-combined packets do not count: they are
/// not observations of a single packet).
pub fn count_observed_encrypted(t: &Transcript, observer: usize, owner: usize) -> usize {
    let mut seen = HashSet::new();
    for rec in &t.records {
        let counted = matches!(rec.phase, Phase::Encrypted(j) | Phase::Arq(j) if j == owner);
        if !counted || !rec.state.contains(observer) {
            continue;
        }
        for (b, _) in rec.expr.terms() {
            if let Basis::Msg { receiver, index } = b {
                if *receiver == owner {
                    seen.insert(*index);
                }
            }
        }
    }
    seen.len()
}

/// Exact mutual information in bits between the target basis packets and the
/// observations, by enumerating every assignment. GF(2) only and small
/// systems only — this is the oracle the rank audit is validated against.
pub fn brute_force_mi(
    field: &Field,
    exprs: &[LinExpr],
    target: usize,
    conditioning: Conditioning,
) -> f64 {
    assert_eq!(field.exponent(), 1, "brute force enumeration is GF(2) only");
    let mut basis: Vec<Basis> = exprs
        .iter()
        .flat_map(|e| e.terms().map(|(b, _)| *b))
        .collect();
    basis.sort_unstable();
    basis.dedup();
    let bits = basis.len();
    assert!(bits <= 20, "enumeration over {bits} bits is too large");
    let is_target = |b: &Basis| matches!(b, Basis::Msg { receiver, .. } if *receiver == target);
    let known: Vec<usize> = basis
        .iter()
        .enumerate()
        .filter(|(_, b)| {
            conditioning == Conditioning::OthersKnown
                && matches!(b, Basis::Msg { receiver, .. } if *receiver != target)
        })
        .map(|(i, _)| i)
        .collect();
    let target_ix: Vec<usize> =
        basis.iter().enumerate().filter(|(_, b)| is_target(b)).map(|(i, _)| i).collect();
    // Joint histogram over (observation tuple ++ known bits, target bits).
    let mut joint: HashMap<(u64, u64), u64> = HashMap::new();
    let mut obs_only: HashMap<u64, u64> = HashMap::new();
    for assign in 0u64..(1 << bits) {
        let bit = |i: usize| (assign >> i) & 1;
        let mut obs = 0u64;
        for (k, e) in exprs.iter().enumerate() {
            let mut v = 0u64;
            for (b, &c) in e.terms() {
                if c != 0 {
                    v ^= bit(basis.binary_search(b).unwrap());
                }
            }
            obs |= v << k;
        }
        for (k, &i) in known.iter().enumerate() {
            obs |= bit(i) << (exprs.len() + k);
        }
        let w: u64 = target_ix.iter().enumerate().map(|(k, &i)| bit(i) << k).sum();
        *joint.entry((obs, w)).or_default() += 1;
        *obs_only.entry(obs).or_default() += 1;
    }
    let total = (1u64 << bits) as f64;
    // I(W; O) = H(W) + H(O) - H(W,O); W is uniform.
    let h = |counts: &mut dyn Iterator<Item = u64>| -> f64 {
        counts
            .map(|c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum()
    };
    let h_w = target_ix.len() as f64;
    let h_o = h(&mut obs_only.values().copied());
    let h_wo = h(&mut joint.values().copied());
    h_w + h_o - h_wo
}

/// One audited (observer, target) pair of a transcript.
#[derive(Debug, Clone)]
pub struct LeakAudit {
    pub observer_mask: u32,
    pub target: usize,
    pub conditioning: Conditioning,
    /// Observed packets before and after dropping exact repeats.
    pub observed: usize,
    pub distinct: usize,
    pub rank: usize,
    pub leaked: usize,
    pub decodable: bool,
}

pub fn leak_audit(
    field: &Field,
    t: &Transcript,
    observer_mask: u32,
    target: usize,
    conditioning: Conditioning,
) -> LeakAudit {
    let observed =
        t.records.iter().filter(|r| r.state.mask() & observer_mask != 0).count();
    let exprs = observed_exprs(t, observer_mask);
    let (rank, leaked) = leaked_dimension(field, &exprs, target, conditioning);
    let decodable = leaked == t.n_packets[target];
    LeakAudit {
        observer_mask,
        target,
        conditioning,
        observed,
        distinct: exprs.len(),
        rank,
        leaked,
        decodable,
    }
}

pub fn csv_header() -> &'static str {
    "observer_mask,target,conditioning,observed,distinct,rank,leaked,decodable"
}

impl LeakAudit {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.observer_mask,
            self.target + 1,
            self.conditioning.name(),
            self.observed,
            self.distinct,
            self.rank,
            self.leaked,
            self.decodable
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn expr(terms: &[(Basis, u16)]) -> LinExpr {
        let f = Field::new(8).unwrap();
        let mut e = LinExpr::zero();
        for &(b, c) in terms {
            let mut u = LinExpr::zero();
            u.add_scaled(&f, &LinExpr::unit(b), c);
            e.add_scaled(&f, &u, 1);
        }
        e
    }

    fn msg(r: usize, i: usize) -> Basis {
        Basis::Msg { receiver: r, index: i }
    }

    fn rnd(i: usize) -> Basis {
        Basis::Rand { index: i }
    }

    #[test]
    fn padded_packet_without_the_pad_leaks_nothing() {
        let f = Field::new(8).unwrap();
        let obs = vec![expr(&[(msg(0, 0), 1), (rnd(0), 1)])];
        let (rank, leaked) = leaked_dimension(&f, &obs, 0, Conditioning::None);
        assert_eq!((rank, leaked), (1, 0));
    }

    #[test]
    fn pad_plus_key_leaks_one_dimension() {
        let f = Field::new(8).unwrap();
        let obs = vec![expr(&[(msg(0, 0), 1), (rnd(0), 1)]), expr(&[(rnd(0), 1)])];
        let (rank, leaked) = leaked_dimension(&f, &obs, 0, Conditioning::None);
        assert_eq!((rank, leaked), (2, 1));
    }

    #[test]
    fn other_message_masks_only_without_conditioning() {
        let f = Field::new(8).unwrap();
        let obs = vec![expr(&[(msg(0, 0), 1), (msg(1, 0), 1)])];
        let (_, none) = leaked_dimension(&f, &obs, 0, Conditioning::None);
        let (_, known) = leaked_dimension(&f, &obs, 0, Conditioning::OthersKnown);
        assert_eq!(none, 0);
        assert_eq!(known, 1);
    }

    #[test]
    fn sparse_matches_dense_on_random_systems() {
        let f = Field::new(4).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..300 {
            let n_obs = rng.gen_range(1..10);
            let exprs: Vec<LinExpr> = (0..n_obs)
                .map(|_| {
                    let mut terms = Vec::new();
                    for i in 0..3usize {
                        for r in 0..2usize {
                            if rng.gen_bool(0.4) {
                                terms.push((msg(r, i), rng.gen_range(1..16)));
                            }
                        }
                        if rng.gen_bool(0.5) {
                            terms.push((rnd(i), rng.gen_range(1..16)));
                        }
                    }
                    let mut e = LinExpr::zero();
                    for (b, c) in terms {
                        let mut u = LinExpr::zero();
                        u.add_scaled(&f, &LinExpr::unit(b), c);
                        e.add_scaled(&f, &u, 1);
                    }
                    e
                })
                .collect();
            for cond in [Conditioning::None, Conditioning::OthersKnown] {
                let (_, fast) = leaked_dimension(&f, &exprs, 0, cond);
                let dense = leaked_dimension_dense(&f, &exprs, 0, cond);
                assert_eq!(fast, dense, "exprs: {exprs:?} cond {cond:?}");
            }
        }
    }

    #[test]
    fn brute_force_mi_equals_rank_audit_over_gf2() {
        let f = Field::new(1).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n_obs = rng.gen_range(1..6);
            let exprs: Vec<LinExpr> = (0..n_obs)
                .map(|_| {
                    let mut e = LinExpr::zero();
                    for i in 0..2usize {
                        for r in 0..2usize {
                            if rng.gen_bool(0.4) {
                                e.add_scaled(&f, &LinExpr::unit(msg(r, i)), 1);
                            }
                        }
                        if rng.gen_bool(0.4) {
                            e.add_scaled(&f, &LinExpr::unit(rnd(i)), 1);
                        }
                    }
                    e
                })
                .collect();
            for cond in [Conditioning::None, Conditioning::OthersKnown] {
                let (_, leaked) = leaked_dimension(&f, &exprs, 0, cond);
                let mi = brute_force_mi(&f, &exprs, 0, cond);
                assert!(
                    (mi - leaked as f64).abs() < 1e-9,
                    "mi {mi} vs leaked {leaked} for {exprs:?} {cond:?}"
                );
            }
        }
    }

    #[test]
    fn worked_example_trace_is_secret_and_decodable() {
        use crate::channel::{ChannelState, ErasureModel, RngSeed};
        use crate::protocols::{run_honest, HonestParams, MessageSpec};
        let s = |ix: &[usize]| ChannelState::from_indices(ix);
        let model = ErasureModel::scripted(
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
        );
        let spec = MessageSpec::new(vec![1, 2]);
        let params = HonestParams { key_len: vec![1, 1], n1: 3, phase2_cap: 100 };
        let (t, _) =
            run_honest(&spec, &model, &params, RngSeed { seed: 0, stream: 0 }).unwrap();
        let f = t.field();
        assert!(check_decodable(&f, &t, 0));
        assert!(check_decodable(&f, &t, 1));
        // Each receiver learns nothing about the other's message, even given
        // his own message.
        for (observer, target) in [(1usize, 0usize), (0, 1)] {
            let exprs = observed_exprs(&t, 1 << observer);
            let (_, leaked) = leaked_dimension(&f, &exprs, target, Conditioning::OthersKnown);
            assert_eq!(leaked, 0, "observer {observer} learned about W_{target}");
        }
    }

    #[test]
    fn counts_distinct_encrypted_observations() {
        use crate::channel::{ChannelState, ErasureModel, RngSeed};
        use crate::protocols::{run_honest, HonestParams, MessageSpec};
        let s = |ix: &[usize]| ChannelState::from_indices(ix);
        let model = ErasureModel::scripted(
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
        );
        let spec = MessageSpec::new(vec![1, 2]);
        let params = HonestParams { key_len: vec![1, 1], n1: 3, phase2_cap: 100 };
        let (t, _) =
            run_honest(&spec, &model, &params, RngSeed { seed: 0, stream: 0 }).unwrap();
        // Calvin sees Bob's only encrypted packet (X_4); Bob sees one of
        // Calvin's two (the X_6 repeat).
        assert_eq!(count_observed_encrypted(&t, 1, 0), 1);
        assert_eq!(count_observed_encrypted(&t, 0, 1), 1);
    }
}
