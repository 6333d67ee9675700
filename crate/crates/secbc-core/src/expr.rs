//! Symbolic linear expressions over the run's packet basis.
//!
//! Every transmitted packet is a linear combination of message packets
//! W_{j,i} and source-randomness packets drawn by the sender. Tracking the
//! combination symbolically is what makes the secrecy audit exact: leakage
//! becomes a rank statement about coefficient vectors instead of an estimate.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::field::{Field, FieldElem, Matrix};

/// A basis packet: either a message packet or a fresh sender-randomness packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Basis {
    /// Message packet W_{receiver, index} (both zero-based internally).
    Msg { receiver: usize, index: usize },
    /// Sender randomness packet Theta_{A, index}.
    Rand { index: usize },
}

/// Sparse linear combination of basis packets with GF(2^m) coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LinExpr {
    terms: BTreeMap<Basis, FieldElem>,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn unit(b: Basis) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(b, 1);
        LinExpr { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, b: &Basis) -> FieldElem {
        self.terms.get(b).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Basis, &FieldElem)> {
        self.terms.iter()
    }

    /// self += c * other.
    pub fn add_scaled(&mut self, field: &Field, other: &LinExpr, c: FieldElem) {
        if c == 0 {
            return;
        }
        for (b, &v) in &other.terms {
            let add = field.mul(c, v);
            let entry = self.terms.entry(*b).or_insert(0);
            *entry ^= add;
            if *entry == 0 {
                self.terms.remove(b);
            }
        }
    }

    pub fn xor(&self, field: &Field, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(field, other, 1);
        out
    }

    pub(crate) fn from_sorted_terms(terms: Vec<(Basis, FieldElem)>) -> LinExpr {
        LinExpr { terms: terms.into_iter().collect() }
    }

    /// Stable text form: `coeff*basis` terms joined by `+`, coefficients in
    /// hex. Used by the transcript serialization.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (b, v)) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push('+');
            }
            match b {
                Basis::Msg { receiver, index } => {
                    let _ = write!(out, "{:x}*W{}.{}", v, receiver + 1, index + 1);
                }
                Basis::Rand { index } => {
                    let _ = write!(out, "{:x}*R{}", v, index + 1);
                }
            }
        }
        out
    }

    /// Parse the `to_text` form back.
    pub fn from_text(s: &str) -> Result<LinExpr, String> {
        let s = s.trim();
        if s == "0" {
            return Ok(LinExpr::zero());
        }
        let mut terms = BTreeMap::new();
        for part in s.split('+') {
            let (coeff, basis) = part
                .split_once('*')
                .ok_or_else(|| format!("bad term {part:?}"))?;
            let v = FieldElem::from_str_radix(coeff, 16).map_err(|e| format!("bad coeff {coeff:?}: {e}"))?;
            let b = if let Some(rest) = basis.strip_prefix('W') {
                let (r, i) = rest.split_once('.').ok_or_else(|| format!("bad basis {basis:?}"))?;
                Basis::Msg {
                    receiver: r.parse::<usize>().map_err(|e| e.to_string())? - 1,
                    index: i.parse::<usize>().map_err(|e| e.to_string())? - 1,
                }
            } else if let Some(i) = basis.strip_prefix('R') {
                Basis::Rand { index: i.parse::<usize>().map_err(|e| e.to_string())? - 1 }
            } else {
                return Err(format!("bad basis {basis:?}"));
            };
            if v != 0 {
                terms.insert(b, v);
            }
        }
        Ok(LinExpr { terms })
    }
}

/// outputs[r] = sum_j coeffs[r][j] * inputs[j], computed over a flat
/// coefficient array on the union basis instead of term-by-term map updates.
/// This is the hot path of key expansion, where inputs share a large basis
/// and the naive nested `add_scaled` would do one map operation per term.
pub fn combine_linear(field: &Field, coeffs: &Matrix, inputs: &[LinExpr]) -> Vec<LinExpr> {
    assert_eq!(coeffs.cols, inputs.len(), "coefficient shape mismatch");
    let mut basis: Vec<Basis> = inputs
        .iter()
        .flat_map(|e| e.terms.keys().copied())
        .collect();
    basis.sort_unstable();
    basis.dedup();
    let pos = |b: &Basis| basis.binary_search(b).unwrap();
    // inputs as sparse rows over the union basis
    let sparse: Vec<Vec<(usize, FieldElem)>> = inputs
        .iter()
        .map(|e| e.terms.iter().map(|(b, &v)| (pos(b), v)).collect())
        .collect();
    let nnz: usize = sparse.iter().map(|r| r.len()).sum();
    // Dense rows win once inputs fill a good share of the basis (key
    // expansion); unit-like inputs stay on the sparse path.
    let dense: Option<Vec<Vec<FieldElem>>> = (nnz * 4 > basis.len() * inputs.len().max(1))
        .then(|| {
            sparse
                .iter()
                .map(|row| {
                    let mut d = vec![0u16; basis.len()];
                    for &(p, v) in row {
                        d[p] = v;
                    }
                    d
                })
                .collect()
        });
    let mut out = Vec::with_capacity(coeffs.rows);
    let mut acc = vec![0u16; basis.len()];
    for r in 0..coeffs.rows {
        acc.iter_mut().for_each(|v| *v = 0);
        for j in 0..inputs.len() {
            let c = coeffs.get(r, j);
            if c == 0 {
                continue;
            }
            match &dense {
                Some(rows) => field.axpy(&mut acc, c, &rows[j]),
                None => {
                    for &(p, v) in &sparse[j] {
                        acc[p] ^= field.mul(c, v);
                    }
                }
            }
        }
        let terms: Vec<(Basis, FieldElem)> = acc
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(p, &v)| (basis[p], v))
            .collect();
        out.push(LinExpr::from_sorted_terms(terms));
    }
    out
}
