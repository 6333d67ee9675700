//! Arithmetic over GF(2^m) and exact linear algebra on top of it.
//!
//! Everything here is exact: ranks and solves are computed by Gaussian
//! elimination over the field, never by floating point. The field modulus is
//! fixed per exponent and published through [`Field::modulus`], so MDS
//! matrices built from it are reproducible across runs and processes.

use thiserror::Error;

/// A field element, stored as its polynomial bit representation in `[0, q)`.
pub type FieldElem = u16;

/// Irreducible moduli for GF(2^m), m = 1..=16. The m = 8 entry is
/// x^8 + x^4 + x^3 + x + 1 (0x11B).
const MODULI: [u32; 16] = [
    0b11, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011, 0b10001001, 0x11B, 0x211, 0x409, 0x805,
    0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("field exponent {0} out of supported range 1..=16")]
    BadExponent(u32),
    #[error("code length {n} needs q > {n}, but q = {q}; raise the field exponent")]
    FieldTooSmall { n: usize, q: usize },
    #[error("matrix dimension mismatch: {0}")]
    Shape(String),
}

/// GF(2^m) with multiplication via log/exp tables.
#[derive(Clone)]
pub struct Field {
    m: u32,
    modulus: u32,
    log: Vec<u16>,
    exp: Vec<u16>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Field(2^{}, modulus {:#x})", self.m, self.modulus)
    }
}

impl Field {
    pub fn new(m: u32) -> Result<Self, FieldError> {
        if !(1..=16).contains(&m) {
            return Err(FieldError::BadExponent(m));
        }
        let modulus = MODULI[(m - 1) as usize];
        let q = 1usize << m;
        // Find a multiplicative generator by trial; q is small enough that
        // checking the order directly is cheap.
        let mut gen = 0u16;
        for cand in 2..q as u32 {
            let mut x = 1u32;
            let mut order = 0usize;
            loop {
                x = mul_poly(x, cand, m, modulus);
                order += 1;
                if x == 1 {
                    break;
                }
            }
            if order == q - 1 {
                gen = cand as u16;
                break;
            }
        }
        let mut log = vec![0u16; q];
        let mut exp = vec![0u16; 2 * (q - 1)];
        let mut x = 1u32;
        for i in 0..q - 1 {
            exp[i] = x as u16;
            exp[i + q - 1] = x as u16;
            log[x as usize] = i as u16;
            x = mul_poly(x, gen as u32, m, modulus);
        }
        Ok(Field { m, modulus, log, exp })
    }

    /// Smallest exponent m with 2^m > max_len; used by protocol setup to
    /// guarantee MDS constructions of length max_len exist.
    pub fn exponent_for(default_m: u32, max_len: usize) -> u32 {
        let mut m = default_m.max(1);
        while (1usize << m) <= max_len {
            m += 1;
        }
        m
    }

    pub fn exponent(&self) -> u32 {
        self.m
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn q(&self) -> usize {
        1usize << self.m
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn inv(&self, a: FieldElem) -> FieldElem {
        debug_assert!(a != 0, "inverse of zero");
        let q1 = self.q() - 1;
        self.exp[q1 - self.log[a as usize] as usize]
    }

    #[inline]
    pub fn div(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a == 0 {
            0
        } else {
            self.mul(a, self.inv(b))
        }
    }

    /// `dst[i] ^= c * src[i]`, the elimination inner loop.
    pub fn axpy(&self, dst: &mut [FieldElem], c: FieldElem, src: &[FieldElem]) {
        if c == 0 {
            return;
        }
        let lc = self.log[c as usize] as usize;
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d ^= self.exp[lc + self.log[s as usize] as usize];
            }
        }
    }
}

fn mul_poly(a: u32, b: u32, m: u32, modulus: u32) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << m) != 0 {
            a ^= modulus;
        }
    }
    acc
}

/// A packet: L field symbols, operated on component-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet(pub Vec<FieldElem>);

impl Packet {
    pub fn zero(len: usize) -> Self {
        Packet(vec![0; len])
    }

    pub fn xor(&self, other: &Packet) -> Packet {
        assert_eq!(self.0.len(), other.0.len(), "packet length mismatch");
        Packet(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

/// Dense matrix over GF(2^m), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<FieldElem>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<FieldElem>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        assert!(rows.iter().all(|v| v.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElem) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, FieldError> {
        if self.rows != other.rows {
            return Err(FieldError::Shape(format!(
                "hstack: {} rows vs {} rows",
                self.rows, other.rows
            )));
        }
        let mut m = Matrix::zero(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m.set(r, c, self.get(r, c));
            }
            for c in 0..other.cols {
                m.set(r, self.cols + c, other.get(r, c));
            }
        }
        Ok(m)
    }

    /// Keep only the named columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zero(self.rows, cols.len());
        for r in 0..self.rows {
            for (i, &c) in cols.iter().enumerate() {
                m.set(r, i, self.get(r, c));
            }
        }
        m
    }

    /// `self * other` over the field.
    pub fn matmul(&self, field: &Field, other: &Matrix) -> Result<Matrix, FieldError> {
        if self.cols != other.rows {
            return Err(FieldError::Shape(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zero(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                field.axpy(dst, a, other.row(k));
            }
        }
        Ok(out)
    }

    /// Rank by in-place elimination on a working copy.
    pub fn rank(&self, field: &Field) -> usize {
        let mut w = self.clone();
        w.echelonize(field).0
    }

    /// Reduce to row echelon form; returns (rank, pivot column per pivot row).
    fn echelonize(&mut self, field: &Field) -> (usize, Vec<usize>) {
        let mut pivots = Vec::new();
        let mut prow = 0;
        for col in 0..self.cols {
            if prow == self.rows {
                break;
            }
            let Some(sel) = (prow..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            if sel != prow {
                for c in 0..self.cols {
                    let a = self.get(prow, c);
                    let b = self.get(sel, c);
                    self.set(prow, c, b);
                    self.set(sel, c, a);
                }
            }
            let inv = field.inv(self.get(prow, col));
            for c in col..self.cols {
                let v = field.mul(self.get(prow, c), inv);
                self.set(prow, c, v);
            }
            for r in 0..self.rows {
                if r != prow {
                    let f = self.get(r, col);
                    if f != 0 {
                        let (head, tail) = self.data.split_at_mut(r * self.cols);
                        let (prow_slice, row_slice) = if r > prow {
                            let p = &head[prow * self.cols..(prow + 1) * self.cols];
                            (p, &mut tail[..self.cols])
                        } else {
                            let (a, b) = tail.split_at_mut((prow - r) * self.cols);
                            (&b[..self.cols], &mut a[..self.cols])
                        };
                        field.axpy(row_slice, f, prow_slice);
                    }
                }
            }
            pivots.push(col);
            prow += 1;
        }
        (prow, pivots)
    }

    /// True iff every column of `a` lies in the column space of `self`;
    /// equivalently rank([self | a]) = rank(self).
    pub fn colspace_contains(&self, field: &Field, a: &Matrix) -> Result<bool, FieldError> {
        let joint = self.hstack(a)?;
        Ok(joint.rank(field) == self.rank(field))
    }

    /// Some solution x of `self * x = y`, if consistent.
    pub fn solve(&self, field: &Field, y: &[FieldElem]) -> Option<Vec<FieldElem>> {
        assert_eq!(self.rows, y.len(), "rhs length mismatch");
        let mut aug = Matrix::zero(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c));
            }
            aug.set(r, self.cols, y[r]);
        }
        let (rank, pivots) = aug.echelonize(field);
        // Inconsistent iff a pivot landed in the augmented column.
        if pivots.iter().any(|&c| c == self.cols) {
            return None;
        }
        let mut x = vec![0; self.cols];
        for (prow, &pcol) in pivots.iter().enumerate().take(rank) {
            x[pcol] = aug.get(prow, self.cols);
        }
        Some(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdsKind {
    Generator,
    ParityCheck,
}

/// A generator or parity-check matrix of an MDS code, with its parameters.
#[derive(Debug, Clone)]
pub struct MdsMatrix {
    pub matrix: Matrix,
    pub code_length: usize,
    pub code_dim: usize,
    pub kind: MdsKind,
}

/// k x n Vandermonde rows at distinct nonzero evaluation points 1..=n.
fn vandermonde(field: &Field, k: usize, n: usize) -> Result<Matrix, FieldError> {
    if n >= field.q() {
        return Err(FieldError::FieldTooSmall { n, q: field.q() });
    }
    let mut m = Matrix::zero(k, n);
    for c in 0..n {
        let point = (c + 1) as FieldElem;
        let mut p = 1;
        for r in 0..k {
            m.set(r, c, p);
            p = field.mul(p, point);
        }
    }
    Ok(m)
}

/// Generator of an (n, k) MDS code: every k x k column submatrix invertible.
pub fn mds_generator(field: &Field, n: usize, k: usize) -> Result<MdsMatrix, FieldError> {
    assert!(k <= n, "code dimension exceeds length");
    let matrix = if k == n {
        Matrix::identity(n)
    } else if k == 1 {
        // All-ones works over any field, including ones too small for
        // Vandermonde points.
        Matrix::from_rows(vec![vec![1; n]])
    } else {
        vandermonde(field, k, n)?
    };
    Ok(MdsMatrix { matrix, code_length: n, code_dim: k, kind: MdsKind::Generator })
}

/// Parity check of an (n, k) MDS code: (n-k) x n, every maximal square
/// submatrix invertible. Built as a generator of the (n, n-k) dual, which is
/// itself MDS.
pub fn mds_parity_check(field: &Field, n: usize, k: usize) -> Result<MdsMatrix, FieldError> {
    let g = mds_generator(field, n, n - k)?;
    Ok(MdsMatrix { matrix: g.matrix, code_length: n, code_dim: k, kind: MdsKind::ParityCheck })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(m: u32) -> Field {
        Field::new(m).unwrap()
    }

    #[test]
    fn mul_identity_and_annihilator() {
        let f = gf(8);
        for a in 0..256u16 {
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.mul(a, 0), 0);
        }
    }

    #[test]
    fn aes_modulus_reduction() {
        // x * x^7 = x^8 reduces to x^4+x^3+x+1 under 0x11B.
        let f = gf(8);
        assert_eq!(f.modulus(), 0x11B);
        assert_eq!(f.mul(0x02, 0x80), 0x1B);
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for m in 1..=4 {
            let f = gf(m);
            let q = f.q() as u16;
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    assert_eq!(f.add(a, a), 0);
                    for c in 0..q {
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
                    }
                }
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a)), 1);
                }
            }
        }
    }

    #[test]
    fn field_axioms_randomized_gf256() {
        use rand::{Rng, SeedableRng};
        let f = gf(8);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..5000 {
            let (a, b, c) = (rng.gen::<u8>() as u16, rng.gen::<u8>() as u16, rng.gen::<u8>() as u16);
            assert_eq!(f.mul(a, b), f.mul(b, a));
            assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
            if a != 0 {
                assert_eq!(f.div(f.mul(a, b), a), b);
            }
        }
    }

    #[test]
    fn rank_examples() {
        let f = gf(8);
        assert_eq!(Matrix::identity(3).rank(&f), 3);
        assert_eq!(Matrix::zero(4, 2).rank(&f), 0);
        // Two identical nonzero columns.
        let m = Matrix::from_rows(vec![vec![3, 3], vec![5, 5]]);
        assert_eq!(m.rank(&f), 1);
    }

    #[test]
    fn rank_transpose_randomized() {
        use rand::{Rng, SeedableRng};
        let f = gf(8);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rows = rng.gen_range(1..8);
            let cols = rng.gen_range(1..8);
            let mut m = Matrix::zero(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen::<u8>() as u16);
                }
            }
            assert_eq!(m.rank(&f), m.transpose().rank(&f));
        }
    }

    #[test]
    fn colspace_examples() {
        let f = gf(8);
        let b = Matrix::from_rows(vec![vec![1, 2], vec![0, 1]]);
        let zero = Matrix::zero(2, 2);
        assert!(b.colspace_contains(&f, &zero).unwrap());
        let a = Matrix::from_rows(vec![vec![1], vec![0]]);
        assert!(!zero.colspace_contains(&f, &a).unwrap());
        // Scalar multiple of a single column.
        let v = Matrix::from_rows(vec![vec![3], vec![7]]);
        let two_v = Matrix::from_rows(vec![vec![f.mul(2, 3)], vec![f.mul(2, 7)]]);
        assert!(v.colspace_contains(&f, &two_v).unwrap());
        // Row-count mismatch is an error.
        let short = Matrix::zero(1, 1);
        assert!(b.hstack(&short).is_err());
    }

    #[test]
    fn colspace_matches_bruteforce_gf2() {
        use rand::{Rng, SeedableRng};
        let f = gf(1);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rows = rng.gen_range(1..=8usize);
            let bc = rng.gen_range(1..=4usize);
            let ac = rng.gen_range(1..=3usize);
            let mut b = Matrix::zero(rows, bc);
            let mut a = Matrix::zero(rows, ac);
            for r in 0..rows {
                for c in 0..bc {
                    b.set(r, c, rng.gen_range(0..2));
                }
                for c in 0..ac {
                    a.set(r, c, rng.gen_range(0..2));
                }
            }
            // Enumerate the span of B's columns directly.
            let mut span = std::collections::HashSet::new();
            for mask in 0..(1u32 << bc) {
                let mut v = vec![0u16; rows];
                for c in 0..bc {
                    if mask & (1 << c) != 0 {
                        for r in 0..rows {
                            v[r] ^= b.get(r, c);
                        }
                    }
                }
                span.insert(v);
            }
            let brute = (0..ac).all(|c| span.contains(&(0..rows).map(|r| a.get(r, c)).collect::<Vec<_>>()));
            assert_eq!(b.colspace_contains(&f, &a).unwrap(), brute);
        }
    }

    fn all_submatrices_invertible(f: &Field, m: &Matrix, size: usize) -> bool {
        fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
            let mut out = Vec::new();
            let mut cur = Vec::new();
            fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if cur.len() == k {
                    out.push(cur.clone());
                    return;
                }
                for i in start..n {
                    cur.push(i);
                    rec(i + 1, n, k, cur, out);
                    cur.pop();
                }
            }
            rec(0, n, k, &mut cur, &mut out);
            out
        }
        combos(m.cols, size).into_iter().all(|cols| m.select_columns(&cols).rank(f) == size)
    }

    #[test]
    fn mds_generator_examples() {
        let f = gf(8);
        let g = mds_generator(&f, 4, 4).unwrap();
        assert_eq!(g.matrix.rank(&f), 4);
        let g = mds_generator(&f, 7, 3).unwrap();
        assert!(all_submatrices_invertible(&f, &g.matrix, 3));
        assert!(mds_generator(&gf(2), 5, 2).is_err());
    }

    #[test]
    fn mds_parity_check_examples() {
        // Single parity over GF(2): [1 1 1].
        let f2 = gf(1);
        let h = mds_parity_check(&f2, 3, 2).unwrap();
        assert_eq!(h.matrix, Matrix::from_rows(vec![vec![1, 1, 1]]));
        // Degenerate k = 0: full-rank n x n.
        let f = gf(8);
        let h = mds_parity_check(&f, 5, 0).unwrap();
        assert_eq!(h.matrix.rank(&f), 5);
        let h = mds_parity_check(&f, 6, 4).unwrap();
        assert!(all_submatrices_invertible(&f, &h.matrix, 2));
    }

    #[test]
    fn mds_exhaustive_small_lengths() {
        // Every k-subset of generator columns and (n-k)-subset of parity
        // columns has full rank, for all n <= 8 over GF(2^4).
        let f = gf(4);
        for n in 1..=8usize {
            for k in 0..=n {
                if k >= 1 {
                    let g = mds_generator(&f, n, k).unwrap();
                    assert!(all_submatrices_invertible(&f, &g.matrix, k), "gen n={n} k={k}");
                }
                let h = mds_parity_check(&f, n, k).unwrap();
                assert!(all_submatrices_invertible(&f, &h.matrix, n - k), "pc n={n} k={k}");
            }
        }
    }

    #[test]
    fn solve_examples() {
        let f = gf(8);
        let y = vec![5, 9, 12];
        assert_eq!(Matrix::identity(3).solve(&f, &y), Some(y.clone()));
        assert_eq!(Matrix::zero(2, 2).solve(&f, &[1, 0]), None);
        // Invertible 2x2 over GF(2^2), verified by re-multiplication.
        let f3 = gf(2);
        let m = Matrix::from_rows(vec![vec![1, 2], vec![2, 1]]);
        let y = vec![3, 1];
        let x = m.solve(&f3, &y).unwrap();
        for r in 0..2 {
            let mut acc = 0;
            for c in 0..2 {
                acc ^= f3.mul(m.get(r, c), x[c]);
            }
            assert_eq!(acc, y[r]);
        }
    }
}
