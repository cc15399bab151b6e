//! Bit-vector and bit-matrix arithmetic over GF(2).
//!
//! Provides the linear algebra behind the mutually unbiased basis
//! construction: companion matrices of primitive polynomials, primitivity
//! validation, row-vector/matrix products and Gaussian elimination.
//!
//! Bit `i` of a [`BitVector`] corresponds to qubit `i + 1`; the leftmost bit
//! of the string form is qubit 1.

use std::fmt;

use crate::error::{Error, Result};

/// Fixed-length vector over GF(2), packed into a single machine word.
///
/// Lengths up to 64 are supported, which covers every register size this
/// crate handles.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitVector {
    bits: u64,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= 64, "BitVector length must be <= 64");
        BitVector { bits: 0, len }
    }

    /// Builds a vector from raw bits; bit 0 is the lowest-order bit of `bits`.
    pub fn from_raw(bits: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        BitVector { bits: bits & mask, len }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b & 1 == 1);
        }
        v
    }

    /// Standard basis vector e_i (1-based index `i = 1` sets bit 0).
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = BitVector::zeros(len);
        v.set(index, true);
        v
    }

    /// Parses a bitstring such as `"101"`; leftmost character is bit 0.
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > 64 {
            return Err(Error::invalid(format!("bad bitstring length {}", s.len())));
        }
        let mut v = BitVector::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                _ => return Err(Error::invalid(format!("bad bitstring character '{c}'"))),
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.bits >> i) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
    }

    pub fn raw(&self) -> u64 {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.len, other.len, "BitVector length mismatch");
        BitVector { bits: self.bits ^ other.bits, len: self.len }
    }

    /// Inner product mod 2.
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "BitVector length mismatch");
        (self.bits & other.bits).count_ones() % 2 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

/// Square matrix over GF(2), stored as one word per row.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: Vec<u64>,
    n: usize,
}

impl BitMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= 64);
        BitMatrix { rows: vec![0; n], n }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: &[BitVector]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "BitMatrix must be square");
        BitMatrix { rows: rows.iter().map(|r| r.raw()).collect(), n }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        (self.rows[i] >> j) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if value {
            self.rows[i] |= 1 << j;
        } else {
            self.rows[i] &= !(1 << j);
        }
    }

    pub fn row(&self, i: usize) -> BitVector {
        BitVector::from_raw(self.rows[i], self.n)
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BitMatrix::zeros(self.n);
        for i in 0..self.n {
            let mut acc = 0u64;
            for j in 0..self.n {
                if self.get(i, j) {
                    acc ^= other.rows[j];
                }
            }
            out.rows[i] = acc;
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> BitMatrix {
        let mut base = self.clone();
        let mut acc = BitMatrix::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn is_identity(&self) -> bool {
        *self == BitMatrix::identity(self.n)
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix[")?;
        for i in 0..self.n {
            writeln!(f, "  {}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Row-vector times matrix: `(v · A) mod 2`.
pub fn mat_vec(v: &BitVector, a: &BitMatrix) -> Result<BitVector> {
    if v.len() != a.size() {
        return Err(Error::SizeMismatch { expected: a.size(), got: v.len() });
    }
    let mut acc = 0u64;
    for i in 0..v.len() {
        if v.get(i) {
            acc ^= a.rows[i];
        }
    }
    Ok(BitVector::from_raw(acc, v.len()))
}

/// Companion matrix of `p(x) = r_0 + r_1 x + ... + r_{n-1} x^{n-1} + x^n`,
/// with superdiagonal ones and the coefficient vector as the last row.
pub fn companion_matrix(poly_coeffs: &BitVector) -> Result<BitMatrix> {
    let n = poly_coeffs.len();
    if n == 0 {
        return Err(Error::invalid("polynomial degree must be >= 1"));
    }
    let mut m = BitMatrix::zeros(n);
    for i in 0..n.saturating_sub(1) {
        m.set(i, i + 1, true);
    }
    for j in 0..n {
        m.set(n - 1, j, poly_coeffs.get(j));
    }
    Ok(m)
}

fn prime_factors(mut v: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= v {
        if v % d == 0 {
            out.push(d);
            while v % d == 0 {
                v /= d;
            }
        }
        d += 1;
    }
    if v > 1 {
        out.push(v);
    }
    out
}

/// Checks that `M^D = M` and `M^k != M` for `1 < k < D`, with `D = 2^n`;
/// equivalently, that `M` is invertible with multiplicative order `D - 1`.
///
/// The order test runs in `O(n^3 log D)` via square-and-multiply against the
/// prime factorization of `D - 1`, so it stays cheap even at `n = 32`.
pub fn validate_primitive(m: &BitMatrix) -> bool {
    let n = m.size();
    if n == 0 || n > 63 {
        return false;
    }
    let order = (1u64 << n) - 1;
    if !m.pow(order).is_identity() {
        return false;
    }
    prime_factors(order).iter().all(|&q| !m.pow(order / q).is_identity())
}

/// Built-in primitive polynomials, as coefficient vectors `r_0..r_{n-1}`
/// (the leading `x^n` term is implicit). Degrees 1..=10 cover the dense
/// simulation range; 16 and 32 support large synthesis runs.
const PRIMITIVE_POLY_TABLE: &[(usize, &str)] = &[
    (1, "1"),                                  // x + 1
    (2, "11"),                                 // x^2 + x + 1
    (3, "110"),                                // x^3 + x + 1
    (4, "1100"),                               // x^4 + x + 1
    (5, "10100"),                              // x^5 + x^2 + 1
    (6, "110000"),                             // x^6 + x + 1
    (7, "1100000"),                            // x^7 + x + 1
    (8, "10111000"),                           // x^8 + x^4 + x^3 + x^2 + 1
    (9, "100010000"),                          // x^9 + x^4 + 1
    (10, "1001000000"),                        // x^10 + x^3 + 1
    (16, "1101000000001000"),                  // x^16 + x^12 + x^3 + x + 1
    (32, "11100000000000000000001000000000"),  // x^32 + x^22 + x^2 + x + 1
];

/// Returns the table polynomial for degree `n`, if shipped.
pub fn primitive_poly(n: usize) -> Result<BitVector> {
    PRIMITIVE_POLY_TABLE
        .iter()
        .find(|(deg, _)| *deg == n)
        .map(|(_, s)| BitVector::parse(s).expect("table entries are valid bitstrings"))
        .ok_or(Error::NoPrimitivePolynomial(n))
}

/// Companion matrix for the built-in polynomial of degree `n`, checked with
/// [`validate_primitive`] before being handed out.
pub fn primitive_companion(n: usize) -> Result<BitMatrix> {
    let m = companion_matrix(&primitive_poly(n)?)?;
    if !validate_primitive(&m) {
        return Err(Error::Internal(format!(
            "table polynomial of degree {n} failed the primitivity check"
        )));
    }
    Ok(m)
}

/// Solves `A x = y` over GF(2) by Gaussian elimination with first-nonzero
/// pivoting.
pub fn solve_linear(a: &BitMatrix, y: &BitVector) -> Result<BitVector> {
    let n = a.size();
    if y.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: y.len() });
    }
    // Augmented rows: bit n holds the right-hand side.
    let mut rows: Vec<u64> = (0..n)
        .map(|i| a.rows[i] | ((y.get(i) as u64) << n))
        .collect();
    let mut pivot_row_of_col = vec![usize::MAX; n];
    let mut next = 0usize;
    for col in 0..n {
        let Some(p) = (next..n).find(|&r| (rows[r] >> col) & 1 == 1) else {
            return Err(Error::SingularMatrix);
        };
        rows.swap(next, p);
        for r in 0..n {
            if r != next && (rows[r] >> col) & 1 == 1 {
                rows[r] ^= rows[next];
            }
        }
        pivot_row_of_col[col] = next;
        next += 1;
    }
    let mut x = BitVector::zeros(n);
    for col in 0..n {
        x.set(col, (rows[pivot_row_of_col[col]] >> n) & 1 == 1);
    }
    Ok(x)
}
