//! Arithmetic over GF(2^8): scalars, dense matrices, rank, and linear solving.
//!
//! The field is F_2[x] modulo the primitive polynomial
//! x^8 + x^4 + x^3 + x^2 + 1 (0x11d), with 2 as the multiplicative
//! generator. Multiplication goes through log/antilog tables built at
//! compile time; addition is XOR.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use thiserror::Error;

/// Reduction polynomial for the field, recorded in run metadata so that
/// test vectors are comparable across implementations.
pub const REDUCTION_POLY: u16 = 0x11d;

/// Field order.
pub const FIELD_ORDER: usize = 256;

/// Bitwise multiplication used only to build the tables.
const fn mul_slow(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= (REDUCTION_POLY & 0xff) as u8;
        }
        b >>= 1;
    }
    acc
}

const fn build_exp() -> [u8; 510] {
    let mut table = [0u8; 510];
    let mut val = 1u8;
    let mut i = 0;
    while i < 255 {
        table[i] = val;
        table[i + 255] = val;
        val = mul_slow(val, 2);
        i += 1;
    }
    table
}

const fn build_log() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut val = 1u8;
    let mut i = 0u8;
    loop {
        table[val as usize] = i;
        val = mul_slow(val, 2);
        if i == 254 {
            break;
        }
        i += 1;
    }
    table
}

// EXP is doubled so that log(a) + log(b) indexes without a modulo.
static EXP: [u8; 510] = build_exp();
static LOG: [u8; 256] = build_log();

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Panics on zero, which has none.
    pub fn inv(self) -> Gf256 {
        assert!(self.0 != 0, "zero has no inverse in GF(256)");
        Gf256(EXP[255 - LOG[self.0 as usize] as usize])
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Sub for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        if self.0 == 0 || rhs.0 == 0 {
            return Gf256::ZERO;
        }
        Gf256(EXP[LOG[self.0 as usize] as usize + LOG[rhs.0 as usize] as usize])
    }
}

impl Div for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Gf256) -> Gf256 {
        self * rhs.inv()
    }
}

/// dst[i] += s * src[i] over the overlapping prefix.
pub fn axpy(dst: &mut [Gf256], src: &[Gf256], s: Gf256) {
    if s.is_zero() {
        return;
    }
    if s == Gf256::ONE {
        for (d, x) in dst.iter_mut().zip(src) {
            *d += *x;
        }
        return;
    }
    let ls = LOG[s.0 as usize] as usize;
    for (d, x) in dst.iter_mut().zip(src) {
        if x.0 != 0 {
            d.0 ^= EXP[ls + LOG[x.0 as usize] as usize];
        }
    }
}

/// Scale a row in place.
pub fn scale(row: &mut [Gf256], s: Gf256) {
    if s == Gf256::ONE {
        return;
    }
    if s.is_zero() {
        row.fill(Gf256::ZERO);
        return;
    }
    let ls = LOG[s.0 as usize] as usize;
    for d in row.iter_mut() {
        if d.0 != 0 {
            d.0 = EXP[ls + LOG[d.0 as usize] as usize];
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("dimension mismatch: {left_rows}x{left_cols} * {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("rows have unequal lengths")]
    RaggedRows,
}

/// The linear system has no unique solution: the coefficient matrix is
/// rank-deficient or the right-hand side is inconsistent. For a batch
/// this simply means "not decodable yet".
#[derive(Debug, Error, PartialEq, Eq, Clone, Copy)]
#[error("linear system has no unique solution")]
pub struct Unsolvable;

/// Dense row-major matrix over GF(2^8).
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Gf256>,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{:02x} ", self.get(r, c).0)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> FieldMatrix {
        FieldMatrix {
            rows,
            cols,
            data: vec![Gf256::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> FieldMatrix {
        let mut m = FieldMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Gf256::ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Gf256>>) -> Result<FieldMatrix, GfError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(GfError::RaggedRows);
        }
        Ok(FieldMatrix {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Convenience constructor from raw bytes.
    pub fn from_bytes(rows: usize, cols: usize, bytes: &[u8]) -> FieldMatrix {
        assert_eq!(bytes.len(), rows * cols);
        FieldMatrix {
            rows,
            cols,
            data: bytes.iter().map(|&b| Gf256(b)).collect(),
        }
    }

    /// Matrix with i.i.d. entries uniform over all 256 field values.
    pub fn random(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> FieldMatrix {
        FieldMatrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| Gf256(rng.gen::<u8>())).collect(),
        }
    }

    /// Matrix with i.i.d. entries uniform over the 255 nonzero values.
    pub fn random_nonzero(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> FieldMatrix {
        FieldMatrix {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| Gf256(rng.gen_range(1..=255u8)))
                .collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Gf256 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Gf256) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Gf256] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Gf256] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn transpose(&self) -> FieldMatrix {
        let mut out = FieldMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Standard matrix product.
    pub fn mul(&self, rhs: &FieldMatrix) -> Result<FieldMatrix, GfError> {
        if self.cols != rhs.rows {
            return Err(GfError::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: rhs.rows,
                right_cols: rhs.cols,
            });
        }
        let mut out = FieldMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let (dst, src) = (r * rhs.cols, r * self.cols);
            for k in 0..self.cols {
                let a = self.data[src + k];
                if !a.is_zero() {
                    let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                    axpy(&mut out.data[dst..dst + rhs.cols], rhs_row, a);
                }
            }
        }
        Ok(out)
    }

    /// Drop the given row, preserving the order of the others.
    pub fn remove_row(&mut self, r: usize) {
        let start = r * self.cols;
        self.data.drain(start..start + self.cols);
        self.rows -= 1;
    }

    /// Keep only the columns marked true.
    pub fn filter_columns(&self, keep: &[bool]) -> FieldMatrix {
        assert_eq!(keep.len(), self.cols);
        let kept: Vec<usize> = (0..self.cols).filter(|&c| keep[c]).collect();
        let mut out = FieldMatrix::zeros(self.rows, kept.len());
        for r in 0..self.rows {
            for (j, &c) in kept.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    /// Rank over GF(2^8) by row reduction; the empty matrix has rank 0.
    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        work.echelonize(self.cols).len()
    }

    /// True when the rows are linearly independent.
    pub fn has_full_row_rank(&self) -> bool {
        if self.rows > self.cols {
            return false;
        }
        self.rank() == self.rows
    }

    /// In-place reduced row elimination over the first `col_limit`
    /// columns. Returns the pivot columns in order. Each pivot is scaled
    /// to 1 and eliminated both below and above.
    pub fn echelonize(&mut self, col_limit: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for col in 0..col_limit.min(self.cols) {
            let Some(pivot_row) =
                (next_row..self.rows).find(|&r| !self.get(r, col).is_zero())
            else {
                continue;
            };
            self.swap_rows(pivot_row, next_row);
            let inv = self.get(next_row, col).inv();
            scale(self.row_mut(next_row), inv);
            for r in 0..self.rows {
                if r != next_row {
                    let factor = self.get(r, col);
                    if !factor.is_zero() {
                        let (head, tail) = self.split_rows(r, next_row);
                        axpy(head, tail, factor);
                    }
                }
            }
            pivots.push(col);
            next_row += 1;
            if next_row == self.rows {
                break;
            }
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (a, b) = (a.min(b), a.max(b));
        let (first, second) = self.data.split_at_mut(b * self.cols);
        first[a * self.cols..(a + 1) * self.cols].swap_with_slice(&mut second[..self.cols]);
    }

    /// Mutable views of two distinct rows.
    fn split_rows(&mut self, dst: usize, src: usize) -> (&mut [Gf256], &[Gf256]) {
        assert_ne!(dst, src);
        let cols = self.cols;
        if dst < src {
            let (first, second) = self.data.split_at_mut(src * cols);
            (
                &mut first[dst * cols..(dst + 1) * cols],
                &second[..cols],
            )
        } else {
            let (first, second) = self.data.split_at_mut(dst * cols);
            (
                &mut second[..cols],
                &first[src * cols..(src + 1) * cols],
            )
        }
    }

    /// Solve `self * X = y` for `X`.
    ///
    /// The solution is returned only when it is unique, which requires
    /// the coefficient matrix to have full column rank and the system to
    /// be consistent; anything else is [`Unsolvable`].
    pub fn solve(&self, y: &FieldMatrix) -> Result<FieldMatrix, Unsolvable> {
        assert_eq!(
            self.rows,
            y.rows,
            "coefficient and right-hand side row counts differ"
        );
        let unknowns = self.cols;
        let mut aug = FieldMatrix::zeros(self.rows, unknowns + y.cols);
        for r in 0..self.rows {
            aug.row_mut(r)[..unknowns].copy_from_slice(self.row(r));
            aug.row_mut(r)[unknowns..].copy_from_slice(y.row(r));
        }
        let pivots = aug.echelonize(unknowns);
        if pivots.len() != unknowns {
            return Err(Unsolvable);
        }
        // Any nonzero residue below the pivot rows means inconsistency.
        for r in unknowns..aug.rows {
            if aug.row(r)[unknowns..].iter().any(|v| !v.is_zero()) {
                return Err(Unsolvable);
            }
        }
        let mut x = FieldMatrix::zeros(unknowns, y.cols);
        for (r, &col) in pivots.iter().enumerate() {
            x.row_mut(col).copy_from_slice(&aug.row(r)[unknowns..]);
        }
        Ok(x)
    }
}
