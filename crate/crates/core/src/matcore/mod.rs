//! Sparse non-negative matrices, scaled views `A(x, y) = (A_ij e^{x_i + y_j})`,
//! marginals and norms.
//!
//! Storage is row-major CSR built once from triplets; every scaled quantity
//! is a single sweep over the stored entries.

mod market;

pub use market::{read_matrix_market, write_matrix_market};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::{norm_inf, norm_l1, norm_l2, Entry, Real};

/// Immutable sparse matrix with strictly positive stored values.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseNonNegMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Entry> SparseNonNegMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Zeros (and values below [`ENTRY_FLOOR`](crate::scalar::ENTRY_FLOOR)) are dropped;
    /// duplicates, negative values and out-of-range indices are rejected.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut kept = Vec::new();
        for (row, col, v) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            match v.partial_cmp(&T::zero()) {
                None => return Err(Error::NonFiniteValue { row, col }),
                Some(std::cmp::Ordering::Less) => return Err(Error::NegativeValue { row, col }),
                _ => {}
            }
            kept.push((row, col, v));
        }
        kept.sort_by_key(|&(r, c, _)| (r, c));
        for w in kept.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateEntry {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        kept.retain(|(_, _, v)| !v.is_negligible());

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &(r, _, _) in &kept {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = kept.iter().map(|t| t.1).collect();
        let values = kept.iter().map(|t| t.2).collect();
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored (strictly positive) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Stored value at `(i, j)`, zero when unstored.
    pub fn get(&self, i: usize, j: usize) -> Result<T> {
        self.check_index(i, j)?;
        Ok(self.position(i, j).map_or(T::zero(), |p| self.values[p]))
    }

    /// Offset of `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    /// Stored values in row-major order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    /// Iterates `(col, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    /// Row index of every stored entry, aligned with [`values`](Self::values).
    pub fn row_indices(&self) -> Vec<usize> {
        (0..self.n_rows)
            .flat_map(|i| std::iter::repeat(i).take(self.row_ptr[i + 1] - self.row_ptr[i]))
            .collect()
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    /// Number of stored entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of stored entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &j in &self.col_idx {
            counts[j] += 1;
        }
        counts
    }

    /// Unscaled row sums, exact in `T`.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows)
            .map(|i| self.row(i).fold(T::zero(), |acc, (_, v)| acc + v))
            .collect()
    }

    /// Unscaled column sums, exact in `T`.
    pub fn col_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.n_cols];
        for (_, j, v) in self.iter() {
            sums[j] = sums[j] + v;
        }
        sums
    }

    /// Applies `f` to every stored value, keeping the sparsity pattern.
    pub fn map_values<U: Entry>(&self, f: impl Fn(T) -> U) -> Result<SparseNonNegMatrix<U>> {
        SparseNonNegMatrix::from_triplets(
            self.n_rows,
            self.n_cols,
            self.iter().map(|(i, j, v)| (i, j, f(v))),
        )
    }

    /// Block-diagonal direct sum of `blocks`.
    pub fn direct_sum(blocks: &[Self]) -> Result<Self> {
        let n_rows = blocks.iter().map(|b| b.n_rows).sum();
        let n_cols = blocks.iter().map(|b| b.n_cols).sum();
        let mut triplets = Vec::with_capacity(blocks.iter().map(|b| b.nnz()).sum());
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            triplets.extend(b.iter().map(|(i, j, v)| (r0 + i, c0 + j, v)));
            r0 += b.n_rows;
            c0 += b.n_cols;
        }
        Self::from_triplets(n_rows, n_cols, triplets)
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_rows || j >= self.n_cols {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        Ok(())
    }
}

impl<T: Real> SparseNonNegMatrix<T> {
    /// `A_ij e^{x_i + y_j}`, zero for unstored entries.
    pub fn scaled_entry(&self, s: &ScalingPair<T>, i: usize, j: usize) -> Result<T> {
        self.check_index(i, j)?;
        self.check_scaling(s);
        Ok(self
            .position(i, j)
            .map_or(T::zero(), |p| self.values[p] * (s.x[i] + s.y[j]).exp()))
    }

    /// Scaled values aligned with [`values`](Self::values).
    pub fn scaled_values(&self, s: &ScalingPair<T>) -> Vec<T> {
        self.check_scaling(s);
        let ey: Vec<T> = s.y.iter().map(|v| v.exp()).collect();
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let ex = s.x[i].exp();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push(self.values[p] * ex * ey[self.col_idx[p]]);
            }
        }
        out
    }

    /// Row and column marginals of `A(x, y)` in one sweep.
    pub fn marginals(&self, s: &ScalingPair<T>) -> (Vec<T>, Vec<T>) {
        self.check_scaling(s);
        let ey: Vec<T> = s.y.iter().map(|v| v.exp()).collect();
        let mut r = vec![T::zero(); self.n_rows];
        let mut c = vec![T::zero(); self.n_cols];
        for i in 0..self.n_rows {
            let ex = s.x[i].exp();
            let mut acc = T::zero();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let v = self.values[p] * ex * ey[j];
                acc += v;
                c[j] += v;
            }
            r[i] = acc;
        }
        (r, c)
    }

    /// `r(A(x, y))`.
    pub fn row_marginals(&self, s: &ScalingPair<T>) -> Vec<T> {
        self.marginals(s).0
    }

    /// `c(A(x, y))`.
    pub fn col_marginals(&self, s: &ScalingPair<T>) -> Vec<T> {
        self.marginals(s).1
    }

    /// Sum of stored values.
    pub fn one_norm(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// `‖A(x, y)‖₁ = Σ_ij A_ij e^{x_i + y_j}`.
    pub fn one_norm_scaled(&self, s: &ScalingPair<T>) -> T {
        self.scaled_values(s).into_iter().sum()
    }

    /// Smallest stored value (μ).
    pub fn smallest_positive_entry(&self) -> Result<T> {
        self.values
            .iter()
            .copied()
            .reduce(T::min)
            .ok_or(Error::EmptyMatrix)
    }

    /// Largest stored value (ν).
    pub fn largest_entry(&self) -> Result<T> {
        self.values
            .iter()
            .copied()
            .reduce(T::max)
            .ok_or(Error::EmptyMatrix)
    }

    /// Smallest stored value of `A(x, y)`, written μ(x, y).
    pub fn smallest_scaled_entry(&self, s: &ScalingPair<T>) -> Result<T> {
        self.scaled_values(s)
            .into_iter()
            .reduce(T::min)
            .ok_or(Error::EmptyMatrix)
    }

    /// Multiplies every value by `factor > 0`.
    pub fn scale(&self, factor: T) -> Result<Self> {
        self.map_values(|v| v * factor)
    }

    /// Copy with `‖A‖₁ = 1`, together with the original 1-norm.
    pub fn normalized(&self) -> Result<(Self, T)> {
        let total = self.one_norm();
        if self.nnz() == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok((self.scale(T::one() / total)?, total))
    }

    /// Row and column errors `(‖r(A(x,y)) − r‖, ‖c(A(x,y)) − c‖)` in `norm`.
    pub fn scaling_error(
        &self,
        s: &ScalingPair<T>,
        t: &TargetMarginals<T>,
        norm: Norm,
    ) -> (T, T) {
        let (r, c) = self.marginals(s);
        marginal_error(&r, &c, t, norm)
    }

    fn check_scaling(&self, s: &ScalingPair<T>) {
        assert_eq!(s.x.len(), self.n_rows, "x has wrong length");
        assert_eq!(s.y.len(), self.n_cols, "y has wrong length");
    }
}

/// Errors of precomputed marginals against `t`.
pub fn marginal_error<T: Real>(r: &[T], c: &[T], t: &TargetMarginals<T>, norm: Norm) -> (T, T) {
    let dr: Vec<T> = r.iter().zip(t.r()).map(|(a, b)| *a - *b).collect();
    let dc: Vec<T> = c.iter().zip(t.c()).map(|(a, b)| *a - *b).collect();
    (norm.apply(&dr), norm.apply(&dc))
}

/// Vector norm used for scaling errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn apply<T: Real>(self, v: &[T]) -> T {
        match self {
            Norm::L1 => norm_l1(v),
            Norm::L2 => norm_l2(v),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" | "L1" => Ok(Norm::L1),
            "l2" | "L2" => Ok(Norm::L2),
            other => Err(Error::InvalidConfig(format!("unknown norm '{other}'"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        })
    }
}

/// Log scaling vectors `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> ScalingPair<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScaling);
        }
        Ok(Self { x, y })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            x: vec![T::zero(); n_rows],
            y: vec![T::zero(); n_cols],
        }
    }

    /// Splits a stacked vector `(x | y)` after `n_rows` entries.
    pub fn from_stacked(v: &[T], n_rows: usize) -> Self {
        Self {
            x: v[..n_rows].to_vec(),
            y: v[n_rows..].to_vec(),
        }
    }

    /// Stacked vector `(x | y)`.
    pub fn stacked(&self) -> Vec<T> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.y.len()
    }

    pub fn inf_norm(&self) -> T {
        norm_inf(&self.x).max(norm_inf(&self.y))
    }

    /// `‖self − other‖∞`.
    pub fn inf_distance(&self, other: &Self) -> T {
        self.stacked()
            .iter()
            .zip(other.stacked())
            .fold(T::zero(), |m, (a, b)| m.max((*a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// `self + step · d` for a stacked direction `d`.
    pub fn add_stacked(&self, d: &[T], step: T) -> Self {
        let n = self.x.len();
        Self {
            x: self.x.iter().zip(&d[..n]).map(|(a, b)| *a + step * *b).collect(),
            y: self.y.iter().zip(&d[n..]).map(|(a, b)| *a + step * *b).collect(),
        }
    }
}

/// Desired row and column sums, each summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMarginals<T> {
    r: Vec<T>,
    c: Vec<T>,
}

impl<T: Real> TargetMarginals<T> {
    pub const DEFAULT_FLOOR: f64 = 1e-12;

    pub fn new(r: Vec<T>, c: Vec<T>) -> Result<Self> {
        Self::with_floor(r, c, T::c(Self::DEFAULT_FLOOR))
    }

    /// Validates `r`, `c` with a configurable lower bound on every entry.
    pub fn with_floor(r: Vec<T>, c: Vec<T>, floor: T) -> Result<Self> {
        for (name, v) in [("r", &r), ("c", &c)] {
            if v.is_empty() {
                return Err(Error::InvalidTargets(format!("{name} is empty")));
            }
            if let Some(bad) = v.iter().find(|a| !(**a >= floor) || !a.is_finite()) {
                return Err(Error::InvalidTargets(format!(
                    "{name} has entry {bad} below floor {floor}"
                )));
            }
            let total: T = v.iter().copied().sum();
            // f32 cannot resolve 1e-12; allow a few ulps per term.
            let tol = T::c(1e-12).max(T::epsilon() * T::c(4.0 * v.len() as f64));
            if (total - T::one()).abs() > tol {
                return Err(Error::InvalidTargets(format!(
                    "{name} sums to {total}, expected 1"
                )));
            }
        }
        Ok(Self { r, c })
    }

    /// `r = 1/n_rows`, `c = 1/n_cols`.
    pub fn uniform(n_rows: usize, n_cols: usize) -> Self {
        Self {
            r: vec![T::one() / T::c(n_rows as f64); n_rows],
            c: vec![T::one() / T::c(n_cols as f64); n_cols],
        }
    }

    pub fn r(&self) -> &[T] {
        &self.r
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn n_rows(&self) -> usize {
        self.r.len()
    }

    pub fn n_cols(&self) -> usize {
        self.c.len()
    }

    pub fn fits(&self, a: &SparseNonNegMatrix<T>) -> Result<()> {
        if self.r.len() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: self.r.len(),
            });
        }
        if self.c.len() != a.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: a.n_cols(),
                got: self.c.len(),
            });
        }
        Ok(())
    }
}
