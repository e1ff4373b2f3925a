//! Banded LU factorization with partial pivoting.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandedError {
    #[error("entry ({row}, {col}) lies outside the band")]
    OutsideBand { row: usize, col: usize },
    #[error("matrix is singular at pivot {0}")]
    Singular(usize),
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
}

/// Square matrix with `kl` sub- and `ku` super-diagonals. Storage keeps `kl`
/// extra super-diagonals for the fill-in of pivoting; row `i`, column `j`
/// sits at `i * width + (j - i + kl)`.
#[derive(Debug, Clone)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            T::zero()
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) -> Result<(), BandedError> {
        if !self.in_band(i, j) {
            return Err(BandedError::OutsideBand { row: i, col: j });
        }
        let o = self.offset(i, j);
        self.data[o] = self.data[o] + v;
        Ok(())
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) -> Result<(), BandedError> {
        if !self.in_band(i, j) {
            return Err(BandedError::OutsideBand { row: i, col: j });
        }
        let o = self.offset(i, j);
        self.data[o] = v;
        Ok(())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.offset(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Largest absolute diagonal entry.
    pub fn max_diagonal(&self) -> T {
        (0..self.n).map(|i| self.data[self.offset(i, i)].abs()).fold(T::zero(), T::max)
    }

    pub fn factor(mut self) -> Result<BandedLu<T>, BandedError> {
        let n = self.n;
        let kl = self.kl;
        let upper = kl + self.ku;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.offset(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(BandedError::Singular(k));
            }
            pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.offset(k, j), self.offset(p, j));
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.offset(k, k)];
            for i in k + 1..=last_row {
                let oi = self.offset(i, k);
                let l = self.data[oi] / diag;
                self.data[oi] = l;
                if l == T::zero() {
                    continue;
                }
                let row_k = self.offset(k, k);
                let row_i = self.offset(i, k);
                for d in 1..=last_col - k {
                    let v = self.data[row_k + d];
                    self.data[row_i + d] = self.data[row_i + d] - l * v;
                }
            }
        }
        Ok(BandedLu { m: self, pivots })
    }
}

/// Factors produced by [`BandedMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    m: BandedMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandedLu<T> {
    pub fn solve(&self, b: &mut [T]) -> Result<(), BandedError> {
        let m = &self.m;
        let n = m.n;
        if b.len() != n {
            return Err(BandedError::Dimension { got: b.len(), expected: n });
        }
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            if bk == T::zero() {
                continue;
            }
            for i in k + 1..=(k + m.kl).min(n - 1) {
                b[i] = b[i] - m.data[m.offset(i, k)] * bk;
            }
        }
        let upper = m.kl + m.ku;
        for k in (0..n).rev() {
            let row = m.offset(k, k);
            let mut acc = b[k];
            for d in 1..=((k + upper).min(n - 1) - k) {
                acc = acc - m.data[row + d] * b[k + d];
            }
            b[k] = acc / m.data[row];
        }
        Ok(())
    }
}
