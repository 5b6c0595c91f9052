//! Symmetric banded matrices with an in-place Cholesky factorization.
//!
//! Everything the discretization produces (stiffness, mass, weighted mass,
//! and their linear combinations) is banded under lexicographic node
//! ordering, so a band solver covers both the 1D tridiagonal case and the
//! 2D case.

use crate::error::{Error, Result};

/// Symmetric banded matrix storing the lower band row by row.
///
/// Entry (i, j) with i - bw <= j <= i lives at `data[i * (bw + 1) + (j - i + bw)]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    pub n: usize,
    pub bandwidth: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth);
        i * (self.bandwidth + 1) + (j + self.bandwidth - i)
    }

    /// Value at (i, j); symmetric access, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        if r - c > self.bandwidth {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    /// Accumulate into the lower-triangular entry (i >= j).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    /// self = a * self + b * other (bands must be compatible).
    pub fn scaled_add(&mut self, a: f64, b: f64, other: &BandMatrix) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.bandwidth, other.bandwidth);
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x = a * *x + b * *y;
        }
    }

    /// y = A x using the symmetric band storage.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let bw = self.bandwidth;
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.data[i * (bw + 1) + (j0 + bw - i)..i * (bw + 1) + bw + 1];
            let mut acc = 0.0;
            for (off, &a) in row.iter().enumerate() {
                let j = j0 + off;
                acc += a * x[j];
                if j < i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// x^T A y.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Cholesky factorization A = L L^T; fails if A is not positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bandwidth;
        let mut l = self.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j.saturating_sub(bw).max(j0);
                let mut sum = l.data[l.idx(i, j)];
                for k in k0..j {
                    sum -= l.data[l.idx(i, k)] * l.data[l.idx(j, k)];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::SingularSystem(format!(
                            "nonpositive pivot {sum:.3e} at row {i}"
                        )));
                    }
                    let k = l.idx(i, i);
                    l.data[k] = sum.sqrt();
                } else {
                    let d = l.data[l.idx(j, j)];
                    let k = l.idx(i, j);
                    l.data[k] = sum / d;
                }
            }
        }
        Ok(BandCholesky { l })
    }
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.n;
        let bw = self.l.bandwidth;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // Forward: L y = b.
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut sum = x[i];
            for j in j0..i {
                sum -= self.l.data[self.l.idx(i, j)] * x[j];
            }
            x[i] = sum / self.l.data[self.l.idx(i, i)];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let mut sum = x[i];
            let jmax = (i + bw).min(n - 1);
            for j in i + 1..=jmax {
                sum -= self.l.data[self.l.idx(j, i)] * x[j];
            }
            x[i] = sum / self.l.data[self.l.idx(i, i)];
        }
        x
    }
}
