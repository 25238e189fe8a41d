//! Banded LU with partial pivoting, for two-point collocation Jacobians.
//!
//! Storage follows the general-band convention: entry (i, j) lives at
//! `data[[kl + ku + i - j, j]]`, with `kl` extra leading rows so pivoting
//! fill-in (upper bandwidth growing to kl + ku) stays inside the array.

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Array2<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: Array2::zeros((2 * kl + ku + 1, n)),
        }
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i}, {j}) outside the band"
        );
        self.kl + self.ku + i - j
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let r = self.offset(i, j);
        self.data[[r, j]] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let r = self.offset(i, j);
        self.data[[r, j]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            return 0.0;
        }
        self.data[[self.kl + self.ku + i - j, j]]
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for j in 0..self.n {
                a[[i, j]] = self.get(i, j);
            }
        }
        a
    }

    /// Factorizes in place and solves; consumes the matrix.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::invalid("banded solve dimension mismatch"));
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let d = kl + ku;
        let mut ipiv = vec![0usize; n];
        let mut b = rhs.to_vec();
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = self.data[[d, j]].abs();
            for t in 1..=km {
                let v = self.data[[d + t, j]].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            if best == 0.0 {
                return Err(Error::numerical(format!(
                    "banded matrix is singular at column {j}"
                )));
            }
            ipiv[j] = j + jp;
            if jp != 0 {
                let cmax = (j + d).min(n - 1);
                for c in j..=cmax {
                    let r1 = d + j - c;
                    let r2 = r1 + jp;
                    self.data.swap([r1, c], [r2, c]);
                }
            }
            if km > 0 {
                let pivot = self.data[[d, j]];
                for t in 1..=km {
                    self.data[[d + t, j]] /= pivot;
                }
                let cmax = (j + d).min(n - 1);
                for c in j + 1..=cmax {
                    let ujc = self.data[[d + j - c, c]];
                    if ujc != 0.0 {
                        for t in 1..=km {
                            self.data[[d + t + j - c, c]] -= self.data[[d + t, j]] * ujc;
                        }
                    }
                }
            }
        }
        // Forward: permutation and unit-lower-triangular factors.
        for j in 0..n {
            if ipiv[j] != j {
                b.swap(j, ipiv[j]);
            }
            let km = kl.min(n - 1 - j);
            for t in 1..=km {
                b[j + t] -= self.data[[d + t, j]] * b[j];
            }
        }
        // Backward: U has bandwidth kl + ku after pivoting.
        for j in (0..n).rev() {
            b[j] /= self.data[[d, j]];
            let lo = j.saturating_sub(d);
            for i in lo..j {
                b[i] -= self.data[[d + i - j, j]] * b[j];
            }
        }
        Ok(b)
    }
}
