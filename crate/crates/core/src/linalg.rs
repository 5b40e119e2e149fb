//! Symmetric matrices in lower-band storage and their Cholesky factors.
//!
//! A dense matrix is the special case `bandwidth = n - 1`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    bw: usize,
    // Row i holds columns i - bw ..= i at i * (bw + 1) + (j + bw - i).
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn dense(n: usize) -> Self {
        Self::banded(n, n.saturating_sub(1))
    }

    pub fn banded(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn is_dense(&self) -> bool {
        self.bw + 1 >= self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            None
        } else {
            Some(i * (self.bw + 1) + (j + self.bw - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to the symmetric entry `(i, j)`.
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw - (i - lo);
            let mut acc = 0.0;
            for (k, j) in (lo..i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            acc += row[self.bw] * x[i];
            y[i] += acc;
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Principal sub-block over a contiguous index range.
    pub fn sub_block(&self, range: Range<usize>) -> Self {
        let m = range.len();
        let mut out = Self::banded(m, self.bw);
        for i in 0..m {
            for j in i.saturating_sub(out.bw)..=i {
                let v = self.get(range.start + i, range.start + j);
                if v != 0.0 {
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    /// `max_ij |A_ij - A_ji|` over the full index set. Storage makes this
    /// zero; kept for callers that check the invariant explicitly.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max(math::abs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }

    /// Gershgorin lower bound on the smallest eigenvalue.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        let mut off = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..i {
                let a = math::abs(self.get(i, j));
                off[i] += a;
                off[j] += a;
            }
        }
        (0..self.n).map(|i| self.get(i, i) - off[i]).fold(f64::INFINITY, f64::min)
    }

    /// `A = L L^T`. Fails with a pivot diagnostic when `A` is not SPD.
    pub fn cholesky(&self) -> Result<Cholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            // Diagonal.
            let mut d = l[j * w + bw];
            for k in lo..j {
                let v = l[j * w + (k + bw - j)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    row: j,
                    pivot: d,
                    min_eig_estimate: self.gershgorin_lower_bound(),
                });
            }
            let djj = math::sqrt(d);
            l[j * w + bw] = djj;
            // Column j below the diagonal.
            for i in j + 1..(j + bw + 1).min(n) {
                let lo_i = i.saturating_sub(bw);
                let mut s = l[i * w + (j + bw - i)];
                for k in lo_i.max(lo)..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                l[i * w + (j + bw - i)] = s / djj;
            }
        }
        Ok(Cholesky { n, bw, l })
    }
}

/// Lower-band Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, bw: usize) -> SymMatrix {
        let mut a = SymMatrix::banded(n, bw);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn banded_and_dense_solves_agree() {
        let n = 9;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let xb = tridiag(n, 1).cholesky().unwrap().solve(&b);
        let mut d = SymMatrix::dense(n);
        for i in 0..n {
            for j in 0..=i {
                let v = tridiag(n, 1).get(i, j);
                if v != 0.0 {
                    d.add(i, j, v);
                }
            }
        }
        let xd = d.cholesky().unwrap().solve(&b);
        for (p, q) in xb.iter().zip(&xd) {
            assert!((p - q).abs() < 1e-14);
        }
        let r = tridiag(n, 1).matvec(&xb);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn wider_band_solve() {
        let n = 12;
        let mut a = SymMatrix::banded(n, 3);
        for i in 0..n {
            a.add(i, i, 10.0 + i as f64);
            for k in 1..=3 {
                if i >= k {
                    a.add(i, i - k, 1.0 / (k as f64 + 1.0));
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 - 0.1 * i as f64).collect();
        let b = a.matvec(&x);
        let got = a.cholesky().unwrap().solve(&b);
        for (p, q) in got.iter().zip(&x) {
            assert!((p - q).abs() < 1e-13);
        }
        let sub = a.sub_block(2..7);
        assert_eq!(sub.get(0, 0), a.get(2, 2));
        assert_eq!(sub.get(3, 1), a.get(5, 3));
    }

    #[test]
    fn indefinite_matrix_reports_pivot() {
        let mut a = SymMatrix::dense(2);
        a.add(0, 0, 1.0);
        a.add(1, 0, 2.0);
        a.add(1, 1, 1.0);
        match a.cholesky() {
            Err(Error::NotPositiveDefinite { row, min_eig_estimate, .. }) => {
                assert_eq!(row, 1);
                assert!(min_eig_estimate < 0.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
