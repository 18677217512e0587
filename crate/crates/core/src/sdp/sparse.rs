use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Sparse Hermitian coefficient matrix; entries sorted by `(row, col)`, both
/// triangles stored, zeros dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseHermitian {
    side: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseHermitian {
    /// Duplicate positions are summed.
    pub fn new(side: usize, mut entries: Vec<(usize, usize, C64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= side || *c >= side) {
            return Err(Error::DimensionMismatch(format!("entry ({r}, {c}) outside side {side}")));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != C64::new(0.0, 0.0));
        Ok(Self { side, entries: merged })
    }

    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.side();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[(i, j)]))
            .filter(|&(_, _, v)| v != C64::new(0.0, 0.0))
            .collect();
        Self { side: n, entries }
    }

    pub fn identity(side: usize) -> Self {
        Self {
            side,
            entries: (0..side).map(|i| (i, i, C64::new(1.0, 0.0))).collect(),
        }
    }

    /// `1x1` coefficient `v`.
    pub fn scalar(v: f64) -> Self {
        Self::new(1, vec![(0, 0, C64::new(v, 0.0))]).expect("in range")
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.2 *= s;
        }
        out.entries.retain(|&(_, _, v)| v != C64::new(0.0, 0.0));
        out
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.side, self.side);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `dst += s * self`.
    pub fn add_to(&self, dst: &mut ComplexMatrix, s: f64) {
        for &(r, c, v) in &self.entries {
            dst[(r, c)] += v * s;
        }
    }

    /// `tr(self * w)`, real part.
    pub fn dot(&self, w: &ComplexMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| {
                let x = w[(c, r)];
                v.re * x.re - v.im * x.im
            })
            .sum()
    }

    /// `tr(self * other)` for two Hermitian sparse matrices.
    pub fn dot_sparse(&self, other: &SparseHermitian) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            let ka = (a[i].0, a[i].1);
            let kb = (b[j].0, b[j].1);
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    // tr(AB) = Σ A_rc conj(B_rc) for Hermitian B
                    acc += a[i].2.re * b[j].2.re + a[i].2.im * b[j].2.im;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// `max |A_rc - conj(A_cr)|` over stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let lookup = |r: usize, c: usize| {
            self.entries
                .binary_search_by_key(&(r, c), |&(a, b, _)| (a, b))
                .map(|i| self.entries[i].2)
                .unwrap_or(C64::new(0.0, 0.0))
        };
        self.entries
            .iter()
            .map(|&(r, c, v)| (v - lookup(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coordinates in the orthonormal Hermitian basis of
    /// [`HermitianBasis`](super::HermitianBasis), as sparse `(index, value)` pairs.
    pub fn basis_coefficients(&self) -> Vec<(usize, f64)> {
        let s = std::f64::consts::SQRT_2;
        let mut out: Vec<(usize, f64)> = self
            .entries
            .iter()
            .map(|&(r, c, v)| {
                let k = r * self.side + c;
                match r.cmp(&c) {
                    std::cmp::Ordering::Equal => (k, v.re),
                    std::cmp::Ordering::Less => (k, s * v.re),
                    std::cmp::Ordering::Greater => (k, s * v.im),
                }
            })
            .filter(|&(_, x)| x != 0.0)
            .collect();
        out.sort_by_key(|&(k, _)| k);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_dot() {
        let a = SparseHermitian::new(
            2,
            vec![(0, 1, C64::new(1.0, 2.0)), (1, 0, C64::new(1.0, -2.0)), (0, 0, C64::new(0.5, 0.0)), (0, 0, C64::new(0.5, 0.0))],
        )
        .unwrap();
        assert_eq!(a.nnz(), 3);
        let d = a.to_dense();
        assert!((a.dot(&d) - d.trace_product_re(&d)).abs() < 1e-14);
        assert!((a.dot_sparse(&a) - d.trace_product_re(&d)).abs() < 1e-14);
        assert!(SparseHermitian::new(2, vec![(2, 0, C64::new(1.0, 0.0))]).is_err());
    }
}
