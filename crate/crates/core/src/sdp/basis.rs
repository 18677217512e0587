use super::SparseHermitian;
use crate::linalg::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Orthonormal (Hilbert-Schmidt) basis of `side x side` Hermitian matrices.
///
/// Index `k = r * side + c` names
/// - `|r><r|` when `r == c`,
/// - `(|r><c| + |c><r|) / √2` when `r < c`,
/// - `i (|r><c| - |c><r|) / √2` when `r > c`.
///
/// A Hermitian constraint `tr_{..}[J] = T` thus becomes `side²` real equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianBasis {
    side: usize,
}

impl HermitianBasis {
    pub fn new(side: usize) -> Self {
        Self { side }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of basis elements, `side²`.
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn element(&self, k: usize) -> SparseHermitian {
        let (r, c) = (k / self.side, k % self.side);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let entries = match r.cmp(&c) {
            std::cmp::Ordering::Equal => vec![(r, r, C64::new(1.0, 0.0))],
            std::cmp::Ordering::Less => vec![(r, c, C64::new(h, 0.0)), (c, r, C64::new(h, 0.0))],
            std::cmp::Ordering::Greater => vec![(r, c, C64::new(0.0, h)), (c, r, C64::new(0.0, -h))],
        };
        SparseHermitian::new(self.side, entries).expect("in range")
    }

    /// Coordinates `⟨E_k, m⟩` of a Hermitian matrix.
    pub fn encode(&self, m: &ComplexMatrix) -> Result<Vec<f64>> {
        if m.rows() != self.side || m.cols() != self.side {
            return Err(Error::DimensionMismatch(format!(
                "basis side {} applied to a {}x{} matrix",
                self.side,
                m.rows(),
                m.cols()
            )));
        }
        let s = std::f64::consts::SQRT_2;
        Ok((0..self.len())
            .map(|k| {
                let (r, c) = (k / self.side, k % self.side);
                let v = m[(r, c)];
                match r.cmp(&c) {
                    std::cmp::Ordering::Equal => v.re,
                    std::cmp::Ordering::Less => s * v.re,
                    std::cmp::Ordering::Greater => s * v.im,
                }
            })
            .collect())
    }

    /// `Σ_k coeffs[k] E_k`.
    pub fn decode(&self, coeffs: &[f64]) -> Result<ComplexMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                self.len()
            )));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = ComplexMatrix::zeros(self.side, self.side);
        for (k, &x) in coeffs.iter().enumerate() {
            let (r, c) = (k / self.side, k % self.side);
            match r.cmp(&c) {
                std::cmp::Ordering::Equal => m[(r, r)] += C64::new(x, 0.0),
                std::cmp::Ordering::Less => {
                    m[(r, c)] += C64::new(h * x, 0.0);
                    m[(c, r)] += C64::new(h * x, 0.0);
                }
                std::cmp::Ordering::Greater => {
                    m[(r, c)] += C64::new(0.0, h * x);
                    m[(c, r)] += C64::new(0.0, -h * x);
                }
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_entangled;

    #[test]
    fn orthonormal() {
        let b = HermitianBasis::new(3);
        for k in 0..9 {
            for l in 0..9 {
                let g = b.element(k).dot_sparse(&b.element(l));
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn encodes_max_entangled() {
        let b = HermitianBasis::new(4);
        let phi = max_entangled(2);
        let coeffs = b.encode(&phi).unwrap();
        assert!(b.decode(&coeffs).unwrap().max_abs_diff(&phi) <= 1e-15);
        // elementwise agreement with the sparse route
        let sparse = SparseHermitian::from_dense(&phi).basis_coefficients();
        for (k, v) in sparse {
            assert_eq!(coeffs[k], v);
        }
    }

    #[test]
    fn element_coordinates_are_unit_vectors() {
        let b = HermitianBasis::new(2);
        for k in 0..4 {
            let coeffs = b.encode(&b.element(k).to_dense()).unwrap();
            for (l, x) in coeffs.iter().enumerate() {
                assert!((x - if k == l { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
