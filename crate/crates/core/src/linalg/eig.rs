//! Hermitian eigendecomposition (Householder tridiagonalization + implicit QL)
//! and Cholesky-based helpers.

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Hermiticity tolerance for eigensolver input, relative to `max(1, max|m_ij|)`.
pub const EIG_HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues in descending order and the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermEig {
    /// `V diag(values) V^†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            for i in 0..n {
                let vik = v[(i, k)] * lam;
                if vik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.values.len()).map(|i| self.vectors[(i, k)]).collect()
    }
}

fn check_input(m: &ComplexMatrix) -> Result<usize> {
    let n = m.require_square("eigensolver input")?;
    m.require_hermitian(EIG_HERMITIAN_TOL * m.max_abs().max(1.0))?;
    Ok(n)
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEig> {
    let n = check_input(m)?;
    let (values, vectors) = eigen_impl(&m.hermitian_part(), true)?;
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = ComplexMatrix::from_fn(n, n, |i, k| vectors[(i, order[k])]);
    Ok(HermEig {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_input(m)?;
    let (mut values, _) = eigen_impl(&m.hermitian_part(), false)?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?.last().copied().unwrap_or(0.0))
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}

fn eigen_impl(m: &ComplexMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<ComplexMatrix>)> {
    let n = m.side();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| ComplexMatrix::zeros(0, 0))));
    }
    let mut a = m.data().to_vec();
    let mut q = want_vectors.then(|| ComplexMatrix::identity(n).into_data());
    let zero = C64::new(0.0, 0.0);

    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x_norm = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        let tail = (k + 2..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>();
        if x_norm == 0.0 || tail == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * x_norm;
        let v = &mut v[..len];
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[i * n + k];
        }
        v[0] -= alpha;
        let v_norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= v_norm;
        }

        // column/row k become alpha e1
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha.conj();
        for i in k + 2..n {
            a[i * n + k] = zero;
            a[k * n + i] = zero;
        }

        // trailing block S <- S - 2 (v w^H + w v^H), p = S v, w = p - (v^H p) v
        let p = &mut p[..len];
        for (t, i) in (k + 1..n).enumerate() {
            let row = &a[i * n + k + 1..i * n + n];
            p[t] = row.iter().zip(v.iter()).map(|(s, vv)| s * vv).sum();
        }
        let kdot: C64 = v.iter().zip(p.iter()).map(|(vv, pp)| vv.conj() * pp).sum();
        for t in 0..len {
            p[t] -= v[t] * kdot;
        }
        for (t, i) in (k + 1..n).enumerate() {
            let (vt, wt) = (v[t], p[t]);
            let row = &mut a[i * n + k + 1..i * n + n];
            for (s, entry) in row.iter_mut().enumerate() {
                *entry -= (vt * p[s].conj() + wt * v[s].conj()) * 2.0;
            }
        }

        // Q <- Q H on columns k+1..n
        if let Some(q) = q.as_mut() {
            for i in 0..n {
                let row = &mut q[i * n + k + 1..i * n + n];
                let qv: C64 = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (s, entry) in row.iter_mut().enumerate() {
                    *entry -= qv * v[s].conj() * 2.0;
                }
            }
        }
    }

    // Hermitian tridiagonal -> real symmetric tridiagonal via diagonal phases.
    let mut diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    let mut off = vec![0.0; n];
    let mut phases = vec![C64::new(1.0, 0.0); n];
    for k in 0..n - 1 {
        let t = a[(k + 1) * n + k];
        let r = t.norm();
        off[k] = r;
        phases[k + 1] = if r > 0.0 { phases[k] * (t / r) } else { phases[k] };
    }

    let mut z = q.map(|mut q| {
        for i in 0..n {
            for k in 0..n {
                q[i * n + k] *= phases[k];
            }
        }
        q
    });
    tridiagonal_ql(&mut diag, &mut off, z.as_deref_mut(), n)?;
    Ok((diag, z.map(|z| ComplexMatrix::new(n, n, z).expect("square"))))
}

/// Implicit QL with Wilkinson-style shifts on a real symmetric tridiagonal
/// matrix (`d` diagonal, `e[i]` couples `i` and `i+1`). Rotations are applied
/// to the columns of `z` (row-major `rows x n`) when given.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [C64]>, n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let rows = z.as_ref().map(|z| z.len() / n).unwrap_or(0);
    // negligible couplings are judged against the whole matrix, as in tql2
    let norm = d.iter().zip(e.iter()).map(|(a, b)| a.abs() + b.abs()).fold(0.0, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= f64::EPSILON * norm {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..rows {
                        let zi = z[k * n + i];
                        let zi1 = z[k * n + i + 1];
                        z[k * n + i + 1] = zi * s + zi1 * c;
                        z[k * n + i] = zi * c - zi1 * s;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Lower-triangular `L` with `L L^† = m`; errors unless `m` is positive definite.
pub fn cholesky(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.require_square("Cholesky input")?;
    let a = m.data();
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut diag = a[j * n + j].re;
        for k in 0..j {
            diag -= l[j * n + k].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let ljj = diag.sqrt();
        l[j * n + j] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    ComplexMatrix::new(n, n, l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.side();
    let m = b.cols();
    let mut x = b.clone();
    let ld = l.data();
    let xd = x.data_mut();
    for i in 0..n {
        for k in 0..i {
            let lik = ld[i * n + k];
            if lik == C64::new(0.0, 0.0) {
                continue;
            }
            let (head, tail) = xd.split_at_mut(i * m);
            let src = &head[k * m..(k + 1) * m];
            for (t, s) in tail[..m].iter_mut().zip(src) {
                *t -= lik * s;
            }
        }
        let inv = C64::new(1.0, 0.0) / ld[i * n + i];
        for t in &mut xd[i * m..(i + 1) * m] {
            *t *= inv;
        }
    }
    x
}

/// Inverse of a Hermitian positive definite matrix.
pub fn hpd_inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let l = cholesky(m)?;
    let linv = solve_lower(&l, &ComplexMatrix::identity(m.side()));
    Ok(linv.adjoint().matmul(&linv).hermitian_part())
}

/// Real symmetric embedding `[[Re m, -Im m], [Im m, Re m]]` of a Hermitian
/// matrix, stored with zero imaginary parts. Its spectrum is that of `m` with
/// every multiplicity doubled.
pub fn real_embedding(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.require_square("embedding input")?;
    Ok(ComplexMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        let v = match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        C64::new(v, 0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_entangled, swap_operator};

    fn assert_values(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn spectra_of_structured_operators() {
        assert_values(&herm_eig(&ComplexMatrix::identity(4)).unwrap().values, &[1.0; 4]);
        assert_values(&herm_eig(&swap_operator(2)).unwrap().values, &[1.0, 1.0, 1.0, -1.0]);
        assert_values(&herm_eig(&max_entangled(2)).unwrap().values, &[2.0, 0.0, 0.0, 0.0]);
        let mut want = vec![0.0; 9];
        want[0] = 3.0;
        assert_values(&eigvalsh(&max_entangled(3)).unwrap(), &want);
    }

    #[test]
    fn complex_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1
        let m = ComplexMatrix::new(
            2,
            2,
            vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)],
        )
        .unwrap();
        let e = herm_eig(&m).unwrap();
        assert_values(&e.values, &[3.0, 1.0]);
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_real(2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
        assert!(is_psd(&m, 0.0).is_err());
    }

    #[test]
    fn psd_tests() {
        assert!(is_psd(&ComplexMatrix::identity(3), 0.0).unwrap());
        assert!(!is_psd(&ComplexMatrix::identity(3).scale(-1.0), 1e-9).unwrap());
    }

    #[test]
    fn cholesky_and_inverse() {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![C64::new(4.0, 0.0), C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(3.0, 0.0)],
        )
        .unwrap();
        let l = cholesky(&m).unwrap();
        assert!((&l * &l.adjoint()).max_abs_diff(&m) < 1e-14);
        let inv = hpd_inverse(&m).unwrap();
        assert!((&inv * &m).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
        assert!(cholesky(&swap_operator(2)).is_err());
    }

    #[test]
    fn trivial_sizes() {
        let e = herm_eig(&ComplexMatrix::zeros(0, 0)).unwrap();
        assert!(e.values.is_empty());
        let one = ComplexMatrix::from_real(1, &[-2.5]).unwrap();
        assert_values(&herm_eig(&one).unwrap().values, &[-2.5]);
    }
}
