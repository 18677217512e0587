use rand::Rng;
use rand_distr::StandardNormal;

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Swap `F = Σ_ij |ij><ji|` on two `d`-dimensional factors.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut f = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            f[(i * d + j, j * d + i)] = C64::new(1.0, 0.0);
        }
    }
    f
}

/// Unnormalized maximally entangled operator `Φ_d = Σ_ij |ii><jj|`.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut phi = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            phi[(i * d + i, j * d + j)] = C64::new(1.0, 0.0);
        }
    }
    phi
}

/// Single-qubit Pauli matrix by letter (`I`, `X`, `Y`, `Z`).
pub fn pauli(letter: char) -> Result<ComplexMatrix> {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    let data = match letter.to_ascii_uppercase() {
        'I' => vec![l, o, o, l],
        'X' => vec![o, l, l, o],
        'Y' => vec![o, -i, i, o],
        'Z' => vec![l, o, o, -l],
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown Pauli letter `{other}` (expected I, X, Y or Z)"
            )))
        }
    };
    ComplexMatrix::new(2, 2, data)
}

/// Tensor product of Pauli letters, e.g. `"ZZ"`.
pub fn pauli_word(word: &str) -> Result<ComplexMatrix> {
    if word.is_empty() {
        return Err(Error::InvalidParameter("empty Pauli word".into()));
    }
    let mut out = ComplexMatrix::identity(1);
    for c in word.chars() {
        out = out.kron(&pauli(c)?);
    }
    Ok(out)
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Random full-rank density matrix `G G^† / tr(G G^†)` from a complex Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, rng);
    let rho = g.matmul(&g.adjoint()).hermitian_part();
    let tr = rho.trace().re;
    rho.scale(1.0 / tr)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ginibre(n, rng).hermitian_part()
}
