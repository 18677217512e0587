//! Dense complex linear algebra on multipartite tensor-product spaces.

mod eig;
mod layout;
mod matrix;
mod structured;

pub use eig::{
    cholesky, eigvalsh, herm_eig, hpd_inverse, is_psd, min_eigenvalue, real_embedding, solve_lower, HermEig,
    EIG_HERMITIAN_TOL,
};
pub use layout::{embed, embed_entries, partial_trace, partial_transpose, permute, Subsystem, SystemLayout};
pub use matrix::{kron, ComplexMatrix};
pub use structured::{max_entangled, pauli, pauli_word, random_density, random_hermitian, swap_operator};

pub type C64 = num_complex::Complex64;

/// Hermiticity tolerance applied by constructors.
pub const HERMITIAN_TOL: f64 = 1e-12;
