//! Unilocal virtual quantum broadcasting.
//!
//! A unilocal virtual `n`-broadcasting protocol is a Hermitian-preserving,
//! trace-preserving map `B -> B1...Bn` whose every bipartite output marginal
//! `A Bj` reproduces the input state `rho_AB`. Such maps are not physical,
//! but they can be simulated by sampling two channels with signed weights.
//! This crate builds the protocols as Choi operators, computes their optimal
//! simulation cost with a dense semidefinite programming solver, checks the
//! analytic duality certificates, and simulates the sampling estimator.
//!
//! Modules, bottom-up:
//!
//! - [`linalg`]: dense complex matrices on multipartite spaces.
//! - [`choi`]: protocol constructors, channel application and verification.
//! - [`sdp`]: primal/dual cost programs, interior-point solver, feasibility checks.
//! - [`cost`]: closed forms, certificates, sweeps over the number of parties.
//! - [`qpd`]: the quasiprobability sampling estimator.

// `!(x > 0.0)` is used on purpose so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod choi;
pub mod cost;
pub mod error;
pub mod linalg;
pub mod qpd;
pub mod sdp;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, SystemLayout, C64};

/// Largest matrix side the dense constructors and solvers accept by default.
pub const DEFAULT_SIZE_CAP: usize = 4096;

/// Environment variable that overrides [`DEFAULT_SIZE_CAP`].
pub const SIZE_CAP_ENV: &str = "VBROADCAST_SIZE_CAP";

/// Upper bound on the side of dense operators (`d^(n+1)` for an `n`-output protocol).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SizeCap(pub usize);

impl Default for SizeCap {
    fn default() -> Self {
        SizeCap(DEFAULT_SIZE_CAP)
    }
}

impl SizeCap {
    /// Reads [`SIZE_CAP_ENV`], falling back to the default when unset or unparsable.
    pub fn from_env() -> Self {
        std::env::var(SIZE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v > 0)
            .map(SizeCap)
            .unwrap_or_default()
    }

    /// Side of the Choi operator of a `B -> B1...Bn` map with local dimension `d`,
    /// or an error if it exceeds the cap.
    pub fn check_broadcast(&self, d: usize, n: usize) -> Result<usize> {
        let side = (d as u128).checked_pow(n as u32 + 1);
        match side {
            Some(s) if s <= self.0 as u128 => Ok(s as usize),
            _ => Err(Error::SizeCapExceeded {
                d,
                n,
                cap: self.0,
            }),
        }
    }
}
