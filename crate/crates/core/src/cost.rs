//! Closed-form simulation costs, their bounds, the analytic certificates and
//! sweeps over the number of outputs.
//!
//! Costs are given in linear form (`p1 + p2`) and in bits (`log2`).

use serde::{Deserialize, Serialize};

use crate::choi::{choi_optimal_2broadcast, gamma_prime_decomposition, verify_cptp, CptpReport};
use crate::linalg::{max_entangled, ComplexMatrix};
use crate::sdp::{
    build_dual_capped, build_primal_capped, check_feasible_dual, check_feasible_primal, primal_candidate, solve,
    DualCandidate, NamedValues, SolveOptions, SolveStatus,
};
use crate::{Error, Result, SizeCap};

/// Slack allowed between an SDP value and the closed-form bounds.
pub const BOUND_SLACK: f64 = 1e-5;

/// Feasibility tolerance of the analytic certificates.
pub const CERTIFICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSource {
    Analytic,
    Sdp,
    Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub d: usize,
    pub n: usize,
    pub gamma_linear: f64,
    pub gamma_log: f64,
    pub source: CostSource,
    pub lower_bound_linear: f64,
    pub upper_bound_linear: f64,
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

/// `(3d - 1) / (d + 1)`, the optimal two-output cost.
pub fn gamma2_analytic(d: usize) -> Result<CostReport> {
    require(d >= 2, || format!("d must be at least 2, got {d}"))?;
    let df = d as f64;
    let gamma = (3.0 * df - 1.0) / (df + 1.0);
    let (lower, upper) = bounds_n(d, 2)?;
    Ok(CostReport {
        d,
        n: 2,
        gamma_linear: gamma,
        gamma_log: gamma.log2(),
        source: CostSource::Analytic,
        lower_bound_linear: lower,
        upper_bound_linear: upper,
    })
}

/// `(2nd / (n + d - 1) - 1, 2n - 1)`.
pub fn bounds_n(d: usize, n: usize) -> Result<(f64, f64)> {
    require(d >= 2 && n >= 2, || format!("need d >= 2 and n >= 2, got d={d}, n={n}"))?;
    let (df, nf) = (d as f64, n as f64);
    Ok((2.0 * nf * df / (nf + df - 1.0) - 1.0, 2.0 * nf - 1.0))
}

/// Solves the primal cost program and checks the result against the bounds.
pub fn optimal_cost_sdp(d: usize, n: usize, opts: &SolveOptions, cap: SizeCap) -> Result<CostReport> {
    let (lower, upper) = bounds_n(d, n)?;
    let problem = build_primal_capped(d, n, cap)?;
    let solution = solve(&problem, opts)?;
    if solution.status != SolveStatus::Optimal {
        return Err(Error::NotConverged {
            status: format!("{:?}", solution.status),
            gap: solution.relative_gap,
        });
    }
    let gamma = solution.primal_objective;
    if gamma < lower - BOUND_SLACK || gamma > upper + BOUND_SLACK {
        return Err(Error::BoundViolation { value: gamma, lower, upper });
    }
    Ok(CostReport {
        d,
        n,
        gamma_linear: gamma,
        gamma_log: gamma.log2(),
        source: CostSource::Sdp,
        lower_bound_linear: lower,
        upper_bound_linear: upper,
    })
}

/// Dual point `Z = K = I/d`, `X_j = 2/(d(n+d-1)) Φ_d - 1/(nd) I` for every `j`.
pub fn bound_dual_point(d: usize, n: usize) -> DualCandidate {
    let (df, nf) = (d as f64, n as f64);
    let mut x = max_entangled(d).scale(2.0 / (df * (nf + df - 1.0)));
    x.axpy(-1.0 / (nf * df), &ComplexMatrix::identity(d * d));
    let z = ComplexMatrix::identity(d).scale(1.0 / df);
    DualCandidate::symmetric(x, n, z.clone(), z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub d: usize,
    pub primal_pass: bool,
    pub dual_pass: bool,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub gap: f64,
    pub max_equality_residual: f64,
    pub min_primal_eigenvalue: f64,
    pub min_dual_margin: f64,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.primal_pass && self.dual_pass
    }
}

/// Checks the optimal decomposition and the matching dual point for `n = 2`.
pub fn certificate_2broadcast(d: usize) -> Result<CertificateReport> {
    require(d >= 2, || format!("d must be at least 2, got {d}"))?;
    let primal = primal_candidate(&choi_optimal_2broadcast(d)?);
    certificate_2broadcast_with(d, &primal, &bound_dual_point(d, 2), CERTIFICATE_TOL)
}

/// Runs both checkers on the given primal and dual points.
pub fn certificate_2broadcast_with(
    d: usize,
    primal: &NamedValues,
    dual: &DualCandidate,
    tol: f64,
) -> Result<CertificateReport> {
    let cap = SizeCap(SizeCap::from_env().0.max(d * d * d));
    let pr = check_feasible_primal(&build_primal_capped(d, 2, cap)?, primal, tol)?;
    let dr = check_feasible_dual(&build_dual_capped(d, 2, cap)?, dual, tol)?;
    Ok(CertificateReport {
        d,
        primal_pass: pr.pass,
        dual_pass: dr.pass,
        primal_obj: pr.objective,
        dual_obj: dr.objective,
        gap: pr.objective - dr.objective,
        max_equality_residual: pr.max_equality_residual.max(dr.max_equality_residual),
        min_primal_eigenvalue: pr.min_block_eigenvalue,
        min_dual_margin: dr.min_block_eigenvalue,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsCertificate {
    pub d: usize,
    pub n: usize,
    /// `2n - 1`, the weight sum of the `n M1 - (n-1) M2` decomposition.
    pub upper_from_gamma_prime: f64,
    pub m1: CptpReport,
    pub m2: CptpReport,
    pub upper_pass: bool,
    pub dual_lower_pass: bool,
    pub lower_obj: f64,
    pub min_dual_margin: f64,
}

/// Verifies both channels of the `n M1 - (n-1) M2` decomposition and the
/// feasibility of [`bound_dual_point`].
pub fn certificate_nbroadcast_bounds(d: usize, n: usize, cap: SizeCap) -> Result<BoundsCertificate> {
    certificate_nbroadcast_bounds_with(d, n, cap, CERTIFICATE_TOL)
}

pub fn certificate_nbroadcast_bounds_with(d: usize, n: usize, cap: SizeCap, tol: f64) -> Result<BoundsCertificate> {
    bounds_n(d, n)?;
    let decomposition = gamma_prime_decomposition(d, n, cap)?;
    let m1 = verify_cptp(&decomposition.choi1, 1.0, tol)?;
    let m2 = verify_cptp(&decomposition.choi2, 1.0, tol)?;
    let dual = check_feasible_dual(&build_dual_capped(d, n, cap)?, &bound_dual_point(d, n), tol)?;
    Ok(BoundsCertificate {
        d,
        n,
        upper_from_gamma_prime: decomposition.gamma(),
        upper_pass: m1.pass && m2.pass,
        m1,
        m2,
        dual_lower_pass: dual.pass,
        lower_obj: dual.objective,
        min_dual_margin: dual.min_block_eigenvalue,
    })
}

/// One row of a sweep over `n`; `sdp_*` are `None` when the program was not solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub lower_linear: f64,
    pub sdp_linear: Option<f64>,
    pub upper_linear: f64,
    pub lower_log2: f64,
    pub sdp_log2: Option<f64>,
    pub upper_log2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    pub solve: SolveOptions,
    /// Largest `n` for which the program is solved.
    pub sdp_up_to: Option<usize>,
    pub cap: SizeCap,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { solve: SolveOptions::default(), sdp_up_to: None, cap: SizeCap::from_env() }
    }
}

fn sweep_row(d: usize, n: usize, opts: &SweepOptions) -> Result<SweepRow> {
    let (lower, upper) = bounds_n(d, n)?;
    let wanted = opts.sdp_up_to.is_some_and(|m| n <= m);
    let sdp = if wanted && opts.cap.check_broadcast(d, n).is_ok() {
        Some(optimal_cost_sdp(d, n, &opts.solve, opts.cap)?.gamma_linear)
    } else {
        None
    };
    Ok(SweepRow {
        n,
        lower_linear: lower,
        sdp_linear: sdp,
        upper_linear: upper,
        lower_log2: lower.log2(),
        sdp_log2: sdp.map(f64::log2),
        upper_log2: upper.log2(),
    })
}

/// Rows for `n_min..=n_max` in order. Rows whose operator side exceeds the cap
/// carry bounds only. Solver failures are returned as errors.
pub fn sweep(d: usize, n_min: usize, n_max: usize, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    require(n_min >= 2 && n_min <= n_max, || format!("invalid range {n_min}..={n_max}"))?;
    let ns: Vec<usize> = (n_min..=n_max).collect();
    #[cfg(feature = "parallel")]
    let rows = {
        use rayon::prelude::*;
        ns.par_iter().map(|&n| sweep_row(d, n, opts)).collect::<Vec<_>>()
    };
    #[cfg(not(feature = "parallel"))]
    let rows = ns.iter().map(|&n| sweep_row(d, n, opts)).collect::<Vec<_>>();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let r = gamma2_analytic(2).unwrap();
        assert!((r.gamma_linear - 5.0 / 3.0).abs() < 1e-15);
        assert!((r.gamma_log - 0.7369655941662062).abs() < 1e-12);
        assert_eq!(gamma2_analytic(3).unwrap().gamma_linear, 2.0);
        assert_eq!(gamma2_analytic(3).unwrap().gamma_log, 1.0);
        assert!(gamma2_analytic(1).is_err());
        assert_eq!(bounds_n(2, 3).unwrap(), (2.0, 5.0));
        let (lo, up) = bounds_n(2, 10).unwrap();
        assert!((lo - (40.0 / 11.0 - 1.0)).abs() < 1e-14);
        assert_eq!(up, 19.0);
    }

    #[test]
    fn lower_bound_at_two_outputs_is_the_two_output_cost() {
        for d in 2..40 {
            let (lo, _) = bounds_n(d, 2).unwrap();
            assert!((lo - gamma2_analytic(d).unwrap().gamma_linear).abs() <= 1e-14);
        }
    }

    #[test]
    fn bounds_close_for_large_dimension() {
        let (lo, up) = bounds_n(1_000_000, 4).unwrap();
        assert!(up - lo < 1e-4);
        for d in 2..30 {
            let (lo, up) = bounds_n(d, 5).unwrap();
            assert!(lo <= up);
        }
    }

    #[test]
    fn corrupted_weight_fails_primal_check() {
        let decomposition = choi_optimal_2broadcast(2).unwrap();
        let mut primal = primal_candidate(&decomposition);
        let p1 = primal.scalars["p1"] / 2.0;
        primal = primal
            .scalar("p1", p1)
            .block("J1", decomposition.choi1.matrix().scale(p1));
        let r = certificate_2broadcast_with(2, &primal, &bound_dual_point(2, 2), CERTIFICATE_TOL).unwrap();
        assert!(!r.primal_pass);
        assert!(r.dual_pass);
    }
}
