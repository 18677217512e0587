use super::problem::{coordinate_name, NamedValues, Point, ProblemKind, ScalarDomain, SdpProblem};
use super::{HermitianBasis, SdpSolution};
use crate::choi::{broadcast_layout, output_label, HptpDecomposition, INPUT_LABEL};
use crate::linalg::{embed, min_eigenvalue, ComplexMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub objective: f64,
    pub max_equality_residual: f64,
    pub group_residuals: Vec<(String, f64)>,
    pub min_block_eigenvalue: f64,
    /// Smallest eigenvalue of every PSD block.
    pub block_margins: Vec<(String, f64)>,
    /// Smallest nonnegative scalar (`+inf` if there are none).
    pub min_scalar: f64,
    pub pass: bool,
}

/// Evaluates residuals, PSD margins and the objective at `point`.
pub fn check_point(p: &SdpProblem, point: &Point, tol: f64) -> Result<FeasibilityReport> {
    let residuals = p.residuals(point);
    let group_residuals = p.group_residuals(&residuals);
    let max_equality_residual = group_residuals.iter().map(|g| g.1).fold(0.0, f64::max);
    let block_margins = p
        .blocks
        .iter()
        .zip(&point.blocks)
        .map(|(b, m)| Ok((b.name.clone(), min_eigenvalue(&m.hermitian_part())?)))
        .collect::<Result<Vec<_>>>()?;
    let min_block_eigenvalue = block_margins.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let min_scalar = p
        .scalars
        .iter()
        .zip(&point.scalars)
        .filter(|(s, _)| s.domain == ScalarDomain::NonNegative)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let hermitian = point.blocks.iter().all(|m| m.is_hermitian(tol));
    let pass = hermitian && max_equality_residual <= tol && min_block_eigenvalue >= -tol && min_scalar >= -tol;
    Ok(FeasibilityReport {
        objective: p.objective_value(point),
        max_equality_residual,
        group_residuals,
        min_block_eigenvalue,
        block_margins,
        min_scalar,
        pass,
    })
}

fn require_kind(p: &SdpProblem, kind: ProblemKind) -> Result<(usize, usize)> {
    match p.meta {
        Some(meta) if meta.kind == kind => Ok((meta.d, meta.n)),
        _ => Err(Error::InvalidParameter(format!("expected a {kind:?} cost program"))),
    }
}

/// Candidate `{J1, J2, p1, p2}` for the primal cost program.
pub fn check_feasible_primal(p: &SdpProblem, candidate: &NamedValues, tol: f64) -> Result<FeasibilityReport> {
    require_kind(p, ProblemKind::Primal)?;
    check_point(p, &p.point_from_named(candidate)?, tol)
}

/// `J_i = p_i J^{N_i}` of a signed decomposition.
pub fn primal_candidate(decomposition: &HptpDecomposition) -> NamedValues {
    NamedValues::new()
        .block("J1", decomposition.choi1.matrix().scale(decomposition.p1))
        .block("J2", decomposition.choi2.matrix().scale(decomposition.p2))
        .scalar("p1", decomposition.p1)
        .scalar("p2", decomposition.p2)
}

/// Dual point: one `X_j` on `B Bj` per output, `Z` and `K` on `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCandidate {
    pub x: Vec<ComplexMatrix>,
    pub z: ComplexMatrix,
    pub k: ComplexMatrix,
}

impl DualCandidate {
    /// Same `X` on every output.
    pub fn symmetric(x: ComplexMatrix, n: usize, z: ComplexMatrix, k: ComplexMatrix) -> Self {
        Self { x: vec![x; n], z, k }
    }

    pub fn objective(&self, d: usize) -> f64 {
        let phi = crate::linalg::max_entangled(d);
        self.x.iter().map(|x| x.trace_product_re(&phi)).sum()
    }

    /// `(Z ⊗ I - Σ X_j ⊗ I, K ⊗ I + Σ X_j ⊗ I)` on `(B, B1..Bn)`.
    pub fn slack_operators(&self, d: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let n = self.x.len();
        let layout = broadcast_layout(d, n)?;
        let mut sum = ComplexMatrix::zeros(layout.total_dim(), layout.total_dim());
        for (j, x) in self.x.iter().enumerate() {
            sum += &embed(x, &[INPUT_LABEL, &output_label(j + 1)], &layout)?;
        }
        let s1 = &embed(&self.z, &[INPUT_LABEL], &layout)? - &sum;
        let s2 = &embed(&self.k, &[INPUT_LABEL], &layout)? + &sum;
        Ok((s1, s2))
    }

    /// Values for every variable of [`build_dual`](super::build_dual),
    /// slacks included.
    pub fn to_named(&self, p: &SdpProblem) -> Result<NamedValues> {
        let (d, n) = require_kind(p, ProblemKind::Dual)?;
        if self.x.len() != n {
            return Err(Error::DimensionMismatch(format!("{} X blocks for n = {n}", self.x.len())));
        }
        let pair = HermitianBasis::new(d * d);
        let single = HermitianBasis::new(d);
        let mut values = NamedValues::new();
        for (j, x) in self.x.iter().enumerate() {
            x.require_hermitian(1e-12 * x.max_abs().max(1.0))?;
            for (k, v) in pair.encode(x)?.into_iter().enumerate() {
                values = values.scalar(coordinate_name(&format!("X{}", j + 1), k), v);
            }
        }
        for (name, m) in [("Z", &self.z), ("K", &self.k)] {
            m.require_hermitian(1e-12 * m.max_abs().max(1.0))?;
            for (k, v) in single.encode(m)?.into_iter().enumerate() {
                values = values.scalar(coordinate_name(name, k), v);
            }
        }
        let (s1, s2) = self.slack_operators(d)?;
        Ok(values
            .block("S1", s1)
            .block("S2", s2)
            .scalar("tZ", 1.0 - self.z.trace().re)
            .scalar("tK", 1.0 - self.k.trace().re))
    }
}

/// Completes the slacks of `candidate` and checks it against the dual program;
/// `block_margins` hold the minimum eigenvalues of the two operator inequalities.
pub fn check_feasible_dual(p: &SdpProblem, candidate: &DualCandidate, tol: f64) -> Result<FeasibilityReport> {
    let values = candidate.to_named(p)?;
    check_point(p, &p.point_from_named(&values)?, tol)
}

/// Reads the multipliers of a solved primal program as a dual point.
pub fn dual_candidate_from_primal(p: &SdpProblem, solution: &SdpSolution) -> Result<DualCandidate> {
    let (d, n) = require_kind(p, ProblemKind::Primal)?;
    let group = |name: &str, side: usize| -> Result<ComplexMatrix> {
        let g = p
            .groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        HermitianBasis::new(side).decode(&solution.equality_duals[g.start..g.start + g.len])
    };
    let x = (1..=n)
        .map(|j| group(&format!("marginal[{}]", output_label(j)), d * d))
        .collect::<Result<Vec<_>>>()?;
    let z = group("trace_preserving[J1]", d)?.scale(-1.0);
    let k = group("trace_preserving[J2]", d)?.scale(-1.0);
    Ok(DualCandidate { x, z, k })
}
