//! Broadcasting protocols as Choi operators.
//!
//! A map `Γ: B -> B1...Bn` is stored through its Choi operator
//! `J = Σ_ij |i><j|_B ⊗ Γ(|i><j|)` on the layout `(B, B1, ..., Bn)`. The
//! protocol is universal (reproduces every `rho_AB` on each `A Bj`) exactly
//! when every marginal `tr_{\B Bj} J` equals the unnormalized maximally
//! entangled operator `Φ_d`.

use serde::Serialize;

use crate::linalg::{
    embed, max_entangled, min_eigenvalue, partial_trace, permute, swap_operator, ComplexMatrix, SystemLayout, C64,
    HERMITIAN_TOL,
};
use crate::{Error, Result, SizeCap};

/// Label of the protocol input.
pub const INPUT_LABEL: &str = "B";

/// Tolerance for the CPTP checks performed when a decomposition is assembled.
pub const CPTP_TOL: f64 = 1e-9;

/// Label of the `j`-th output (1-based).
pub fn output_label(j: usize) -> String {
    format!("B{j}")
}

/// `(B, B1, ..., Bn)`, every factor of dimension `d`.
pub fn broadcast_layout(d: usize, n: usize) -> Result<SystemLayout> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension d must be positive".into()));
    }
    SystemLayout::new(
        std::iter::once((INPUT_LABEL.to_string(), d)).chain((1..=n).map(|j| (output_label(j), d))),
    )
}

/// Choi operator of a Hermitian-preserving map `B -> B1...Bn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    matrix: ComplexMatrix,
    layout: SystemLayout,
}

impl ChoiOperator {
    pub fn new(matrix: ComplexMatrix, layout: SystemLayout) -> Result<Self> {
        let side = matrix.require_square("Choi operator")?;
        if side != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "Choi side {side} does not match layout dimension {}",
                layout.total_dim()
            )));
        }
        match layout.subsystems().first() {
            Some(s) if s.label == INPUT_LABEL => {}
            _ => {
                return Err(Error::InvalidLayout(format!(
                    "Choi layout must start with the input `{INPUT_LABEL}`"
                )))
            }
        }
        if layout.len() < 2 {
            return Err(Error::InvalidLayout("Choi layout needs at least one output".into()));
        }
        matrix.require_hermitian(HERMITIAN_TOL * matrix.max_abs().max(1.0))?;
        Ok(Self { matrix, layout })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn input_dim(&self) -> usize {
        self.layout.subsystems()[0].dim
    }

    /// Number of outputs `n`.
    pub fn outputs(&self) -> usize {
        self.layout.len() - 1
    }

    pub fn output_labels(&self) -> Vec<&str> {
        self.layout.labels()[1..].to_vec()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Marginal channel `B -> Bj` obtained by discarding every other output.
    pub fn marginal(&self, output: &str) -> Result<ChoiOperator> {
        if output == INPUT_LABEL {
            return Err(Error::InvalidParameter("marginal target must be an output".into()));
        }
        let keep = [INPUT_LABEL, output];
        let m = partial_trace(&self.matrix, &self.layout, &keep)?;
        let layout = self.layout.retain(&keep)?;
        // retain keeps layout order; B always comes first
        ChoiOperator::new(m, layout)
    }

    /// `a * self - b * other` on the same layout.
    pub fn signed_combination(&self, a: f64, other: &ChoiOperator, b: f64) -> Result<ChoiOperator> {
        if self.layout != other.layout {
            return Err(Error::InvalidLayout("combined Choi operators must share a layout".into()));
        }
        let mut m = self.matrix.scale(a);
        m.axpy(-b, &other.matrix);
        ChoiOperator::new(m, self.layout.clone())
    }
}

/// Signed two-channel decomposition `Γ = p1 N1 - p2 N2` with CPTP `N1`, `N2`.
#[derive(Debug, Clone)]
pub struct HptpDecomposition {
    pub p1: f64,
    pub choi1: ChoiOperator,
    pub p2: f64,
    pub choi2: ChoiOperator,
}

impl HptpDecomposition {
    /// Validates that both channels are CPTP within [`CPTP_TOL`].
    pub fn new(p1: f64, choi1: ChoiOperator, p2: f64, choi2: ChoiOperator) -> Result<Self> {
        if !(p1 >= 0.0 && p2 >= 0.0 && p1.is_finite() && p2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be nonnegative, got p1={p1}, p2={p2}"
            )));
        }
        if choi1.layout != choi2.layout {
            return Err(Error::InvalidLayout("decomposition channels must share a layout".into()));
        }
        for (name, c) in [("N1", &choi1), ("N2", &choi2)] {
            let report = verify_cptp(c, 1.0, CPTP_TOL)?;
            if !report.pass {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not CPTP (min eigenvalue {:.3e}, trace-preservation deviation {:.3e})",
                    report.min_eigenvalue, report.max_tp_deviation
                )));
            }
        }
        Ok(Self { p1, choi1, p2, choi2 })
    }

    /// Sampling overhead `γ = p1 + p2`.
    pub fn gamma(&self) -> f64 {
        self.p1 + self.p2
    }

    /// Choi operator of the represented map `p1 N1 - p2 N2`.
    pub fn signed_choi(&self) -> Result<ChoiOperator> {
        self.choi1.signed_combination(self.p1, &self.choi2, self.p2)
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.choi1.layout
    }
}

fn phi_on(d: usize, labels: &[&str], layout: &SystemLayout) -> Result<ComplexMatrix> {
    embed(&max_entangled(d), labels, layout)
}

/// Warm-up 2-broadcasting map:
/// `(Φ_{BB1} ⊗ I_{B2} + Φ_{BB2} ⊗ I_{B1} - Φ_{B1B2} ⊗ I_B) / d`.
pub fn choi_warmup_2broadcast(d: usize) -> Result<ChoiOperator> {
    let layout = broadcast_layout(d, 2)?;
    let mut j = phi_on(d, &["B", "B1"], &layout)?;
    j += &phi_on(d, &["B", "B2"], &layout)?;
    j -= &phi_on(d, &["B1", "B2"], &layout)?;
    ChoiOperator::new(j.scale(1.0 / d as f64), layout)
}

/// Universal `n`-broadcasting map `Γ'` with the default size cap.
pub fn choi_universal_nbroadcast(d: usize, n: usize) -> Result<ChoiOperator> {
    choi_universal_nbroadcast_capped(d, n, SizeCap::default())
}

/// `Γ'`: `d^{1-n} Σ_j Φ_{BBj} ⊗ I - (n-1) d^{1-n} Φ_{B1B2} ⊗ I`.
/// For `n = 2` this is [`choi_warmup_2broadcast`].
pub fn choi_universal_nbroadcast_capped(d: usize, n: usize, cap: SizeCap) -> Result<ChoiOperator> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension d must be positive".into()));
    }
    cap.check_broadcast(d, n)?;
    let layout = broadcast_layout(d, n)?;
    let norm = (d as f64).powi(n as i32 - 1);
    let mut j = ComplexMatrix::zeros(layout.total_dim(), layout.total_dim());
    for k in 1..=n {
        j += &phi_on(d, &[INPUT_LABEL, &output_label(k)], &layout)?;
    }
    j.axpy(-((n - 1) as f64), &phi_on(d, &["B1", "B2"], &layout)?);
    ChoiOperator::new(j.scale(1.0 / norm), layout)
}

/// `Γ' = n M1 - (n-1) M2` with `M1 = (n d^{n-1})^{-1} Σ_j Φ_{BBj} ⊗ I` and
/// `M2 = d^{1-n} Φ_{B1B2} ⊗ I`, both CPTP.
pub fn gamma_prime_decomposition(d: usize, n: usize, cap: SizeCap) -> Result<HptpDecomposition> {
    if n < 2 || d == 0 {
        return Err(Error::InvalidParameter(format!("need d >= 1 and n >= 2, got d={d}, n={n}")));
    }
    cap.check_broadcast(d, n)?;
    let layout = broadcast_layout(d, n)?;
    let norm = (d as f64).powi(n as i32 - 1);
    let side = layout.total_dim();
    let mut m1 = ComplexMatrix::zeros(side, side);
    for k in 1..=n {
        m1 += &phi_on(d, &[INPUT_LABEL, &output_label(k)], &layout)?;
    }
    let m1 = ChoiOperator::new(m1.scale(1.0 / (n as f64 * norm)), layout.clone())?;
    let m2 = ChoiOperator::new(phi_on(d, &["B1", "B2"], &layout)?.scale(1.0 / norm), layout)?;
    HptpDecomposition::new(n as f64, m1, (n - 1) as f64, m2)
}

/// Optimal 2-broadcasting decomposition. With `M = Φ_{BB1} ⊗ I_{B2}` and
/// `N = I_B ⊗ F_{B1B2}`:
///
/// - `J1 = (M + NMN + MN + NM) / (2(d+1))`, weight `p1 = 2d/(d+1)`
/// - `J2 = (I - (d(M + NMN) - (MN + NM)) / (d²-1)) / (d²-2)`, weight `p2 = (d-1)/(d+1)`
///
/// Requires `d >= 2`.
pub fn choi_optimal_2broadcast(d: usize) -> Result<HptpDecomposition> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "the optimal 2-broadcasting protocol needs d >= 2, got d={d}"
        )));
    }
    let layout = broadcast_layout(d, 2)?;
    let df = d as f64;
    let side = layout.total_dim();
    let m = phi_on(d, &["B", "B1"], &layout)?;
    let nmn = phi_on(d, &["B", "B2"], &layout)?;
    let swap = embed(&swap_operator(d), &["B1", "B2"], &layout)?;
    let mn = &m * &swap;
    let nm = &swap * &m;
    let sym = &m + &nmn;
    let cross = (&mn + &nm).hermitian_part();

    let j1 = (&sym + &cross).scale(1.0 / (2.0 * (df + 1.0)));
    let mut inner = sym.scale(df);
    inner -= &cross;
    let mut j2 = ComplexMatrix::identity(side);
    j2.axpy(-1.0 / (df * df - 1.0), &inner);
    let j2 = j2.scale(1.0 / (df * df - 2.0));

    HptpDecomposition::new(
        2.0 * df / (df + 1.0),
        ChoiOperator::new(j1, layout.clone())?,
        (df - 1.0) / (df + 1.0),
        ChoiOperator::new(j2, layout)?,
    )
}

/// Applies the map to `rho`, which must contain a subsystem labelled `B` of the
/// Choi input dimension. Every other subsystem of `rho` is a reference system
/// and passes through unchanged. The output layout is the reference systems
/// (in their original order) followed by the Choi outputs.
///
/// Implements `Γ(rho) = tr_B[(rho^{T_B} ⊗ I_out)(I_ref ⊗ J)]`.
pub fn apply_choi(
    choi: &ChoiOperator,
    rho: &ComplexMatrix,
    rho_layout: &SystemLayout,
) -> Result<(ComplexMatrix, SystemLayout)> {
    let side = rho.require_square("state")?;
    if side != rho_layout.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state side {side} does not match layout dimension {}",
            rho_layout.total_dim()
        )));
    }
    let db = rho_layout.dim_of(INPUT_LABEL)?;
    if db != choi.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dim {db} on `{INPUT_LABEL}`, channel expects {}",
            choi.input_dim()
        )));
    }
    let refs: Vec<&str> = rho_layout.labels().into_iter().filter(|&l| l != INPUT_LABEL).collect();
    for out in choi.output_labels() {
        if refs.contains(&out) {
            return Err(Error::InvalidLayout(format!(
                "reference subsystem `{out}` clashes with a channel output"
            )));
        }
    }
    let mut order = refs.clone();
    order.push(INPUT_LABEL);
    let (rho_p, _) = permute(rho, rho_layout, &order)?;

    let da: usize = refs.iter().map(|l| rho_layout.dim_of(l).unwrap()).product();
    let dout = choi.layout.total_dim() / db;
    let jm = choi.matrix();
    let mut out = ComplexMatrix::zeros(da * dout, da * dout);
    let zero = C64::new(0.0, 0.0);
    for a in 0..da {
        for a2 in 0..da {
            for b in 0..db {
                for b2 in 0..db {
                    let r = rho_p[(a * db + b, a2 * db + b2)];
                    if r == zero {
                        continue;
                    }
                    for o in 0..dout {
                        let jrow = jm.row(b * dout + o);
                        let out_row = (a * dout + o) * (da * dout) + a2 * dout;
                        let dst = &mut out.data_mut()[out_row..out_row + dout];
                        for (d, &jv) in dst.iter_mut().zip(&jrow[b2 * dout..(b2 + 1) * dout]) {
                            *d += r * jv;
                        }
                    }
                }
            }
        }
    }
    let ref_layout = rho_layout.retain(&refs)?;
    let outputs = choi.layout.retain(&choi.output_labels())?;
    Ok((out, ref_layout.join(&outputs)?))
}

/// Per-output deviation of the Choi marginals from `Φ_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalityReport {
    pub deviations: Vec<f64>,
    pub pass: bool,
}

impl UniversalityReport {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks `max |tr_{\B Bj} J - Φ_d| <= tol` for every output `j`.
pub fn verify_universal(choi: &ChoiOperator, tol: f64) -> Result<UniversalityReport> {
    let d = choi.input_dim();
    let phi = max_entangled(d);
    let mut deviations = Vec::with_capacity(choi.outputs());
    for out in choi.output_labels() {
        let marginal = choi.marginal(out)?;
        let dev = if marginal.matrix.side() == phi.side() {
            marginal.matrix.max_abs_diff(&phi)
        } else {
            f64::INFINITY
        };
        deviations.push(dev);
    }
    let pass = deviations.iter().all(|&x| x <= tol);
    Ok(UniversalityReport { deviations, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CptpReport {
    pub min_eigenvalue: f64,
    pub max_tp_deviation: f64,
    pub pass: bool,
}

/// Checks `J >= -tol` and `tr_out J = scale * I_B` within `tol`.
pub fn verify_cptp(choi: &ChoiOperator, scale: f64, tol: f64) -> Result<CptpReport> {
    let min_eigenvalue = min_eigenvalue(&choi.matrix)?;
    let reduced = partial_trace(&choi.matrix, &choi.layout, &[INPUT_LABEL])?;
    let target = ComplexMatrix::identity(choi.input_dim()).scale(scale);
    let max_tp_deviation = reduced.max_abs_diff(&target);
    Ok(CptpReport {
        min_eigenvalue,
        max_tp_deviation,
        pass: min_eigenvalue >= -tol && max_tp_deviation <= tol,
    })
}
