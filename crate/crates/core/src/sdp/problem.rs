use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HermitianBasis, SparseHermitian};
use crate::choi::{broadcast_layout, output_label, INPUT_LABEL};
use crate::linalg::{embed_entries, max_entangled, ComplexMatrix, SystemLayout, C64};
use crate::{Error, Result, SizeCap};

/// JSON schema tag of [`SdpProblem::to_json`].
pub const SDP_SCHEMA: &str = "vbroadcast-sdp/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub d: usize,
    pub n: usize,
    pub kind: ProblemKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockVar {
    pub name: String,
    pub side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarDomain {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarVar {
    pub name: String,
    pub domain: ScalarDomain,
}

/// `Σ_b tr(C_b X_b) + Σ_s c_s x_s`, variables addressed by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub blocks: Vec<(usize, SparseHermitian)>,
    pub scalars: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(mut self, index: usize, coeff: SparseHermitian) -> Self {
        if !coeff.is_zero() {
            self.blocks.push((index, coeff));
        }
        self
    }

    pub fn scalar(mut self, index: usize, coeff: f64) -> Self {
        if coeff != 0.0 {
            self.scalars.push((index, coeff));
        }
        self
    }

    pub fn evaluate(&self, point: &Point) -> f64 {
        let b: f64 = self.blocks.iter().map(|(i, c)| c.dot(&point.blocks[*i])).sum();
        let s: f64 = self.scalars.iter().map(|(i, c)| c * point.scalars[*i]).sum();
        b + s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub form: LinearForm,
    pub rhs: f64,
}

/// Consecutive equalities that came from one operator constraint.
///
/// With `basis_side = Some(s)` the group holds the `s²` coordinates of a
/// Hermitian operator equation in [`HermitianBasis`] order, and its residual
/// is reported as the largest entry of the decoded residual operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
    pub basis_side: Option<usize>,
}

/// Values for every variable of a problem, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub blocks: Vec<ComplexMatrix>,
    pub scalars: Vec<f64>,
}

/// Variable values addressed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NamedValues {
    pub blocks: BTreeMap<String, ComplexMatrix>,
    pub scalars: BTreeMap<String, f64>,
}

impl NamedValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn block(mut self, name: impl Into<String>, value: ComplexMatrix) -> Self {
        self.blocks.insert(name.into(), value);
        self
    }

    pub fn scalar(mut self, name: impl Into<String>, value: f64) -> Self {
        self.scalars.insert(name.into(), value);
        self
    }
}

/// Standard-form SDP over Hermitian PSD blocks and real scalars, with linear
/// equality constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub meta: Option<ProblemMeta>,
    pub sense: Sense,
    pub blocks: Vec<BlockVar>,
    pub scalars: Vec<ScalarVar>,
    pub objective: LinearForm,
    pub equalities: Vec<Equality>,
    pub groups: Vec<EqualityGroup>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            meta: None,
            sense,
            blocks: Vec::new(),
            scalars: Vec::new(),
            objective: LinearForm::new(),
            equalities: Vec::new(),
            groups: Vec::new(),
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, side: usize) -> usize {
        self.blocks.push(BlockVar { name: name.into(), side });
        self.blocks.len() - 1
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, domain: ScalarDomain) -> usize {
        self.scalars.push(ScalarVar { name: name.into(), domain });
        self.scalars.len() - 1
    }

    /// Appends equalities as one named group.
    pub fn add_group(&mut self, name: impl Into<String>, basis_side: Option<usize>, eqs: Vec<Equality>) {
        let start = self.equalities.len();
        let len = eqs.len();
        self.equalities.extend(eqs);
        self.groups.push(EqualityGroup { name: name.into(), start, len, basis_side });
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn scalar_index(&self, name: &str) -> Option<usize> {
        self.scalars.iter().position(|s| s.name == name)
    }

    /// Checks indices, sides and Hermiticity of every coefficient, and that the
    /// groups tile the equality list.
    pub fn validate(&self) -> Result<()> {
        let check_form = |form: &LinearForm, what: &str| -> Result<()> {
            for (i, c) in &form.blocks {
                let block = self
                    .blocks
                    .get(*i)
                    .ok_or_else(|| Error::UnknownVariable(format!("block #{i} in {what}")))?;
                if c.side() != block.side {
                    return Err(Error::DimensionMismatch(format!(
                        "{what}: coefficient side {} on block {} of side {}",
                        c.side(),
                        block.name,
                        block.side
                    )));
                }
                let tol = 1e-12 * c.max_abs().max(1.0);
                let asymmetry = c.hermitian_defect();
                if asymmetry > tol {
                    return Err(Error::NotHermitian { asymmetry, tol });
                }
            }
            for (i, c) in &form.scalars {
                if *i >= self.scalars.len() {
                    return Err(Error::UnknownVariable(format!("scalar #{i} in {what}")));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidParameter(format!("{what}: non-finite coefficient")));
                }
            }
            Ok(())
        };
        check_form(&self.objective, "objective")?;
        for (k, eq) in self.equalities.iter().enumerate() {
            check_form(&eq.form, &format!("equality {k}"))?;
            if !eq.rhs.is_finite() {
                return Err(Error::InvalidParameter(format!("equality {k}: non-finite right-hand side")));
            }
        }
        let mut next = 0;
        for g in &self.groups {
            if g.start != next {
                return Err(Error::InvalidParameter(format!("group {} does not start at {next}", g.name)));
            }
            if let Some(s) = g.basis_side {
                if s * s != g.len {
                    return Err(Error::InvalidParameter(format!("group {} has basis side {s} but {} rows", g.name, g.len)));
                }
            }
            next += g.len;
        }
        if next != self.equalities.len() {
            return Err(Error::InvalidParameter("equality groups do not cover every equality".into()));
        }
        Ok(())
    }

    /// Resolves names, checking shapes; every variable must be given.
    pub fn point_from_named(&self, values: &NamedValues) -> Result<Point> {
        for name in values.blocks.keys() {
            if self.block_index(name).is_none() {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        for name in values.scalars.keys() {
            if self.scalar_index(name).is_none() {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let m = values
                    .blocks
                    .get(&b.name)
                    .ok_or_else(|| Error::UnknownVariable(format!("missing block {}", b.name)))?;
                if m.rows() != b.side || m.cols() != b.side {
                    return Err(Error::DimensionMismatch(format!(
                        "block {} expects side {}, got {}x{}",
                        b.name,
                        b.side,
                        m.rows(),
                        m.cols()
                    )));
                }
                Ok(m.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let scalars = self
            .scalars
            .iter()
            .map(|s| {
                values
                    .scalars
                    .get(&s.name)
                    .copied()
                    .ok_or_else(|| Error::UnknownVariable(format!("missing scalar {}", s.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Point { blocks, scalars })
    }

    pub fn objective_value(&self, point: &Point) -> f64 {
        self.objective.evaluate(point)
    }

    /// `A(x) - b`, one entry per equality.
    pub fn residuals(&self, point: &Point) -> Vec<f64> {
        self.equalities.iter().map(|e| e.form.evaluate(point) - e.rhs).collect()
    }

    /// Largest residual of each group (decoded operator entry for basis groups).
    pub fn group_residuals(&self, residuals: &[f64]) -> Vec<(String, f64)> {
        self.groups
            .iter()
            .map(|g| {
                let slice = &residuals[g.start..g.start + g.len];
                let r = match g.basis_side {
                    Some(s) => HermitianBasis::new(s).decode(slice).map(|m| m.max_abs()).unwrap_or(f64::NAN),
                    None => slice.iter().fold(0.0f64, |a, x| a.max(x.abs())),
                };
                (g.name.clone(), r)
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let form_json = |f: &LinearForm| {
            serde_json::json!({
                "blocks": f.blocks.iter().map(|(i, c)| serde_json::json!({
                    "block": self.blocks[*i].name,
                    "entries": c.entries().iter().map(|(r, col, v)| serde_json::json!([r, col, [v.re, v.im]])).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "scalars": f.scalars.iter().map(|(i, c)| serde_json::json!({
                    "scalar": self.scalars[*i].name,
                    "coeff": c,
                })).collect::<Vec<_>>(),
            })
        };
        let group_of = |k: usize| {
            self.groups
                .iter()
                .find(|g| k >= g.start && k < g.start + g.len)
                .map(|g| g.name.clone())
        };
        serde_json::json!({
            "schema": SDP_SCHEMA,
            "meta": self.meta,
            "sense": self.sense,
            "blocks": self.blocks,
            "scalars": self.scalars,
            "objective": form_json(&self.objective),
            "equalities": self.equalities.iter().enumerate().map(|(k, e)| serde_json::json!({
                "group": group_of(k),
                "form": form_json(&e.form),
                "rhs": e.rhs,
            })).collect::<Vec<_>>(),
            "groups": self.groups,
        })
    }

    /// Inverse of [`to_json`](Self::to_json).
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let bad = |what: &str| Error::InvalidParameter(format!("sdp document: {what}"));
        let schema = value.get("schema").and_then(|s| s.as_str()).ok_or_else(|| bad("missing schema"))?;
        if schema != SDP_SCHEMA {
            return Err(bad(&format!("unsupported schema {schema}")));
        }
        let take = |key: &str| value.get(key).cloned().ok_or_else(|| bad(&format!("missing {key}")));
        let mut p = SdpProblem::new(serde_json::from_value(take("sense")?).map_err(|e| bad(&e.to_string()))?);
        p.meta = serde_json::from_value(take("meta")?).map_err(|e| bad(&e.to_string()))?;
        p.blocks = serde_json::from_value(take("blocks")?).map_err(|e| bad(&e.to_string()))?;
        p.scalars = serde_json::from_value(take("scalars")?).map_err(|e| bad(&e.to_string()))?;
        p.groups = serde_json::from_value(take("groups")?).map_err(|e| bad(&e.to_string()))?;

        #[derive(Deserialize)]
        struct BlockTerm {
            block: String,
            entries: Vec<(usize, usize, [f64; 2])>,
        }
        #[derive(Deserialize)]
        struct ScalarTerm {
            scalar: String,
            coeff: f64,
        }
        #[derive(Deserialize)]
        struct Form {
            blocks: Vec<BlockTerm>,
            scalars: Vec<ScalarTerm>,
        }
        #[derive(Deserialize)]
        struct Eq {
            form: Form,
            rhs: f64,
        }
        let to_form = |f: Form, p: &SdpProblem| -> Result<LinearForm> {
            let mut out = LinearForm::new();
            for t in f.blocks {
                let i = p.block_index(&t.block).ok_or_else(|| Error::UnknownVariable(t.block.clone()))?;
                let entries = t.entries.into_iter().map(|(r, c, [re, im])| (r, c, C64::new(re, im))).collect();
                out.blocks.push((i, SparseHermitian::new(p.blocks[i].side, entries)?));
            }
            for t in f.scalars {
                let i = p.scalar_index(&t.scalar).ok_or_else(|| Error::UnknownVariable(t.scalar.clone()))?;
                out.scalars.push((i, t.coeff));
            }
            Ok(out)
        };
        let objective: Form = serde_json::from_value(take("objective")?).map_err(|e| bad(&e.to_string()))?;
        p.objective = to_form(objective, &p)?;
        let eqs: Vec<Eq> = serde_json::from_value(take("equalities")?).map_err(|e| bad(&e.to_string()))?;
        for e in eqs {
            let form = to_form(e.form, &p)?;
            p.equalities.push(Equality { form, rhs: e.rhs });
        }
        p.validate()?;
        Ok(p)
    }
}

/// Embeds every element of the Hermitian basis on `labels` into `layout`.
fn embedded_basis(labels: &[&str], layout: &SystemLayout) -> Result<Vec<SparseHermitian>> {
    let side: usize = labels.iter().map(|l| layout.dim_of(l)).product::<Result<usize>>()?;
    let basis = HermitianBasis::new(side);
    (0..basis.len())
        .map(|k| {
            let entries = embed_entries(basis.element(k).entries(), labels, layout)?;
            SparseHermitian::new(layout.total_dim(), entries)
        })
        .collect()
}

pub fn build_primal(d: usize, n: usize) -> Result<SdpProblem> {
    build_primal_capped(d, n, SizeCap::from_env())
}

/// Cost program over a pair of unnormalized Choi operators `J1 = p1 J^{N1}`,
/// `J2 = p2 J^{N2}`: minimize `p1 + p2` subject to every `B Bj` marginal of
/// `J1 - J2` being `Φ_d` and `tr_{B1..Bn} Ji = pi I_B`.
pub fn build_primal_capped(d: usize, n: usize, cap: SizeCap) -> Result<SdpProblem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    let side = cap.check_broadcast(d, n)?;
    let layout = broadcast_layout(d, n)?;
    let mut p = SdpProblem::new(Sense::Minimize);
    p.meta = Some(ProblemMeta { d, n, kind: ProblemKind::Primal });
    let j1 = p.add_block("J1", side);
    let j2 = p.add_block("J2", side);
    let p1 = p.add_scalar("p1", ScalarDomain::NonNegative);
    let p2 = p.add_scalar("p2", ScalarDomain::NonNegative);
    p.objective = LinearForm::new().scalar(p1, 1.0).scalar(p2, 1.0);

    let phi = HermitianBasis::new(d * d).encode(&max_entangled(d))?;
    for j in 1..=n {
        let out = output_label(j);
        let emb = embedded_basis(&[INPUT_LABEL, &out], &layout)?;
        let eqs = emb
            .into_iter()
            .zip(&phi)
            .map(|(e, &rhs)| Equality {
                form: LinearForm::new().block(j1, e.clone()).block(j2, e.scale(-1.0)),
                rhs,
            })
            .collect();
        p.add_group(format!("marginal[{out}]"), Some(d * d), eqs);
    }
    let emb = embedded_basis(&[INPUT_LABEL], &layout)?;
    for (block, scalar, name) in [(j1, p1, "J1"), (j2, p2, "J2")] {
        let eqs = emb
            .iter()
            .enumerate()
            .map(|(k, e)| {
                // tr E_k, nonzero on diagonal elements only
                let tr = if k / d == k % d { 1.0 } else { 0.0 };
                Equality {
                    form: LinearForm::new().block(block, e.clone()).scalar(scalar, -tr),
                    rhs: 0.0,
                }
            })
            .collect();
        p.add_group(format!("trace_preserving[{name}]"), Some(d), eqs);
    }
    Ok(p)
}

pub fn build_dual(d: usize, n: usize) -> Result<SdpProblem> {
    build_dual_capped(d, n, SizeCap::from_env())
}

/// Name of the `k`-th basis coordinate of a free Hermitian dual variable.
pub fn coordinate_name(var: &str, k: usize) -> String {
    format!("{var}[{k}]")
}

/// Dual of the cost program: maximize `Σ_j tr(X_j Φ)` subject to
/// `tr Z ≤ 1`, `tr K ≤ 1`, `Z ⊗ I - Σ_j X_j ⊗ I ⪰ 0` and
/// `K ⊗ I + Σ_j X_j ⊗ I ⪰ 0`.
///
/// `X_j` (on `B Bj`), `Z` and `K` (on `B`) are free Hermitian variables
/// stored as basis coordinates `X{j}[k]`, `Z[k]`, `K[k]`. The inequalities
/// become PSD slack blocks `S1`, `S2` and nonnegative scalars `tZ`, `tK`.
pub fn build_dual_capped(d: usize, n: usize, cap: SizeCap) -> Result<SdpProblem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    let side = cap.check_broadcast(d, n)?;
    let layout = broadcast_layout(d, n)?;
    let mut p = SdpProblem::new(Sense::Maximize);
    p.meta = Some(ProblemMeta { d, n, kind: ProblemKind::Dual });
    let s1 = p.add_block("S1", side);
    let s2 = p.add_block("S2", side);
    let tz = p.add_scalar("tZ", ScalarDomain::NonNegative);
    let tk = p.add_scalar("tK", ScalarDomain::NonNegative);

    // (scalar index, sign in S1 row, sign in S2 row, embedded coordinates)
    type Column = (usize, f64, f64, Vec<(usize, f64)>);
    let mut columns: Vec<Column> = Vec::new();
    let phi = HermitianBasis::new(d * d).encode(&max_entangled(d))?;
    let mut objective = LinearForm::new();
    for j in 1..=n {
        let out = output_label(j);
        let var = format!("X{j}");
        for (k, e) in embedded_basis(&[INPUT_LABEL, &out], &layout)?.into_iter().enumerate() {
            let idx = p.add_scalar(coordinate_name(&var, k), ScalarDomain::Free);
            objective = objective.scalar(idx, phi[k]);
            columns.push((idx, 1.0, -1.0, e.basis_coefficients()));
        }
    }
    let on_b = embedded_basis(&[INPUT_LABEL], &layout)?;
    let mut trace_rows = Vec::new();
    for (var, sign1, sign2, slack) in [("Z", -1.0, 0.0, tz), ("K", 0.0, -1.0, tk)] {
        let mut form = LinearForm::new().scalar(slack, 1.0);
        for (k, e) in on_b.iter().enumerate() {
            let idx = p.add_scalar(coordinate_name(var, k), ScalarDomain::Free);
            if k / d == k % d {
                form = form.scalar(idx, 1.0);
            }
            columns.push((idx, sign1, sign2, e.basis_coefficients()));
        }
        trace_rows.push((var, Equality { form, rhs: 1.0 }));
    }
    p.objective = objective;

    let basis = HermitianBasis::new(side);
    for (block, which) in [(s1, 1), (s2, 2)] {
        let mut rows: Vec<LinearForm> =
            (0..basis.len()).map(|k| LinearForm::new().block(block, basis.element(k))).collect();
        for (idx, sign1, sign2, coords) in &columns {
            let sign = if which == 1 { *sign1 } else { *sign2 };
            if sign == 0.0 {
                continue;
            }
            for &(k, v) in coords {
                rows[k] = std::mem::take(&mut rows[k]).scalar(*idx, sign * v);
            }
        }
        let eqs = rows.into_iter().map(|form| Equality { form, rhs: 0.0 }).collect();
        p.add_group(format!("slack[S{which}]"), Some(side), eqs);
    }
    for (var, eq) in trace_rows {
        p.add_group(format!("trace[{var}]"), None, vec![eq]);
    }
    Ok(p)
}
