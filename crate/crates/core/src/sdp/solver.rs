//! Infeasible primal-dual path-following method with HKM search direction and
//! Mehrotra predictor-corrector, on complex Hermitian blocks.
//!
//! Internally every problem is `min <C, X> + c_f·x_f` subject to
//! `A(X) + B x_f = b`, `X ⪰ 0`, where nonnegative scalars are `1x1` blocks
//! and `x_f` are the free scalars. Linearly dependent equalities and free
//! columns are removed up front.

use serde::{Deserialize, Serialize};

use super::problem::{Point, ScalarDomain, Sense, SdpProblem};
use super::SparseHermitian;
use crate::linalg::{cholesky, eigvalsh, hpd_inverse, solve_lower, ComplexMatrix, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-7, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleDetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// Objective of the problem at the returned primal point.
    pub primal_objective: f64,
    /// Objective of the Lagrange dual at the returned multipliers.
    pub dual_objective: f64,
    /// `primal - dual` for minimization, `dual - primal` for maximization.
    pub gap: f64,
    pub relative_gap: f64,
    /// `||b - A(x)|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - A*(y) - S|| / (1 + ||C||)`.
    pub dual_residual: f64,
    pub block_values: Vec<(String, ComplexMatrix)>,
    pub scalar_values: Vec<(String, f64)>,
    /// Multiplier of every equality, in the problem's own sense
    /// (`objective - Σ y_i (form_i - rhs_i)` is stationary).
    pub equality_duals: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl SdpSolution {
    pub fn point(&self) -> Point {
        Point {
            blocks: self.block_values.iter().map(|(_, m)| m.clone()).collect(),
            scalars: self.scalar_values.iter().map(|(_, v)| *v).collect(),
        }
    }

    pub fn block(&self, name: &str) -> Option<&ComplexMatrix> {
        self.block_values.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalar_values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, Copy)]
enum ConeSource {
    Block(usize),
    Scalar(usize),
}

#[derive(Debug, Clone)]
struct Row {
    cone: Vec<(usize, SparseHermitian)>,
    free: Vec<(usize, f64)>,
    rhs: f64,
}

/// Internal minimization form.
struct StdForm {
    sides: Vec<usize>,
    source: Vec<ConeSource>,
    free_source: Vec<usize>,
    c_cone: Vec<SparseHermitian>,
    c_free: Vec<f64>,
    rows: Vec<Row>,
    /// original equality index of every kept row
    row_source: Vec<usize>,
    sign: f64,
}

impl StdForm {
    fn build(p: &SdpProblem) -> Self {
        let sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut sides: Vec<usize> = p.blocks.iter().map(|b| b.side).collect();
        let mut source: Vec<ConeSource> = (0..p.blocks.len()).map(ConeSource::Block).collect();
        let mut scalar_slot = vec![(false, 0usize); p.scalars.len()];
        let mut free_source = Vec::new();
        for (i, s) in p.scalars.iter().enumerate() {
            match s.domain {
                ScalarDomain::NonNegative => {
                    scalar_slot[i] = (true, sides.len());
                    sides.push(1);
                    source.push(ConeSource::Scalar(i));
                }
                ScalarDomain::Free => {
                    scalar_slot[i] = (false, free_source.len());
                    free_source.push(i);
                }
            }
        }
        let convert = |form: &super::problem::LinearForm, scale: f64| {
            let mut cone: Vec<(usize, SparseHermitian)> =
                form.blocks.iter().map(|(b, c)| (*b, c.scale(scale))).collect();
            let mut free = Vec::new();
            for &(s, v) in &form.scalars {
                match scalar_slot[s] {
                    (true, k) => cone.push((k, SparseHermitian::scalar(scale * v))),
                    (false, k) => free.push((k, scale * v)),
                }
            }
            // merge repeated terms on one variable
            cone.sort_by_key(|(k, _)| *k);
            let mut merged: Vec<(usize, SparseHermitian)> = Vec::with_capacity(cone.len());
            for (k, c) in cone {
                match merged.last_mut() {
                    Some((last, acc)) if *last == k => {
                        let mut e = acc.entries().to_vec();
                        e.extend_from_slice(c.entries());
                        *acc = SparseHermitian::new(c.side(), e).expect("same side");
                    }
                    _ => merged.push((k, c)),
                }
            }
            merged.retain(|(_, c)| !c.is_zero());
            free.sort_by_key(|(k, _)| *k);
            let mut fm: Vec<(usize, f64)> = Vec::with_capacity(free.len());
            for (k, v) in free {
                match fm.last_mut() {
                    Some((last, acc)) if *last == k => *acc += v,
                    _ => fm.push((k, v)),
                }
            }
            fm.retain(|(_, v)| *v != 0.0);
            (merged, fm)
        };
        let (obj_cone, obj_free) = convert(&p.objective, sign);
        let mut c_cone: Vec<SparseHermitian> =
            sides.iter().map(|&s| SparseHermitian::new(s, Vec::new()).expect("empty")).collect();
        for (k, c) in obj_cone {
            c_cone[k] = c;
        }
        let mut c_free = vec![0.0; free_source.len()];
        for (k, v) in obj_free {
            c_free[k] = v;
        }
        let rows = p
            .equalities
            .iter()
            .map(|e| {
                let (cone, free) = convert(&e.form, 1.0);
                Row { cone, free, rhs: e.rhs }
            })
            .collect::<Vec<_>>();
        let row_source = (0..rows.len()).collect();
        StdForm { sides, source, free_source, c_cone, c_free, rows, row_source, sign }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn nf(&self) -> usize {
        self.c_free.len()
    }

    fn row_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.rows[i], &self.rows[j]);
        let mut acc = 0.0;
        let mut q = 0;
        for (k, ca) in &a.cone {
            while q < b.cone.len() && b.cone[q].0 < *k {
                q += 1;
            }
            if q < b.cone.len() && b.cone[q].0 == *k {
                acc += ca.dot_sparse(&b.cone[q].1);
            }
        }
        let mut q = 0;
        for (k, va) in &a.free {
            while q < b.free.len() && b.free[q].0 < *k {
                q += 1;
            }
            if q < b.free.len() && b.free[q].0 == *k {
                acc += va * b.free[q].1;
            }
        }
        acc
    }

    /// `A(X) + B x_f`.
    fn apply(&self, x: &[ComplexMatrix], xf: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.cone.iter().map(|(k, c)| c.dot(&x[*k])).sum::<f64>()
                    + r.free.iter().map(|(k, v)| v * xf[*k]).sum::<f64>()
            })
            .collect()
    }

    /// `A*(y)` per cone block.
    fn adjoint_cone(&self, y: &[f64]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self.sides.iter().map(|&s| ComplexMatrix::zeros(s, s)).collect();
        for (r, &yi) in self.rows.iter().zip(y) {
            for (k, c) in &r.cone {
                c.add_to(&mut out[*k], yi);
            }
        }
        out
    }

    /// `B^T y`.
    fn adjoint_free(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nf()];
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(k, v) in &r.free {
                out[k] += v * yi;
            }
        }
        out
    }
}

/// Dot product with four independent accumulators, so it vectorizes.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Lower Cholesky factor in place (row-major, `n x n`); `Err` at a
/// non-positive pivot.
fn chol_real(a: &mut [f64], n: usize) -> std::result::Result<(), usize> {
    for j in 0..n {
        let row = &a[j * n..j * n + j];
        let diag = a[j * n + j] - dot4(row, row);
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(j);
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let lj = &upper[j * n..j * n + j];
            lower[j] = (lower[j] - dot4(&lower[..j], lj)) / diag;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place.
fn chol_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        b[i] = (b[i] - dot4(row, &b[..i])) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Greedy pivoted Cholesky of a PSD Gram matrix. Returns the pivot order
/// (independent indices first, `rank` of them) and the factor columns
/// `l[i][0..rank]` for every original index `i`.
fn pivoted_cholesky(g: &[f64], n: usize, rel_tol: f64) -> (Vec<usize>, usize, Vec<Vec<f64>>) {
    let mut diag: Vec<f64> = (0..n).map(|i| g[i * n + i]).collect();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let mut l: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut rank = 0;
    while rank < n {
        let (best, &val) = match diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        {
            Some(x) => x,
            None => break,
        };
        if !(val > rel_tol * max_diag.max(f64::MIN_POSITIVE)) {
            break;
        }
        used[best] = true;
        order.push(best);
        let piv = val.sqrt();
        let lb = l[best].clone();
        for i in 0..n {
            if used[i] && i != best {
                l[i].push(0.0);
                continue;
            }
            let v = if i == best { piv } else { (g[i * n + best] - dot4(&l[i], &lb)) / piv };
            l[i].push(v);
            if i != best {
                diag[i] -= v * v;
            }
        }
        rank += 1;
    }
    order.extend((0..n).filter(|i| !used[*i]));
    (order, rank, l)
}

/// Expresses each dependent index as a combination of the independent ones
/// and checks that `values` follow the same combination.
fn dependent_consistent(order: &[usize], rank: usize, l: &[Vec<f64>], values: &[f64], tol: f64) -> bool {
    let pivots = &order[..rank];
    // factor restricted to pivots: row p holds l[pivots[p]][0..=p]
    for &i in &order[rank..] {
        // L_I^T alpha = l_i
        let mut alpha = l[i][..rank].to_vec();
        for p in (0..rank).rev() {
            let lp = l[pivots[p]][p];
            alpha[p] /= lp;
            for q in 0..p {
                alpha[q] -= l[pivots[p]][q] * alpha[p];
            }
        }
        let predicted: f64 = pivots.iter().zip(&alpha).map(|(&k, a)| a * values[k]).sum();
        if (predicted - values[i]).abs() > tol {
            return false;
        }
    }
    true
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest `α ≤ 1/τ`-free step with `X + α dX ⪰ 0`, from the Cholesky
/// factor of `X`.
fn max_step(x_chol: &ComplexMatrix, dx: &ComplexMatrix) -> Result<f64> {
    if x_chol.side() == 1 {
        let x = x_chol[(0, 0)].re * x_chol[(0, 0)].re;
        let d = dx[(0, 0)].re;
        return Ok(if d < 0.0 { -x / d } else { f64::INFINITY });
    }
    let w = solve_lower(x_chol, dx);
    let w2 = solve_lower(x_chol, &w.adjoint());
    let lam = eigvalsh(&w2.hermitian_part())?;
    let min = *lam.last().unwrap_or(&0.0);
    Ok(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

fn chol_block(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.side() == 1 {
        let v = m[(0, 0)].re;
        if !(v > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        return Ok(ComplexMatrix::diagonal(&[v.sqrt()]));
    }
    cholesky(m)
}

fn inverse_block(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.side() == 1 {
        return Ok(ComplexMatrix::diagonal(&[1.0 / m[(0, 0)].re]));
    }
    hpd_inverse(m)
}

struct Iterate {
    x: Vec<ComplexMatrix>,
    xf: Vec<f64>,
    y: Vec<f64>,
    s: Vec<ComplexMatrix>,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    relp: f64,
    reld: f64,
    relgap: f64,
}

impl Measures {
    fn merit(&self) -> f64 {
        self.relp.max(self.reld).max(self.relgap)
    }
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    if !(opts.feas_tol > 0.0 && opts.gap_tol > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    let mut sf = StdForm::build(p);
    let b_all: Vec<f64> = sf.rows.iter().map(|r| r.rhs).collect();
    let b_scale = 1.0 + b_all.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    // dependent rows
    let m_all = sf.m();
    let mut gram = vec![0.0; m_all * m_all];
    for i in 0..m_all {
        for j in 0..=i {
            let v = sf.row_dot(i, j);
            gram[i * m_all + j] = v;
            gram[j * m_all + i] = v;
        }
    }
    let (order, rank, lfac) = pivoted_cholesky(&gram, m_all, 1e-11);
    drop(gram);
    if !dependent_consistent(&order, rank, &lfac, &b_all, 1e-8 * b_scale) {
        return Ok(infeasible_solution(p, &sf));
    }
    let mut keep: Vec<usize> = order[..rank].to_vec();
    keep.sort_unstable();
    sf.rows = keep.iter().map(|&i| sf.rows[i].clone()).collect();
    sf.row_source = keep;

    // dependent free columns
    let nf_all = sf.nf();
    let mut free_active = vec![true; nf_all];
    if nf_all > 0 {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nf_all];
        for (i, r) in sf.rows.iter().enumerate() {
            for &(k, v) in &r.free {
                cols[k].push((i, v));
            }
        }
        let mut g = vec![0.0; nf_all * nf_all];
        let mut dense_col = vec![0.0; sf.m()];
        for a in 0..nf_all {
            for &(i, v) in &cols[a] {
                dense_col[i] = v;
            }
            for b in 0..=a {
                let v: f64 = cols[b].iter().map(|&(i, w)| w * dense_col[i]).sum();
                g[a * nf_all + b] = v;
                g[b * nf_all + a] = v;
            }
            for &(i, _) in &cols[a] {
                dense_col[i] = 0.0;
            }
        }
        let (order, rank, lfac) = pivoted_cholesky(&g, nf_all, 1e-11);
        let c_scale = 1.0 + sf.c_free.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !dependent_consistent(&order, rank, &lfac, &sf.c_free, 1e-8 * c_scale) {
            return Ok(infeasible_solution(p, &sf));
        }
        for &k in &order[rank..] {
            free_active[k] = false;
        }
        if rank < nf_all {
            // remap free indices to the active ones
            let mut map = vec![usize::MAX; nf_all];
            let mut next = 0;
            for k in 0..nf_all {
                if free_active[k] {
                    map[k] = next;
                    next += 1;
                }
            }
            for r in &mut sf.rows {
                r.free = r.free.iter().filter(|(k, _)| free_active[*k]).map(|&(k, v)| (map[k], v)).collect();
            }
            sf.c_free = (0..nf_all).filter(|&k| free_active[k]).map(|k| sf.c_free[k]).collect();
            sf.free_source = (0..nf_all).filter(|&k| free_active[k]).map(|k| sf.free_source[k]).collect();
        }
    }

    let (it, iterations, status) = path_following(&sf, opts)?;
    Ok(assemble(p, &sf, &it, iterations, status))
}

fn measures(sf: &StdForm, it: &Iterate, b: &[f64], b_norm: f64, c_norm: f64) -> Measures {
    let ax = sf.apply(&it.x, &it.xf);
    let rp: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let aty = sf.adjoint_cone(&it.y);
    let mut rd2 = 0.0;
    for k in 0..sf.sides.len() {
        let mut r = sf.c_cone[k].to_dense();
        r -= &aty[k];
        r -= &it.s[k];
        rd2 += r.frobenius_norm().powi(2);
    }
    let btf = sf.adjoint_free(&it.y);
    rd2 += sf.c_free.iter().zip(&btf).map(|(c, v)| (c - v).powi(2)).sum::<f64>();
    let pobj: f64 = sf.c_cone.iter().zip(&it.x).map(|(c, x)| c.dot(x)).sum::<f64>()
        + sf.c_free.iter().zip(&it.xf).map(|(c, x)| c * x).sum::<f64>();
    let dobj: f64 = b.iter().zip(&it.y).map(|(b, y)| b * y).sum();
    Measures {
        pobj,
        dobj,
        relp: norm(&rp) / (1.0 + b_norm),
        reld: rd2.sqrt() / (1.0 + c_norm),
        relgap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
    }
}

/// Schur complement `M_ij = Re tr(A_i X A_j S^{-1})`.
fn schur(sf: &StdForm, x: &[ComplexMatrix], sinv: &[ComplexMatrix]) -> Vec<f64> {
    let m = sf.m();
    let mut out = vec![0.0; m * m];
    let mut per_cone: Vec<Vec<(usize, &SparseHermitian)>> = vec![Vec::new(); sf.sides.len()];
    for (i, r) in sf.rows.iter().enumerate() {
        for (k, c) in &r.cone {
            per_cone[*k].push((i, c));
        }
    }
    for (k, list) in per_cone.iter().enumerate() {
        let (xk, sk) = (&x[k], &sinv[k]);
        if sf.sides[k] == 1 {
            let w = xk[(0, 0)].re * sk[(0, 0)].re;
            for (a, &(i, ci)) in list.iter().enumerate() {
                let vi = ci.entries()[0].2.re;
                for &(j, cj) in &list[..=a] {
                    out[i * m + j] += w * vi * cj.entries()[0].2.re;
                }
            }
            continue;
        }
        // P = S^{-1} A_i X, then M_ij = Re Σ_t b_t P[q_t][p_t]
        let side = sf.sides[k];
        let mut prod = vec![C64::new(0.0, 0.0); side * side];
        for (a, &(i, ci)) in list.iter().enumerate() {
            prod.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for &(rs, cs, va) in ci.entries() {
                let xrow = xk.row(cs);
                for q in 0..side {
                    let w = sk[(q, rs)] * va;
                    if w.re == 0.0 && w.im == 0.0 {
                        continue;
                    }
                    let dst = &mut prod[q * side..(q + 1) * side];
                    for (d, x) in dst.iter_mut().zip(xrow) {
                        *d += w * x;
                    }
                }
            }
            for &(j, cj) in &list[..=a] {
                let acc: f64 = cj.entries().iter().map(|&(pt, qt, vb)| (vb * prod[qt * side + pt]).re).sum();
                out[i * m + j] += acc;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            out[j * m + i] = out[i * m + j];
        }
    }
    out
}

struct NewtonSystem {
    l: Vec<f64>,
    /// `M^{-1} B`, column-major per free variable
    minv_b: Vec<Vec<f64>>,
    /// Cholesky factor of `B^T M^{-1} B`
    lf: Vec<f64>,
}

fn factor_newton(sf: &StdForm, mut mat: Vec<f64>, iteration: usize) -> Result<NewtonSystem> {
    let m = sf.m();
    let max_diag = (0..m).map(|i| mat[i * m + i]).fold(0.0f64, f64::max);
    let mut l = mat.clone();
    if chol_real(&mut l, m).is_err() {
        for i in 0..m {
            mat[i * m + i] += 1e-13 * max_diag.max(1.0);
        }
        l = mat;
        chol_real(&mut l, m).map_err(|k| Error::NumericalBreakdown {
            iteration,
            reason: format!("Schur complement not positive definite at pivot {k}"),
        })?;
    }
    let nf = sf.nf();
    let mut minv_b = Vec::with_capacity(nf);
    for f in 0..nf {
        let mut col = vec![0.0; m];
        for (i, r) in sf.rows.iter().enumerate() {
            for &(k, v) in &r.free {
                if k == f {
                    col[i] = v;
                }
            }
        }
        chol_solve(&l, m, &mut col);
        minv_b.push(col);
    }
    let mut lf = vec![0.0; nf * nf];
    for a in 0..nf {
        for b in 0..=a {
            let mut v = 0.0;
            for (i, r) in sf.rows.iter().enumerate() {
                for &(k, c) in &r.free {
                    if k == a {
                        v += c * minv_b[b][i];
                    }
                }
            }
            lf[a * nf + b] = v;
            lf[b * nf + a] = v;
        }
    }
    if nf > 0 {
        chol_real(&mut lf, nf).map_err(|k| Error::NumericalBreakdown {
            iteration,
            reason: format!("free-variable Schur complement singular at pivot {k}"),
        })?;
    }
    Ok(NewtonSystem { l, minv_b, lf })
}

/// Solves `M dy + B dxf = h`, `B^T dy = rf`.
fn solve_newton(sf: &StdForm, ns: &NewtonSystem, h: &[f64], rf: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = sf.m();
    let nf = sf.nf();
    let mut minv_h = h.to_vec();
    chol_solve(&ns.l, m, &mut minv_h);
    let mut dxf = vec![0.0; nf];
    if nf > 0 {
        let bt_minv_h = sf.adjoint_free(&minv_h);
        for f in 0..nf {
            dxf[f] = bt_minv_h[f] - rf[f];
        }
        chol_solve(&ns.lf, nf, &mut dxf);
    }
    let mut dy = minv_h;
    for f in 0..nf {
        for i in 0..m {
            dy[i] -= ns.minv_b[f][i] * dxf[f];
        }
    }
    (dy, dxf)
}

fn path_following(sf: &StdForm, opts: &SolveOptions) -> Result<(Iterate, usize, SolveStatus)> {
    let m = sf.m();
    let nb = sf.sides.len();
    let b: Vec<f64> = sf.rows.iter().map(|r| r.rhs).collect();
    let b_norm = norm(&b);
    let c_norm = (sf.c_cone.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>()
        + sf.c_free.iter().map(|c| c * c).sum::<f64>())
    .sqrt();

    // identity-scaled start
    let mut row_norm = vec![vec![0.0; nb]; m];
    for (i, r) in sf.rows.iter().enumerate() {
        for (k, c) in &r.cone {
            row_norm[i][*k] = c.frobenius_norm();
        }
    }
    let mut x = Vec::with_capacity(nb);
    let mut s = Vec::with_capacity(nb);
    for k in 0..nb {
        let n = sf.sides[k] as f64;
        let mut xi = 10.0f64.max(n.sqrt());
        let mut eta = 10.0f64.max(n.sqrt()).max(sf.c_cone[k].frobenius_norm());
        for i in 0..m {
            let a = row_norm[i][k];
            if a > 0.0 {
                xi = xi.max(n * (1.0 + b[i].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        x.push(ComplexMatrix::identity(sf.sides[k]).scale(xi));
        s.push(ComplexMatrix::identity(sf.sides[k]).scale(eta));
    }
    let mut it = Iterate { x, xf: vec![0.0; sf.nf()], y: vec![0.0; m], s };
    let total_side: f64 = sf.sides.iter().sum::<usize>() as f64;

    let mut best: Option<(f64, Iterate)> = None;
    let mut stalls = 0;
    let mut done = 0;
    for iter in 0..opts.max_iter {
        done = iter;
        let meas = measures(sf, &it, &b, b_norm, c_norm);
        if meas.relp <= opts.feas_tol && meas.reld <= opts.feas_tol && meas.relgap <= opts.gap_tol {
            return Ok((it, iter, SolveStatus::Optimal));
        }
        let merit = meas.merit();
        if best.as_ref().is_none_or(|(bm, _)| merit < *bm) {
            best = Some((merit, Iterate { x: it.x.clone(), xf: it.xf.clone(), y: it.y.clone(), s: it.s.clone() }));
        }

        let sinv: Vec<ComplexMatrix> = it.s.iter().map(inverse_block).collect::<Result<_>>()?;
        let mu: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.trace_product_re(s)).sum::<f64>() / total_side;

        // residuals
        let ax = sf.apply(&it.x, &it.xf);
        let rp: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = sf.adjoint_cone(&it.y);
        let rd: Vec<ComplexMatrix> = (0..nb)
            .map(|k| {
                let mut r = sf.c_cone[k].to_dense();
                r -= &aty[k];
                r -= &it.s[k];
                r
            })
            .collect();
        let btf = sf.adjoint_free(&it.y);
        let rf: Vec<f64> = sf.c_free.iter().zip(&btf).map(|(c, v)| c - v).collect();

        let ns = factor_newton(sf, schur(sf, &it.x, &sinv), iter)?;
        // X Rd S^{-1}, shared by both directions
        let x_rd_sinv: Vec<ComplexMatrix> =
            (0..nb).map(|k| it.x[k].matmul(&rd[k]).matmul(&sinv[k]).hermitian_part()).collect();
        let a_x_rd_sinv = sf.apply(&x_rd_sinv, &vec![0.0; sf.nf()]);

        let direction = |rc: &[ComplexMatrix]| -> (Vec<ComplexMatrix>, Vec<f64>, Vec<f64>, Vec<ComplexMatrix>) {
            let a_rc = sf.apply(rc, &vec![0.0; sf.nf()]);
            let h: Vec<f64> = (0..m).map(|i| rp[i] - a_rc[i] + a_x_rd_sinv[i]).collect();
            let (dy, dxf) = solve_newton(sf, &ns, &h, &rf);
            let atdy = sf.adjoint_cone(&dy);
            let ds: Vec<ComplexMatrix> = (0..nb).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<ComplexMatrix> = (0..nb)
                .map(|k| &rc[k] - &it.x[k].matmul(&ds[k]).matmul(&sinv[k]).hermitian_part())
                .collect();
            (dx, dxf, dy, ds)
        };

        let x_chol: Vec<ComplexMatrix> = it.x.iter().map(chol_block).collect::<Result<_>>().map_err(|_| {
            Error::NumericalBreakdown { iteration: iter, reason: "primal iterate lost definiteness".into() }
        })?;
        let s_chol: Vec<ComplexMatrix> = it.s.iter().map(chol_block).collect::<Result<_>>().map_err(|_| {
            Error::NumericalBreakdown { iteration: iter, reason: "dual slack lost definiteness".into() }
        })?;
        let steps = |dx: &[ComplexMatrix], ds: &[ComplexMatrix]| -> Result<(f64, f64)> {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nb {
                ap = ap.min(max_step(&x_chol[k], &dx[k])?);
                ad = ad.min(max_step(&s_chol[k], &ds[k])?);
            }
            Ok((ap, ad))
        };

        // predictor
        let rc_aff: Vec<ComplexMatrix> = it.x.iter().map(|x| x.scale(-1.0)).collect();
        let (dx_a, _, _, ds_a) = direction(&rc_aff);
        let (ap_max, ad_max) = steps(&dx_a, &ds_a)?;
        let (ap_a, ad_a) = (ap_max.min(1.0), ad_max.min(1.0));
        let mu_aff: f64 = (0..nb)
            .map(|k| {
                let mut xa = it.x[k].clone();
                xa.axpy(ap_a, &dx_a[k]);
                let mut sa = it.s[k].clone();
                sa.axpy(ad_a, &ds_a[k]);
                xa.trace_product_re(&sa)
            })
            .sum::<f64>()
            / total_side;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Vec<ComplexMatrix> = (0..nb)
            .map(|k| {
                let mut r = sinv[k].scale(sigma * mu);
                r -= &it.x[k];
                r -= &dx_a[k].matmul(&ds_a[k]).matmul(&sinv[k]).hermitian_part();
                r
            })
            .collect();
        let (dx, dxf, dy, ds) = direction(&rc);
        let (ap_max, ad_max) = steps(&dx, &ds)?;
        let tau = 0.9 + 0.09 * ap_a.min(ad_a);
        let ap = (tau * ap_max).min(1.0);
        let ad = (tau * ad_max).min(1.0);

        for k in 0..nb {
            it.x[k].axpy(ap, &dx[k]);
            it.x[k] = it.x[k].hermitian_part();
            it.s[k].axpy(ad, &ds[k]);
            it.s[k] = it.s[k].hermitian_part();
        }
        for (x, d) in it.xf.iter_mut().zip(&dxf) {
            *x += ap * d;
        }
        for (y, d) in it.y.iter_mut().zip(&dy) {
            *y += ad * d;
        }
        if ap < 1e-9 && ad < 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    let meas = measures(sf, &it, &b, b_norm, c_norm);
    if meas.relp <= opts.feas_tol && meas.reld <= opts.feas_tol && meas.relgap <= opts.gap_tol {
        return Ok((it, done + 1, SolveStatus::Optimal));
    }
    let it = match best {
        Some((bm, b_it)) if bm < meas.merit() => b_it,
        _ => it,
    };
    Ok((it, done + 1, SolveStatus::MaxIter))
}

fn assemble(p: &SdpProblem, sf: &StdForm, it: &Iterate, iterations: usize, status: SolveStatus) -> SdpSolution {
    let b: Vec<f64> = sf.rows.iter().map(|r| r.rhs).collect();
    let c_norm = (sf.c_cone.iter().map(|c| c.frobenius_norm().powi(2)).sum::<f64>()
        + sf.c_free.iter().map(|c| c * c).sum::<f64>())
    .sqrt();
    let meas = measures(sf, it, &b, norm(&b), c_norm);
    let mut blocks: Vec<ComplexMatrix> = p.blocks.iter().map(|b| ComplexMatrix::zeros(b.side, b.side)).collect();
    let mut scalars = vec![0.0; p.scalars.len()];
    for (k, src) in sf.source.iter().enumerate() {
        match *src {
            ConeSource::Block(i) => blocks[i] = it.x[k].clone(),
            ConeSource::Scalar(i) => scalars[i] = it.x[k][(0, 0)].re,
        }
    }
    for (f, &i) in sf.free_source.iter().enumerate() {
        scalars[i] = it.xf[f];
    }
    let mut duals = vec![0.0; p.equalities.len()];
    for (r, &src) in sf.row_source.iter().enumerate() {
        duals[src] = sf.sign * it.y[r];
    }
    let primal = sf.sign * meas.pobj;
    let dual = sf.sign * meas.dobj;
    SdpSolution {
        primal_objective: primal,
        dual_objective: dual,
        gap: meas.pobj - meas.dobj,
        relative_gap: meas.relgap,
        primal_residual: meas.relp,
        dual_residual: meas.reld,
        block_values: p.blocks.iter().zip(blocks).map(|(b, m)| (b.name.clone(), m)).collect(),
        scalar_values: p.scalars.iter().zip(scalars).map(|(s, v)| (s.name.clone(), v)).collect(),
        equality_duals: duals,
        iterations,
        status,
    }
}

fn infeasible_solution(p: &SdpProblem, _sf: &StdForm) -> SdpSolution {
    SdpSolution {
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        relative_gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        block_values: p.blocks.iter().map(|b| (b.name.clone(), ComplexMatrix::zeros(b.side, b.side))).collect(),
        scalar_values: p.scalars.iter().map(|s| (s.name.clone(), 0.0)).collect(),
        equality_duals: vec![0.0; p.equalities.len()],
        iterations: 0,
        status: SolveStatus::InfeasibleDetected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_cholesky_roundtrip() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let mut l = a.to_vec();
        chol_real(&mut l, 3).unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        chol_solve(&l, 3, &mut x);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((ax - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert_eq!(chol_real(&mut bad, 2), Err(1));
    }

    #[test]
    fn pivoted_cholesky_finds_rank() {
        // rows: e1, e2, e1 + e2
        let g = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        let (order, rank, l) = pivoted_cholesky(&g, 3, 1e-12);
        assert_eq!(rank, 2);
        assert!(dependent_consistent(&order, rank, &l, &[1.0, 2.0, 3.0], 1e-12));
        assert!(!dependent_consistent(&order, rank, &l, &[1.0, 2.0, 4.0], 1e-12));
    }
}
