//! Tensor-factor bookkeeping and the subsystem-wise operations built on it.
//!
//! Layouts list subsystems left to right in tensor-factor order: the first
//! subsystem is the most significant digit of a basis index. Every operation
//! here returns its result in that same relative order.

use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, C64};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labelled tensor factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let subsystems: Vec<Subsystem> = parts
            .into_iter()
            .map(|(label, dim)| Subsystem {
                label: label.into(),
                dim,
            })
            .collect();
        for (i, s) in subsystems.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::InvalidLayout(format!(
                    "subsystem `{}` has dimension 0",
                    s.label
                )));
            }
            if subsystems[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::InvalidLayout(format!("duplicate label `{}`", s.label)));
            }
        }
        Ok(Self { subsystems })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.position(label)?].dim)
    }

    /// The subsystems named in `keep`, in layout order.
    pub fn retain(&self, keep: &[&str]) -> Result<SystemLayout> {
        for k in keep {
            self.position(k)?;
        }
        Ok(SystemLayout {
            subsystems: self
                .subsystems
                .iter()
                .filter(|s| keep.contains(&s.label.as_str()))
                .cloned()
                .collect(),
        })
    }

    /// Concatenation `self ⊗ other`.
    pub fn join(&self, other: &SystemLayout) -> Result<SystemLayout> {
        SystemLayout::new(
            self.subsystems
                .iter()
                .chain(&other.subsystems)
                .map(|s| (s.label.clone(), s.dim)),
        )
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.len()];
        for i in (0..self.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.subsystems[i + 1].dim;
        }
        strides
    }

    /// For the given subsystem positions, the full-space offset contributed by every
    /// joint index over those subsystems (joint index in the listed order).
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &p in positions {
            let dim = self.subsystems[p].dim;
            let mut next = Vec::with_capacity(offsets.len() * dim);
            for &o in &offsets {
                for digit in 0..dim {
                    next.push(o + digit * strides[p]);
                }
            }
            offsets = next;
        }
        offsets
    }

    fn check_matrix(&self, m: &ComplexMatrix) -> Result<()> {
        let n = m.require_square("operand")?;
        if n != self.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {n} does not match layout dimension {}",
                self.total_dim()
            )));
        }
        Ok(())
    }

    fn positions_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l)?;
            if out.contains(&p) {
                return Err(Error::InvalidLayout(format!("label `{l}` listed twice")));
            }
            out.push(p);
        }
        Ok(out)
    }
}

/// Traces out every subsystem not named in `keep`; the result is ordered like `layout`.
pub fn partial_trace(m: &ComplexMatrix, layout: &SystemLayout, keep: &[&str]) -> Result<ComplexMatrix> {
    layout.check_matrix(m)?;
    let kept: Vec<usize> = {
        let mut k = layout.positions_of(keep)?;
        k.sort_unstable();
        k
    };
    let traced: Vec<usize> = (0..layout.len()).filter(|p| !kept.contains(p)).collect();
    let kept_off = layout.offsets(&kept);
    let traced_off = layout.offsets(&traced);
    let kd = kept_off.len();
    let side = m.side();
    let data = m.data();
    let mut out = ComplexMatrix::zeros(kd, kd);
    for (a, &ra) in kept_off.iter().enumerate() {
        for (b, &cb) in kept_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += data[(ra + t) * side + cb + t];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Transposes the indices of one subsystem.
pub fn partial_transpose(m: &ComplexMatrix, layout: &SystemLayout, target: &str) -> Result<ComplexMatrix> {
    layout.check_matrix(m)?;
    let p = layout.position(target)?;
    let stride = layout.strides()[p];
    let dim = layout.subsystems[p].dim;
    let side = m.side();
    let digit = |idx: usize| (idx / stride) % dim;
    Ok(ComplexMatrix::from_fn(side, side, |r, c| {
        let (dr, dc) = (digit(r), digit(c));
        let r2 = r - dr * stride + dc * stride;
        let c2 = c - dc * stride + dr * stride;
        m[(r2, c2)]
    }))
}

/// Places `op`, acting on `op_labels` (in that order), into the full space of
/// `layout` with the identity on every other subsystem.
pub fn embed(op: &ComplexMatrix, op_labels: &[&str], layout: &SystemLayout) -> Result<ComplexMatrix> {
    let positions = layout.positions_of(op_labels)?;
    let op_dim: usize = positions.iter().map(|&p| layout.subsystems[p].dim).product();
    let n = op.require_square("embedded operator")?;
    if n != op_dim {
        return Err(Error::DimensionMismatch(format!(
            "operator side {n} does not match subsystems {op_labels:?} of dimension {op_dim}"
        )));
    }
    let rest: Vec<usize> = (0..layout.len()).filter(|p| !positions.contains(p)).collect();
    let op_off = layout.offsets(&positions);
    let rest_off = layout.offsets(&rest);
    let side = layout.total_dim();
    let mut out = ComplexMatrix::zeros(side, side);
    for (a, &ra) in op_off.iter().enumerate() {
        for (b, &cb) in op_off.iter().enumerate() {
            let v = op[(a, b)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            for &t in &rest_off {
                out[(ra + t, cb + t)] = v;
            }
        }
    }
    Ok(out)
}

/// Sparse variant of [`embed`]: returns the nonzero entries `(row, col, value)`.
pub fn embed_entries(
    entries: &[(usize, usize, C64)],
    op_labels: &[&str],
    layout: &SystemLayout,
) -> Result<Vec<(usize, usize, C64)>> {
    let positions = layout.positions_of(op_labels)?;
    let rest: Vec<usize> = (0..layout.len()).filter(|p| !positions.contains(p)).collect();
    let op_off = layout.offsets(&positions);
    let rest_off = layout.offsets(&rest);
    let mut out = Vec::with_capacity(entries.len() * rest_off.len());
    for &(a, b, v) in entries {
        if a >= op_off.len() || b >= op_off.len() {
            return Err(Error::DimensionMismatch(format!(
                "entry ({a}, {b}) outside subsystems {op_labels:?}"
            )));
        }
        for &t in &rest_off {
            out.push((op_off[a] + t, op_off[b] + t, v));
        }
    }
    Ok(out)
}

/// Reorders tensor factors so that they appear as in `order` (which must list
/// every label exactly once).
pub fn permute(m: &ComplexMatrix, layout: &SystemLayout, order: &[&str]) -> Result<(ComplexMatrix, SystemLayout)> {
    layout.check_matrix(m)?;
    if order.len() != layout.len() {
        return Err(Error::InvalidLayout(format!(
            "permutation lists {} of {} subsystems",
            order.len(),
            layout.len()
        )));
    }
    let positions = layout.positions_of(order)?;
    // offsets enumerates joint indices in the new order, mapping to old offsets
    let old_index = layout.offsets(&positions);
    let side = m.side();
    let out = ComplexMatrix::from_fn(side, side, |r, c| m[(old_index[r], old_index[c])]);
    let new_layout = SystemLayout {
        subsystems: positions.iter().map(|&p| layout.subsystems[p].clone()).collect(),
    };
    Ok((out, new_layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_entangled, swap_operator};

    fn lay(parts: &[(&str, usize)]) -> SystemLayout {
        SystemLayout::new(parts.iter().map(|&(l, d)| (l, d))).unwrap()
    }

    #[test]
    fn layout_validation() {
        assert!(SystemLayout::new([("A", 2), ("A", 3)]).is_err());
        assert!(SystemLayout::new([("A", 0)]).is_err());
        let l = lay(&[("A", 2), ("B", 3)]);
        assert_eq!(l.total_dim(), 6);
        assert_eq!(l.retain(&["B"]).unwrap().labels(), vec!["B"]);
        assert!(matches!(l.position("C"), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn trace_of_max_entangled_is_identity() {
        let l = lay(&[("B", 2), ("B1", 2)]);
        let pt = partial_trace(&max_entangled(2), &l, &["B"]).unwrap();
        assert_eq!(pt, ComplexMatrix::identity(2));
    }

    #[test]
    fn trace_of_product_factorizes() {
        let rho = ComplexMatrix::from_real(2, &[0.7, 0.1, 0.1, 0.3]).unwrap();
        let sigma = ComplexMatrix::from_real(3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.5, 4.0]).unwrap();
        let l = lay(&[("L", 2), ("R", 3)]);
        let pt = partial_trace(&rho.kron(&sigma), &l, &["L"]).unwrap();
        assert!(pt.max_abs_diff(&rho.scale(7.0)) < 1e-14);
        let pr = partial_trace(&rho.kron(&sigma), &l, &["R"]).unwrap();
        assert!(pr.max_abs_diff(&sigma) < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        let l = lay(&[("A", 2), ("B", 2)]);
        assert!(matches!(
            partial_trace(&ComplexMatrix::identity(4), &l, &["X"]),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            partial_trace(&ComplexMatrix::identity(3), &l, &["A"]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn partial_transpose_of_max_entangled_is_swap() {
        let l = lay(&[("B", 3), ("B1", 3)]);
        assert_eq!(partial_transpose(&max_entangled(3), &l, "B").unwrap(), swap_operator(3));
        let id = ComplexMatrix::identity(9);
        assert_eq!(partial_transpose(&id, &l, "B1").unwrap(), id);
    }

    #[test]
    fn embed_matches_kron_in_order() {
        let l = lay(&[("A", 2), ("B", 3)]);
        let x = ComplexMatrix::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        assert_eq!(embed(&x, &["A"], &l).unwrap(), x.kron(&ComplexMatrix::identity(3)));
        let y = ComplexMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.0));
        assert_eq!(embed(&y, &["B"], &l).unwrap(), ComplexMatrix::identity(2).kron(&y));
    }

    #[test]
    fn embed_out_of_order_uses_swap() {
        // Φ placed on (B, B2) of (B, B1, B2) equals F_{B1B2} (Φ ⊗ I) F_{B1B2}
        let l = lay(&[("B", 2), ("B1", 2), ("B2", 2)]);
        let phi = max_entangled(2);
        let direct = embed(&phi, &["B", "B2"], &l).unwrap();
        let n = ComplexMatrix::identity(2).kron(&swap_operator(2));
        let m = phi.kron(&ComplexMatrix::identity(2));
        assert_eq!(direct, &(&n * &m) * &n);
    }

    #[test]
    fn sparse_embed_agrees_with_dense() {
        let l = lay(&[("X", 2), ("Y", 3), ("Z", 2)]);
        let op = ComplexMatrix::from_fn(4, 4, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let entries: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, op[(i, j)]))
            .collect();
        let dense = embed(&op, &["Z", "X"], &l).unwrap();
        let mut from_sparse = ComplexMatrix::zeros(12, 12);
        for (r, c, v) in embed_entries(&entries, &["Z", "X"], &l).unwrap() {
            from_sparse[(r, c)] += v;
        }
        assert_eq!(dense, from_sparse);
    }

    #[test]
    fn permute_reverses_kron() {
        let a = ComplexMatrix::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
        let b = ComplexMatrix::from_fn(3, 3, |i, j| C64::new((i + j) as f64, 0.5));
        let l = lay(&[("a", 2), ("b", 3)]);
        let (p, pl) = permute(&a.kron(&b), &l, &["b", "a"]).unwrap();
        assert_eq!(pl.labels(), vec!["b", "a"]);
        assert_eq!(p, b.kron(&a));
    }
}
