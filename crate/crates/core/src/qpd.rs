//! Quasiprobability estimator for a signed decomposition `Γ = p1 N1 - p2 N2`.
//!
//! Each round draws channel `i` with probability `p_i / γ`, applies it to the
//! input state, measures the observable on the `A Bj` marginal and records
//! `s · λ` with `s = +1` for `N1`, `-1` for `N2`. The estimate is
//! `ξ = (γ / M) Σ s λ`.
//!
//! Round `m` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `m`, so
//! results do not depend on how rounds are scheduled across threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choi::{apply_choi, output_label, HptpDecomposition, INPUT_LABEL};
use crate::linalg::{herm_eig, partial_trace, pauli_word, permute, ComplexMatrix, HermEig, SystemLayout, HERMITIAN_TOL};
use crate::{Error, Result};

/// Hermitian observable on a labelled space, with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: ComplexMatrix,
    layout: SystemLayout,
    eig: HermEig,
}

impl Observable {
    pub fn new(matrix: ComplexMatrix, layout: SystemLayout) -> Result<Self> {
        if !matrix.is_square() || matrix.side() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "observable is {}x{} but its layout has dimension {}",
                matrix.rows(),
                matrix.cols(),
                layout.total_dim()
            )));
        }
        matrix.require_hermitian(HERMITIAN_TOL)?;
        let eig = herm_eig(&matrix)?;
        Ok(Self { matrix, layout, eig })
    }

    /// Pauli word with one qubit letter per label, e.g. `("ZZ", ["A", "B1"])`.
    pub fn pauli(word: &str, labels: &[&str]) -> Result<Self> {
        if word.chars().count() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "Pauli word `{word}` has {} letters for {} subsystems",
                word.chars().count(),
                labels.len()
            )));
        }
        let layout = SystemLayout::new(labels.iter().map(|l| (l.to_string(), 2)))?;
        Self::new(pauli_word(word)?, layout)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eig.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Errors unless every eigenvalue lies in `[-1, 1]` (up to `1e-12`).
    pub fn require_bounded(&self) -> Result<()> {
        let norm = self.spectral_norm();
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "observable eigenvalues must satisfy λ_k ∈ [-1, 1]; found |λ| = {norm}"
            )));
        }
        Ok(())
    }

    /// Born probabilities `<v_k|σ|v_k>` for each eigenvector.
    fn born(&self, sigma: &ComplexMatrix) -> Vec<f64> {
        (0..self.eig.values.len())
            .map(|k| {
                let v = self.eig.vector(k);
                let mut acc = 0.0;
                for (r, vr) in v.iter().enumerate() {
                    let row = sigma.row(r);
                    let sv: crate::C64 = row.iter().zip(&v).map(|(s, x)| s * x).sum();
                    acc += (vr.conj() * sv).re;
                }
                acc.max(0.0)
            })
            .collect()
    }
}

/// `M = ceil(2 γ² ln(2/ε) / δ²)` rounds give `|ξ - E ξ| ≤ δ` with probability
/// at least `1 - ε` for summands in `[-γ, γ]`.
pub fn hoeffding_rounds(gamma: f64, delta: f64, epsilon: f64) -> Result<usize> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be at least 1, got {gamma}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let m = (2.0 * gamma * gamma * (2.0 / epsilon).ln() / (delta * delta)).ceil();
    if m > usize::MAX as f64 {
        return Err(Error::InvalidParameter("round count overflows".into()));
    }
    Ok(m as usize)
}

/// How each round's outcome is signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRule {
    /// `+1` for `N1`, `-1` for `N2`.
    #[default]
    Signed,
    /// Always `+1`; biased, kept for diagnostics.
    Unsigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EstimationOptions {
    pub sign_rule: SignRule,
    /// Keep per-round records in the result.
    pub record_trace: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `1` or `2`.
    pub channel_index: u8,
    pub sign: i8,
    pub outcome_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingResult {
    pub estimate: f64,
    pub rounds: usize,
    pub gamma: f64,
    /// Sample standard deviation of the per-round terms `γ s λ`.
    pub empirical_std: f64,
    pub target_subsystem: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<RoundRecord>>,
}

struct Branch {
    born: Vec<f64>,
    dist: Option<WeightedIndex<f64>>,
}

/// Precomputed sampling problem: post-channel Born distributions for both
/// channels on the target `A Bj`.
pub struct Estimator {
    p1: f64,
    p2: f64,
    eigenvalues: Vec<f64>,
    branches: [Branch; 2],
    target: String,
}

/// Checks that `obs` lives on the reference systems of `rho` plus `Bj` and
/// returns the state's reference labels.
fn check_layouts(rho_layout: &SystemLayout, decomp: &HptpDecomposition, obs: &Observable, j: usize) -> Result<String> {
    let n = decomp.choi1.outputs();
    if j == 0 || j > n {
        return Err(Error::InvalidParameter(format!("output index {j} outside 1..={n}")));
    }
    let b_dim = rho_layout.dim_of(INPUT_LABEL)?;
    if b_dim != decomp.choi1.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has B of dimension {b_dim}, channels expect {}",
            decomp.choi1.input_dim()
        )));
    }
    let target = output_label(j);
    let mut want: Vec<(String, usize)> = rho_layout
        .subsystems()
        .iter()
        .filter(|s| s.label != INPUT_LABEL)
        .map(|s| (s.label.clone(), s.dim))
        .collect();
    want.push((target.clone(), decomp.choi1.layout().dim_of(&target)?));
    let mut have: Vec<(String, usize)> =
        obs.layout.subsystems().iter().map(|s| (s.label.clone(), s.dim)).collect();
    want.sort();
    have.sort();
    if want != have {
        return Err(Error::InvalidLayout(format!(
            "observable acts on {:?}, expected the reference systems and {target}: {:?}",
            obs.layout.labels(),
            want.iter().map(|w| w.0.as_str()).collect::<Vec<_>>()
        )));
    }
    Ok(target)
}

/// Marginal of an output state on the observable's subsystems, in the
/// observable's order.
fn marginal_for(out: &ComplexMatrix, out_layout: &SystemLayout, obs: &Observable) -> Result<ComplexMatrix> {
    let labels = obs.layout.labels();
    let reduced = partial_trace(out, out_layout, &labels)?;
    let reduced_layout = out_layout.retain(&labels)?;
    if reduced_layout.labels() == labels {
        return Ok(reduced);
    }
    Ok(permute(&reduced, &reduced_layout, &labels)?.0)
}

impl Estimator {
    pub fn new(
        rho: &ComplexMatrix,
        rho_layout: &SystemLayout,
        decomp: &HptpDecomposition,
        obs: &Observable,
        j: usize,
    ) -> Result<Self> {
        let target = check_layouts(rho_layout, decomp, obs, j)?;
        rho.require_hermitian(1e-10 * rho.max_abs().max(1.0))?;
        let branch = |p: f64, choi| -> Result<Branch> {
            if p == 0.0 {
                return Ok(Branch { born: vec![0.0; obs.eigenvalues().len()], dist: None });
            }
            let (out, out_layout) = apply_choi(choi, rho, rho_layout)?;
            let born = obs.born(&marginal_for(&out, &out_layout, obs)?);
            let dist = WeightedIndex::new(&born)
                .map_err(|e| Error::InvalidParameter(format!("post-channel state has no valid Born distribution: {e}")))?;
            Ok(Branch { born, dist: Some(dist) })
        };
        Ok(Self {
            p1: decomp.p1,
            p2: decomp.p2,
            eigenvalues: obs.eigenvalues().to_vec(),
            branches: [branch(decomp.p1, &decomp.choi1)?, branch(decomp.p2, &decomp.choi2)?],
            target,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.p1 + self.p2
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// Expected value of `ξ` under `rule`, from the Born distributions.
    pub fn mean(&self, rule: SignRule) -> f64 {
        let avg = |b: &Branch| b.born.iter().zip(&self.eigenvalues).map(|(q, l)| q * l).sum::<f64>();
        let s2 = match rule {
            SignRule::Signed => -1.0,
            SignRule::Unsigned => 1.0,
        };
        self.p1 * avg(&self.branches[0]) + s2 * self.p2 * avg(&self.branches[1])
    }

    fn round(&self, seed: u64, m: usize, rule: SignRule) -> RoundRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        let first = rng.random::<f64>() * self.gamma() < self.p1;
        let (idx, sign) = if first { (0, 1) } else { (1, if rule == SignRule::Signed { -1 } else { 1 }) };
        let dist = self.branches[idx].dist.as_ref().expect("sampled branch has positive weight");
        RoundRecord {
            round: m,
            channel_index: idx as u8 + 1,
            sign,
            outcome_lambda: self.eigenvalues[dist.sample(&mut rng)],
        }
    }

    pub fn run(&self, rounds: usize, seed: u64, opts: &EstimationOptions) -> Result<SamplingResult> {
        if rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        let records: Vec<RoundRecord> = {
            use rayon::prelude::*;
            (0..rounds).into_par_iter().map(|m| self.round(seed, m, opts.sign_rule)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let records: Vec<RoundRecord> = (0..rounds).map(|m| self.round(seed, m, opts.sign_rule)).collect();

        let gamma = self.gamma();
        let terms: Vec<f64> = records.iter().map(|r| gamma * r.sign as f64 * r.outcome_lambda).collect();
        let estimate = terms.iter().sum::<f64>() / rounds as f64;
        let empirical_std = sample_std(&terms, estimate);
        Ok(SamplingResult {
            estimate,
            rounds,
            gamma,
            empirical_std,
            target_subsystem: self.target.clone(),
            seed,
            records: opts.record_trace.then_some(records),
        })
    }
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn run_estimation(
    rho: &ComplexMatrix,
    rho_layout: &SystemLayout,
    decomp: &HptpDecomposition,
    obs: &Observable,
    j: usize,
    rounds: usize,
    seed: u64,
) -> Result<SamplingResult> {
    Estimator::new(rho, rho_layout, decomp, obs, j)?.run(rounds, seed, &EstimationOptions::default())
}

/// `tr[O tr_{rest}(p1 N1(ρ) - p2 N2(ρ))]`, computed through the signed Choi operator.
pub fn exact_expectation(
    rho: &ComplexMatrix,
    rho_layout: &SystemLayout,
    decomp: &HptpDecomposition,
    obs: &Observable,
    j: usize,
) -> Result<f64> {
    check_layouts(rho_layout, decomp, obs, j)?;
    let (out, out_layout) = apply_choi(&decomp.signed_choi()?, rho, rho_layout)?;
    Ok(marginal_for(&out, &out_layout, obs)?.trace_product_re(obs.matrix()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub trials: usize,
    pub rounds_per_trial: usize,
    pub mean_estimate: f64,
    pub oracle: f64,
    pub std: f64,
    /// `None` when every trial produced the same estimate.
    pub z_score: Option<f64>,
    pub degenerate: bool,
    pub pass: bool,
}

/// Largest `|z|` accepted by [`bias_check`].
pub const BIAS_Z_LIMIT: f64 = 4.0;

/// Compares the mean of `trials` independent Signed estimations with
/// [`exact_expectation`]. Trial `t` uses seed `seed + t`.
#[allow(clippy::too_many_arguments)]
pub fn bias_check(
    rho: &ComplexMatrix,
    rho_layout: &SystemLayout,
    decomp: &HptpDecomposition,
    obs: &Observable,
    j: usize,
    trials: usize,
    rounds_per_trial: usize,
    seed: u64,
) -> Result<BiasReport> {
    let oracle = exact_expectation(rho, rho_layout, decomp, obs, j)?;
    Estimator::new(rho, rho_layout, decomp, obs, j)?.bias_check(
        oracle,
        trials,
        rounds_per_trial,
        seed,
        &EstimationOptions::default(),
    )
}

impl Estimator {
    /// Runs `trials` estimations (trial `t` uses seed `seed + t`) and compares
    /// their mean with `oracle`. A zero spread is reported as degenerate and
    /// passes only if the common value equals the oracle to `1e-9`.
    pub fn bias_check(
        &self,
        oracle: f64,
        trials: usize,
        rounds_per_trial: usize,
        seed: u64,
        opts: &EstimationOptions,
    ) -> Result<BiasReport> {
        if trials < 30 {
            return Err(Error::InvalidParameter(format!("bias check needs at least 30 trials, got {trials}")));
        }
        let no_trace = EstimationOptions { record_trace: false, ..*opts };
        let estimates = (0..trials)
            .map(|t| Ok(self.run(rounds_per_trial, seed.wrapping_add(t as u64), &no_trace)?.estimate))
            .collect::<Result<Vec<f64>>>()?;
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let std = sample_std(&estimates, mean);
        let degenerate = std == 0.0;
        let z_score = (!degenerate).then(|| (mean - oracle) * (trials as f64).sqrt() / std);
        let pass = match z_score {
            Some(z) => z.abs() <= BIAS_Z_LIMIT,
            None => (mean - oracle).abs() <= 1e-9,
        };
        Ok(BiasReport { trials, rounds_per_trial, mean_estimate: mean, oracle, std, z_score, degenerate, pass })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi::{broadcast_layout, choi_optimal_2broadcast, ChoiOperator};
    use crate::linalg::{embed, max_entangled};

    fn bell() -> (ComplexMatrix, SystemLayout) {
        (max_entangled(2).scale(0.5), SystemLayout::new([("A", 2), ("B", 2)]).unwrap())
    }

    #[test]
    fn hoeffding_constants() {
        assert_eq!(hoeffding_rounds(1.0, 0.1, 0.05).unwrap(), 738);
        assert_eq!(hoeffding_rounds(5.0 / 3.0, 0.05, 0.05).unwrap(), 8198);
        assert!(hoeffding_rounds(0.5, 0.1, 0.05).is_err());
        assert!(hoeffding_rounds(1.0, 0.0, 0.05).is_err());
        assert!(hoeffding_rounds(1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn observable_bounds() {
        let zz = Observable::pauli("ZZ", &["A", "B1"]).unwrap();
        zz.require_bounded().unwrap();
        let big = Observable::new(zz.matrix().scale(1.5), zz.layout().clone()).unwrap();
        let err = big.require_bounded().unwrap_err().to_string();
        assert!(err.contains("λ_k ∈ [-1, 1]"), "{err}");
        let mut bad = zz.matrix().clone();
        bad[(0, 1)] = crate::C64::new(0.0, 1.0);
        assert!(matches!(Observable::new(bad, zz.layout().clone()), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn seed_determinism_and_range() {
        let (rho, layout) = bell();
        let decomp = choi_optimal_2broadcast(2).unwrap();
        let obs = Observable::pauli("ZZ", &["A", "B1"]).unwrap();
        let est = Estimator::new(&rho, &layout, &decomp, &obs, 1).unwrap();
        let a = est.run(500, 7, &EstimationOptions::default()).unwrap();
        let b = est.run(500, 7, &EstimationOptions::default()).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert!(a.estimate.abs() <= a.gamma + 1e-12);
        let traced = est.run(500, 7, &EstimationOptions { record_trace: true, ..Default::default() }).unwrap();
        let records = traced.records.unwrap();
        assert_eq!(records.len(), 500);
        assert_eq!(traced.estimate.to_bits(), a.estimate.to_bits());
        assert!(records.iter().all(|r| (r.channel_index == 1) == (r.sign == 1)));
    }

    #[test]
    fn mean_matches_exact_expectation() {
        let (rho, layout) = bell();
        let decomp = choi_optimal_2broadcast(2).unwrap();
        for j in 1..=2 {
            let obs = Observable::pauli("ZZ", &["A", &output_label(j)]).unwrap();
            let est = Estimator::new(&rho, &layout, &decomp, &obs, j).unwrap();
            let exact = exact_expectation(&rho, &layout, &decomp, &obs, j).unwrap();
            assert!((exact - 1.0).abs() < 1e-12);
            assert!((est.mean(SignRule::Signed) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn observable_order_may_differ_from_state_order() {
        let (rho, layout) = bell();
        let decomp = choi_optimal_2broadcast(2).unwrap();
        let ab = Observable::pauli("ZX", &["A", "B1"]).unwrap();
        let ba = Observable::pauli("XZ", &["B1", "A"]).unwrap();
        let x = exact_expectation(&rho, &layout, &decomp, &ab, 1).unwrap();
        let y = exact_expectation(&rho, &layout, &decomp, &ba, 1).unwrap();
        assert!((x - y).abs() < 1e-12);
        let e1 = Estimator::new(&rho, &layout, &decomp, &ab, 1).unwrap().mean(SignRule::Signed);
        let e2 = Estimator::new(&rho, &layout, &decomp, &ba, 1).unwrap().mean(SignRule::Signed);
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn layout_errors() {
        let (rho, layout) = bell();
        let decomp = choi_optimal_2broadcast(2).unwrap();
        let wrong = Observable::pauli("ZZ", &["A", "B2"]).unwrap();
        assert!(matches!(Estimator::new(&rho, &layout, &decomp, &wrong, 1), Err(Error::InvalidLayout(_))));
        let obs = Observable::pauli("ZZ", &["A", "B1"]).unwrap();
        assert!(Estimator::new(&rho, &layout, &decomp, &obs, 3).is_err());
        assert!(run_estimation(&rho, &layout, &decomp, &obs, 1, 0, 1).is_err());
    }

    #[test]
    fn trivial_decomposition_is_plain_monte_carlo() {
        // N1: B -> B1 identity, B2 maximally mixed; weight 1, no second branch
        let d = 2;
        let layout = broadcast_layout(d, 2).unwrap();
        let j = embed(&max_entangled(d), &["B", "B1"], &layout).unwrap().scale(1.0 / d as f64);
        let n1 = ChoiOperator::new(j, layout).unwrap();
        let decomp = HptpDecomposition::new(1.0, n1.clone(), 0.0, n1).unwrap();
        let (rho, rho_layout) = bell();
        let obs = Observable::pauli("ZZ", &["A", "B1"]).unwrap();
        let r = run_estimation(&rho, &rho_layout, &decomp, &obs, 1, 100, 3).unwrap();
        assert_eq!(r.gamma, 1.0);
        // Bell ZZ outcomes are always +1
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.empirical_std, 0.0);
    }
}
