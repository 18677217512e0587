use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vbroadcast_core::choi::{broadcast_layout, choi_optimal_2broadcast, gamma_prime_decomposition, output_label, ChoiOperator, HptpDecomposition};
use vbroadcast_core::linalg::{embed, max_entangled, random_density, random_hermitian};
use vbroadcast_core::qpd::*;
use vbroadcast_core::{ComplexMatrix, SizeCap, SystemLayout};

fn bell() -> (ComplexMatrix, SystemLayout) {
    (max_entangled(2).scale(0.5), SystemLayout::new([("A", 2), ("B", 2)]).unwrap())
}

fn zz(j: usize) -> Observable {
    Observable::pauli("ZZ", &["A", &output_label(j)]).unwrap()
}

/// Random Hermitian observable on `A Bj` rescaled to spectral norm `scale`.
fn random_observable(dims: (usize, usize), j: usize, scale: f64, rng: &mut ChaCha8Rng) -> Observable {
    let layout = SystemLayout::new([("A".to_string(), dims.0), (output_label(j), dims.1)]).unwrap();
    let h = random_hermitian(dims.0 * dims.1, rng);
    let o = Observable::new(h, layout.clone()).unwrap();
    Observable::new(o.matrix().scale(scale / o.spectral_norm()), layout).unwrap()
}

#[test]
fn bell_correlator_on_both_outputs() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    let rounds = hoeffding_rounds(decomp.gamma(), 0.05, 0.05).unwrap();
    assert_eq!(rounds, 8198);
    for j in 1..=2 {
        let r = run_estimation(&rho, &layout, &decomp, &zz(j), j, rounds, 2024).unwrap();
        assert_eq!(r.target_subsystem, output_label(j));
        assert!((r.gamma - 5.0 / 3.0).abs() < 1e-12);
        assert!((r.estimate - 1.0).abs() <= 0.05, "j={j}: {}", r.estimate);
    }
}

#[test]
fn exact_expectation_reproduces_the_input_marginal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let decomp = gamma_prime_decomposition(2, 3, SizeCap::default()).unwrap();
    let layout = SystemLayout::new([("A", 2), ("B", 2)]).unwrap();
    for _ in 0..5 {
        let rho = random_density(4, &mut rng);
        for j in 1..=3 {
            let obs = random_observable((2, 2), j, 1.0, &mut rng);
            let got = exact_expectation(&rho, &layout, &decomp, &obs, j).unwrap();
            let want = obs.matrix().trace_product_re(&rho);
            assert!((got - want).abs() < 1e-10, "j={j}: {got} vs {want}");
        }
    }
}

#[test]
fn identity_observable_has_unit_expectation() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    for j in 1..=2 {
        let obs = Observable::pauli("II", &["A", &output_label(j)]).unwrap();
        assert!((exact_expectation(&rho, &layout, &decomp, &obs, j).unwrap() - 1.0).abs() < 1e-12);
        let est = Estimator::new(&rho, &layout, &decomp, &obs, j).unwrap();
        // outcomes are constant but signs vary, so the spread is not zero
        let report = est.bias_check(1.0, 50, 500, 9, &EstimationOptions::default()).unwrap();
        assert!(!report.degenerate);
        assert!(report.pass, "{report:?}");
    }
}

fn identity_extension(d: usize) -> HptpDecomposition {
    let layout = broadcast_layout(d, 2).unwrap();
    let j = embed(&max_entangled(d), &["B", "B1"], &layout).unwrap().scale(1.0 / d as f64);
    let n1 = ChoiOperator::new(j, layout).unwrap();
    HptpDecomposition::new(1.0, n1.clone(), 0.0, n1).unwrap()
}

#[test]
fn degenerate_spread_is_reported() {
    let (rho, layout) = bell();
    let decomp = identity_extension(2);
    let obs = Observable::pauli("II", &["A", "B1"]).unwrap();
    let report = bias_check(&rho, &layout, &decomp, &obs, 1, 30, 100, 5).unwrap();
    assert!(report.degenerate);
    assert_eq!(report.z_score, None);
    assert_eq!(report.mean_estimate, 1.0);
    assert!(report.pass);
}

#[test]
fn plain_monte_carlo_without_second_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = SystemLayout::new([("A", 2), ("B", 2)]).unwrap();
    let rho = random_density(4, &mut rng);
    let obs = random_observable((2, 2), 1, 1.0, &mut rng);
    let decomp = identity_extension(2);
    let want = obs.matrix().trace_product_re(&rho);
    assert!((exact_expectation(&rho, &layout, &decomp, &obs, 1).unwrap() - want).abs() < 1e-12);
    let r = run_estimation(&rho, &layout, &decomp, &obs, 1, 20_000, 1).unwrap();
    assert_eq!(r.gamma, 1.0);
    assert!((r.estimate - want).abs() < 0.05);
}

#[test]
fn bell_bias_check_passes() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    let report = bias_check(&rho, &layout, &decomp, &zz(1), 1, 100, 2000, 77).unwrap();
    assert!(report.pass, "{report:?}");
    assert!((report.oracle - 1.0).abs() < 1e-12);
}

#[test]
fn unsigned_rule_is_detected() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    let obs = Observable::pauli("II", &["A", "B1"]).unwrap();
    let est = Estimator::new(&rho, &layout, &decomp, &obs, 1).unwrap();
    let opts = EstimationOptions { sign_rule: SignRule::Unsigned, record_trace: false };
    let report = est.bias_check(1.0, 50, 500, 1, &opts).unwrap();
    // every term is +γ, so the mean sits at γ with zero spread
    assert!((report.mean_estimate - est.gamma()).abs() < 1e-12);
    assert!(!report.pass);
    let corr = Estimator::new(&rho, &layout, &decomp, &zz(1), 1).unwrap();
    let report = corr.bias_check(1.0, 50, 2000, 1, &opts).unwrap();
    assert!(report.z_score.unwrap().abs() > 4.0, "{report:?}");
}

#[test]
fn too_few_trials_rejected() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    assert!(bias_check(&rho, &layout, &decomp, &zz(1), 1, 29, 10, 0).is_err());
}

#[test]
fn trace_rows_match_estimate() {
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    let est = Estimator::new(&rho, &layout, &decomp, &zz(2), 2).unwrap();
    let r = est.run(300, 4, &EstimationOptions { record_trace: true, ..Default::default() }).unwrap();
    let rows = r.records.as_ref().unwrap();
    let sum: f64 = rows.iter().map(|x| r.gamma * x.sign as f64 * x.outcome_lambda).sum();
    assert_eq!(sum / 300.0, r.estimate);
    assert!(rows.iter().enumerate().all(|(m, x)| x.round == m));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn doubling_gamma_quadruples_rounds(g in 1.0f64..20.0, delta in 0.01f64..1.0, eps in 0.001f64..0.999) {
        let raw = |g: f64| 2.0 * g * g * (2.0 / eps).ln() / (delta * delta);
        prop_assert!((raw(2.0 * g) - 4.0 * raw(g)).abs() <= 1e-9 * raw(2.0 * g));
        let m1 = hoeffding_rounds(g, delta, eps).unwrap();
        let m2 = hoeffding_rounds(2.0 * g, delta, eps).unwrap();
        prop_assert!(m2 >= 4 * m1 - 3 && m2 <= 4 * m1);
        prop_assert!(hoeffding_rounds(g, delta / 2.0, eps).unwrap() >= m1);
        prop_assert!(hoeffding_rounds(g, delta, eps / 2.0).unwrap() >= m1);
    }

    #[test]
    fn estimates_stay_in_range(seed in any::<u64>(), obs_seed in 0u64..1000, j in 1usize..=2, scale in 0.1f64..1.0) {
        let (rho, layout) = bell();
        let decomp = choi_optimal_2broadcast(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(obs_seed);
        let obs = random_observable((2, 2), j, scale, &mut rng);
        let est = Estimator::new(&rho, &layout, &decomp, &obs, j).unwrap();
        let a = est.run(64, seed, &EstimationOptions::default()).unwrap();
        let b = est.run(64, seed, &EstimationOptions::default()).unwrap();
        prop_assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        prop_assert!(a.estimate.abs() <= a.gamma * obs.spectral_norm() + 1e-12);
        let exact = exact_expectation(&rho, &layout, &decomp, &obs, j).unwrap();
        prop_assert!((est.mean(SignRule::Signed) - exact).abs() < 1e-10);
    }
}

#[test]
fn estimate_does_not_depend_on_scheduling() {
    // same value with and without the `parallel` feature
    let (rho, layout) = bell();
    let decomp = choi_optimal_2broadcast(2).unwrap();
    let r = run_estimation(&rho, &layout, &decomp, &zz(1), 1, 8198, 7).unwrap();
    assert_eq!(r.estimate, 0.9892656745548404);
}
