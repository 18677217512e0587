use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vbroadcast_core::linalg::{
    eigvalsh, herm_eig, kron, partial_trace, partial_transpose, random_hermitian, real_embedding, swap_operator,
    ComplexMatrix, SystemLayout, C64,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    use rand::Rng;
    let mut r = rng(seed);
    ComplexMatrix::from_fn(n, n, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
}

#[test]
fn kron_swap_matches_index_permutation() {
    // (F ⊗ I)|i1 i2 i3> = |i2 i1 i3>
    let m = kron(&swap_operator(2), &ComplexMatrix::identity(2));
    for i1 in 0..2 {
        for i2 in 0..2 {
            for i3 in 0..2 {
                let col = i1 * 4 + i2 * 2 + i3;
                let row = i2 * 4 + i1 * 2 + i3;
                for r in 0..8 {
                    let want = if r == row { 1.0 } else { 0.0 };
                    assert_eq!(m[(r, col)], C64::new(want, 0.0));
                }
            }
        }
    }
}

#[test]
fn swap_operator_properties() {
    assert_eq!(swap_operator(1), ComplexMatrix::identity(1));
    let f2 = swap_operator(2);
    // F|01> = |10>
    assert_eq!(f2[(2, 1)], C64::new(1.0, 0.0));
    for d in 2..=5 {
        let f = swap_operator(d);
        assert_eq!(f.trace(), C64::new(d as f64, 0.0));
        assert_eq!(&f * &f, ComplexMatrix::identity(d * d));
        assert!(f.is_hermitian(0.0));
    }
}

#[test]
fn double_partial_transpose_is_identity_map() {
    let layout = SystemLayout::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
    let m = random_hermitian(8, &mut rng(3));
    let twice = partial_transpose(&partial_transpose(&m, &layout, "B").unwrap(), &layout, "B").unwrap();
    assert!(twice.max_abs_diff(&m) <= 1e-14);
}

#[test]
fn eigensolver_agrees_with_nalgebra() {
    for (n, seed) in [(1, 1), (2, 2), (5, 3), (16, 4), (33, 5)] {
        let m = random_hermitian(n, &mut rng(seed));
        let ours = eigvalsh(&m).unwrap();
        let na = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
        let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn degenerate_spectra_converge() {
    // sums of embedded projectors: large clusters of (near-)zero eigenvalues
    use vbroadcast_core::linalg::{embed, max_entangled};
    for d in [4, 6] {
        let layout = SystemLayout::new([("A", d), ("B", d), ("C", d)]).unwrap();
        let mut m = embed(&max_entangled(d), &["A", "B"], &layout).unwrap();
        m += &embed(&max_entangled(d), &["A", "C"], &layout).unwrap().scale(0.3);
        m.axpy(1.0 / d as f64, &ComplexMatrix::identity(d * d * d));
        m = m.scale(1e-3);
        let ours = eigvalsh(&m).unwrap();
        let na = DMatrix::from_fn(m.side(), m.side(), |i, j| m[(i, j)]);
        let mut theirs: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-12, "d={d}: {a} vs {b}");
        }
        let e = herm_eig(&m).unwrap();
        assert!(e.reconstruct().max_abs_diff(&m) < 1e-13);
    }
}

#[test]
fn real_embedding_doubles_spectrum() {
    for seed in 0..5 {
        let m = random_hermitian(6, &mut rng(100 + seed));
        let vals = eigvalsh(&m).unwrap();
        let emb = eigvalsh(&real_embedding(&m).unwrap()).unwrap();
        let doubled: Vec<f64> = vals.iter().flat_map(|&v| [v, v]).collect();
        for (a, b) in emb.iter().zip(&doubled) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

fn layouts() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn herm_eig_reconstructs(n in 1usize..24, seed in any::<u64>()) {
        let m = random_hermitian(n, &mut rng(seed));
        let e = herm_eig(&m).unwrap();
        let scale = m.max_abs().max(1.0);
        prop_assert!(e.reconstruct().max_abs_diff(&m) <= 1e-9 * scale);
        let vhv = &e.vectors.adjoint() * &e.vectors;
        prop_assert!(vhv.max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-9);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn partial_trace_linear_and_trace_preserving(dims in layouts(), seed in any::<u64>(), keep_mask in any::<u8>()) {
        let labels: Vec<String> = (0..dims.len()).map(|i| format!("S{i}")).collect();
        let layout = SystemLayout::new(labels.iter().cloned().zip(dims.iter().copied())).unwrap();
        let keep: Vec<&str> = labels.iter().enumerate()
            .filter(|(i, _)| keep_mask & (1 << i) != 0)
            .map(|(_, l)| l.as_str())
            .collect();
        let n = layout.total_dim();
        let a = random_matrix(n, seed);
        let b = random_matrix(n, seed.wrapping_add(1));
        let pa = partial_trace(&a, &layout, &keep).unwrap();
        let pb = partial_trace(&b, &layout, &keep).unwrap();
        let mut combo = a.scale(2.0);
        combo.axpy(-3.0, &b);
        let mut want = pa.scale(2.0);
        want.axpy(-3.0, &pb);
        prop_assert!(partial_trace(&combo, &layout, &keep).unwrap().max_abs_diff(&want) < 1e-12);
        prop_assert!((pa.trace() - a.trace()).norm() < 1e-12);
    }

    #[test]
    fn kron_is_associative(na in 1usize..4, nb in 1usize..4, nc in 1usize..4, seed in any::<u64>()) {
        let a = random_matrix(na, seed);
        let b = random_matrix(nb, seed ^ 1);
        let c = random_matrix(nc, seed ^ 2);
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) <= 1e-14);
    }

    #[test]
    fn swap_conjugation_exchanges_factors(d in 1usize..5, seed in any::<u64>()) {
        let a = random_matrix(d, seed);
        let b = random_matrix(d, seed ^ 7);
        let f = swap_operator(d);
        let lhs = &(&f * &kron(&a, &b)) * &f;
        prop_assert!(lhs.max_abs_diff(&kron(&b, &a)) <= 1e-12);
    }
}
