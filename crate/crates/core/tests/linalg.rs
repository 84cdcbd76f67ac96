mod common;

use common::*;
use plmbo::linalg::qr::{null_space, numerical_rank};
use plmbo::linalg::{dense_eig, smallest_eigenpairs, LanczosOptions};
use plmbo::{DenseMatrix, SparseSymMatrix};
use proptest::prelude::*;
use rand::Rng;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sparse_matvec_matches_dense(seed in any::<u64>(), n in 1usize..60) {
        let mut r = rng(seed);
        let m = random_sparse_psd(&mut r, n, 0.1);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let sparse = m.matvec(&v).unwrap();
        let dense = m.to_dense().matvec(&v).unwrap();
        prop_assert!(max_abs_diff(&sparse, &dense) < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense(seed in any::<u64>(), n in 12usize..120, n_e in 1usize..10) {
        let mut r = rng(seed);
        let m = random_sparse_psd(&mut r, n, 0.05);
        let basis = smallest_eigenpairs(&m, n_e, 1e-10).unwrap();
        let full = dense_eig(&m.to_dense()).unwrap();
        for (a, b) in basis.values.iter().zip(&full.values) {
            prop_assert!(rel_err(*a, *b) < 1e-8, "{a} vs {b}");
        }
        let scale = m.frobenius_norm().max(1.0);
        for res in basis.residuals(&m).unwrap() {
            prop_assert!(res <= 1e-10 * scale * 1.01);
        }
        let gram = basis.vectors.transpose_matmul(&basis.vectors).unwrap();
        prop_assert!(gram.sub(&DenseMatrix::identity(n_e)).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn dense_eig_reconstructs(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let m = random_sparse_psd(&mut r, n, 0.3).to_dense();
        let e = dense_eig(&m).unwrap();
        let lam = DenseMatrix::from_diag(&e.values);
        let back = e.vectors.matmul(&lam).unwrap().matmul(&e.vectors.transpose()).unwrap();
        prop_assert!(back.sub(&m).unwrap().max_abs() < 1e-10 * m.max_abs().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn null_space_is_orthonormal_kernel(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12) {
        let mut r = rng(seed);
        let entries: Vec<i64> = (0..rows * cols).map(|_| r.random_range(-1i64..=1)).collect();
        let a = DenseMatrix::from_vec(rows, cols, entries.iter().map(|&x| x as f64).collect()).unwrap();
        let z = null_space(&a, 1e-10);
        let rank = rational_rank(rows, cols, &entries);
        prop_assert_eq!(z.cols(), cols - rank);
        prop_assert_eq!(numerical_rank(&a, 1e-10), rank);
        if z.cols() > 0 {
            prop_assert!(a.matmul(&z).unwrap().max_abs() < 1e-10);
            let gram = z.transpose_matmul(&z).unwrap();
            prop_assert!(gram.sub(&DenseMatrix::identity(z.cols())).unwrap().max_abs() < 1e-10);
        }
    }
}

#[test]
fn lanczos_with_repeated_eigenvalues() {
    // Disjoint copies of one path graph: every eigenvalue has multiplicity 4.
    let mut trip = Vec::new();
    for c in 0..4 {
        for i in 0..9 {
            let a = c * 10 + i;
            trip.push((a, a + 1, -1.0));
        }
    }
    let mut deg = [0.0f64; 40];
    for &(a, b, _) in &trip {
        deg[a] += 1.0;
        deg[b] += 1.0;
    }
    trip.extend(deg.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let m = SparseSymMatrix::from_triplets(40, trip).unwrap();
    let basis = smallest_eigenpairs(&m, 8, 1e-10).unwrap();
    let full = dense_eig(&m.to_dense()).unwrap();
    for (a, b) in basis.values.iter().zip(&full.values) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn lanczos_is_reproducible() {
    let m = random_sparse_psd(&mut rng(5), 200, 0.03);
    let opts = LanczosOptions::default();
    let a = plmbo::linalg::smallest_eigenpairs_with(&m, 6, &opts).unwrap();
    let b = plmbo::linalg::smallest_eigenpairs_with(&m, 6, &opts).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.vectors, b.vectors);
}

#[test]
fn f32_matches_f64_roughly() {
    let m = random_sparse_psd(&mut rng(9), 60, 0.08);
    let m32: SparseSymMatrix<f32> =
        SparseSymMatrix::from_triplets(60, m.entries().iter().map(|&(i, j, v)| (i, j, v as f32))).unwrap();
    let a = smallest_eigenpairs(&m, 4, 1e-9).unwrap();
    let b = smallest_eigenpairs(&m32, 4, 1e-4).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - f64::from(*y)).abs() < 1e-3);
    }
}
