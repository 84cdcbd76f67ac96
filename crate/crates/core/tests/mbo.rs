mod common;

use common::*;
use plmbo::linalg::{smallest_eigenpairs, EigenBasis};
use plmbo::mbo::{
    diffusion_step, displacement, initialize_state, is_indicator_row, mbo_iterate, mbo_run, project_to_simplex,
    FidelitySpec, InitMode, MboConfig, StateMatrix,
};
use plmbo::{Dataset, DenseMatrix, SparseSymMatrix};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random state on the simplex, random labels with every class present, random `μ`.
fn instance(r: &mut ChaCha8Rng, n: usize, k: usize) -> (DenseMatrix<f64>, Vec<Option<usize>>, Vec<f64>) {
    let mut u = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let raw: Vec<f64> = (0..k).map(|_| r.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        for (c, v) in raw.iter().enumerate() {
            u[(i, c)] = v / s;
        }
    }
    let labels: Vec<Option<usize>> = (0..n)
        .map(|i| if i < k || r.random_bool(0.3) { Some(i % k) } else { None })
        .collect();
    let mu = labels.iter().map(|l| if l.is_some() { r.random_range(0.0..60.0) } else { 0.0 }).collect();
    (u, labels, mu)
}

/// `(I + dt L)⁻¹ (U − dt μ (U − Û))` by a dense solve.
fn diffusion_oracle(l: &SparseSymMatrix<f64>, u: &DenseMatrix<f64>, labels: &[Option<usize>], mu: &[f64], dt: f64) -> DenseMatrix<f64> {
    let (n, k) = (u.rows(), u.cols());
    let mut rhs = u.clone();
    for i in 0..n {
        if let Some(c) = labels[i] {
            for j in 0..k {
                let target = if j == c { 1.0 } else { 0.0 };
                rhs[(i, j)] = u[(i, j)] - dt * mu[i] * (u[(i, j)] - target);
            }
        }
    }
    let mut a = l.to_dense().map(|x| dt * x);
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    dense_solve(&a, &rhs)
}

fn truncated(basis: &EigenBasis<f64>, m: usize) -> EigenBasis<f64> {
    let cols: Vec<Vec<f64>> = (0..m).map(|j| basis.vectors.column(j)).collect();
    let mut v = DenseMatrix::zeros(basis.vectors.rows(), m);
    for (j, c) in cols.iter().enumerate() {
        v.set_column(j, c);
    }
    EigenBasis {
        values: basis.values[..m].to_vec(),
        vectors: v,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_exact(v in prop::collection::vec(-3.0f64..3.0, 1..5)) {
        let p = project_to_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(max_abs_diff(&p, &simplex_projection_oracle(&v)) < 1e-9);
        prop_assert!(max_abs_diff(&project_to_simplex(&p), &p) <= 1e-12);
    }

    #[test]
    fn projection_commutes_with_shift_and_permutation(v in prop::collection::vec(-3.0f64..3.0, 2..9), c in -5.0f64..5.0) {
        let p = project_to_simplex(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!(max_abs_diff(&project_to_simplex(&shifted), &p) < 1e-9);
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let mut back = project_to_simplex(&rev);
        back.reverse();
        prop_assert!(max_abs_diff(&back, &p) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_basis_diffusion_is_a_linear_solve(seed in any::<u64>(), n in 4usize..60, k in 2usize..5, dt in 0.01f64..1.0) {
        let mut r = rng(seed);
        let l = random_sparse_psd(&mut r, n, 0.1);
        let (u, labels, mu) = instance(&mut r, n, k);
        let fid = FidelitySpec::with_weights(&labels, k, mu.clone()).unwrap();
        let basis = smallest_eigenpairs(&l, n, 1e-10).unwrap();
        let got = diffusion_step(&u, &basis, &fid, dt).unwrap();
        let want = diffusion_oracle(&l, &u, &labels, &mu, dt);
        prop_assert!(got.sub(&want).unwrap().frobenius_norm() < 1e-8);
    }

    #[test]
    fn truncation_error_is_monotone(seed in any::<u64>(), n in 6usize..40, k in 2usize..4) {
        let mut r = rng(seed);
        let l = random_sparse_psd(&mut r, n, 0.2);
        let (u, labels, mu) = instance(&mut r, n, k);
        let fid = FidelitySpec::with_weights(&labels, k, mu.clone()).unwrap();
        let full = smallest_eigenpairs(&l, n, 1e-10).unwrap();
        let exact = diffusion_oracle(&l, &u, &labels, &mu, 0.1);
        let errs: Vec<f64> = (1..=n)
            .map(|m| diffusion_step(&u, &truncated(&full, m), &fid, 0.1).unwrap().sub(&exact).unwrap().frobenius_norm())
            .collect();
        prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", errs);
        prop_assert!(errs[n - 1] < 1e-8);
    }

    #[test]
    fn iteration_keeps_indicators_and_labels(seed in any::<u64>(), n in 6usize..50, k in 2usize..5, random in any::<bool>()) {
        let mut r = rng(seed);
        let l = random_sparse_psd(&mut r, n, 0.15);
        let (_, labels, _) = instance(&mut r, n, k);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let data = Dataset::new("pts", DenseMatrix::from_rows(&pts).unwrap(), labels.clone()).unwrap();
        let fid = FidelitySpec::new(&labels, k, 50.0).unwrap();
        let cfg = MboConfig {
            n_e: n.min(10),
            seed,
            init_mode: if random { InitMode::Random } else { InitMode::Voronoi },
            ..MboConfig::default()
        };
        let init = initialize_state(&fid, &data, &cfg).unwrap();
        for (i, l) in labels.iter().enumerate() {
            if let Some(c) = l {
                prop_assert_eq!(init.assignments()[i], *c);
                prop_assert!(is_indicator_row(init.row(i)));
            }
        }
        let out = mbo_run(&l, &fid, &data, &cfg).unwrap();
        prop_assert!(out.state.is_indicator());
        prop_assert!(out.iterations <= cfg.n_t);
    }
}

#[test]
fn displacement_picks_lowest_class_on_ties() {
    let u = DenseMatrix::from_rows(&[[0.5, 0.5, 0.0], [0.2, 0.4, 0.4], [-1.0, 3.0, 3.0]]).unwrap();
    assert_eq!(displacement(&u).assignments(), vec![0, 1, 1]);
}

#[test]
fn disconnected_cliques_follow_their_label() {
    let mut trip = Vec::new();
    for base in [0, 3] {
        for i in 0..3 {
            for j in (i + 1)..3 {
                trip.push((base + i, base + j, -1.0));
            }
            trip.push((base + i, base + i, 2.0));
        }
    }
    let l = SparseSymMatrix::from_triplets(6, trip).unwrap();
    let labels = vec![Some(1), None, None, None, Some(0), None];
    let fid = FidelitySpec::new(&labels, 2, 1000.0).unwrap();
    let basis = smallest_eigenpairs(&l, 6, 1e-12).unwrap();
    let mut start = DenseMatrix::from_rows(&[[0.5, 0.5]; 6]).unwrap();
    start.row_mut(0).copy_from_slice(&[0.0, 1.0]);
    start.row_mut(4).copy_from_slice(&[1.0, 0.0]);
    let out = mbo_iterate(&basis, &fid, StateMatrix::new(start).unwrap(), 0.5, 30, None).unwrap();
    assert_eq!(out.state.assignments(), vec![1, 1, 1, 0, 0, 0]);
}

#[test]
fn observer_sees_every_iteration() {
    let l = random_sparse_psd(&mut rng(2), 30, 0.2);
    let labels: Vec<Option<usize>> = (0..30).map(|i| (i % 5 == 0).then_some(i % 2)).collect();
    let fid = FidelitySpec::new(&labels, 2, 50.0).unwrap();
    let basis = smallest_eigenpairs(&l, 10, 1e-10).unwrap();
    let init = StateMatrix::new(DenseMatrix::from_rows(&vec![[1.0, 0.0]; 30]).unwrap()).unwrap();
    let mut seen = Vec::new();
    let mut obs = |it: usize, _: &StateMatrix<f64>, changed: usize| seen.push((it, changed));
    let out = mbo_iterate(&basis, &fid, init, 0.1, 25, Some(&mut obs)).unwrap();
    assert_eq!(seen.len(), out.iterations);
    assert_eq!(seen.last().unwrap().1 == 0, out.stalled);
}
