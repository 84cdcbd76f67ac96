#![allow(clippy::needless_range_loop)]

use plmbo::datagen::{gen_banana, gen_two_gaussians, load_csv, mean_separation, sample_labels, save_csv, TrialPlan};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn two_gaussians_hit_their_bayes_error() {
    // The optimal rule thresholds the projection onto the mean difference at zero.
    let (n, dim, target) = (20_000, 10, 0.05);
    let d = gen_two_gaussians(n, dim, target, 7).unwrap();
    let y = d.ground_truth().unwrap();
    let errors = (0..n)
        .filter(|&i| {
            let s: f64 = d.point(i).iter().sum();
            usize::from(s > 0.0) != y[i]
        })
        .count();
    let rate = errors as f64 / n as f64;
    let se = (target * (1.0 - target) / n as f64).sqrt();
    assert!((rate - target).abs() < 4.0 * se, "empirical Bayes error {rate}");

    let delta = mean_separation(target).unwrap();
    for c in 0..2 {
        let rows: Vec<usize> = (0..n).filter(|&i| y[i] == c).collect();
        let mean_proj: f64 = rows.iter().map(|&i| d.point(i).iter().sum::<f64>()).sum::<f64>() / rows.len() as f64 / (dim as f64).sqrt();
        let want = if c == 0 { -delta / 2.0 } else { delta / 2.0 };
        assert!((mean_proj - want).abs() < 0.05, "class {c} mean {mean_proj}");
    }
}

#[test]
fn separation_inverts_the_normal_tail() {
    let std = Normal::new(0.0, 1.0).unwrap();
    for e in [0.01, 0.05, 0.2, 0.45] {
        let d = mean_separation(e).unwrap();
        assert!((std.cdf(-d / 2.0) - e).abs() < 1e-9 * e, "{}", std.cdf(-d / 2.0) - e);
    }
}

#[test]
fn banana_classes_sit_on_their_arcs() {
    let d = gen_banana(4000, 0.0, 3).unwrap();
    let y = d.ground_truth().unwrap();
    for i in 0..d.len() {
        let (x0, x1) = (d.point(i)[0], d.point(i)[1]);
        let r = if y[i] == 0 { (x0 * x0 + x1 * x1).sqrt() } else { ((1.0 - x0).powi(2) + (0.5 - x1).powi(2)).sqrt() };
        assert!((r - 1.0).abs() < 1e-12);
    }
    assert_eq!(y.iter().filter(|&&c| c == 0).count(), 2000);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.csv");
    let d = gen_two_gaussians(101, 7, 0.1, 9).unwrap();
    save_csv(&d, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.features(), d.features());
    assert_eq!(back.labels(), d.labels());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampling_cardinality(n in 10usize..400, k in 1usize..5, frac in 0.0f64..1.0, balanced in any::<bool>(), seed in any::<u64>(), trial in 0usize..20) {
        let truth: Vec<usize> = (0..n).map(|i| (i * 7 + i / 3) % k).collect();
        let n_labeled = ((n as f64 * frac) as usize).max(k).min(n);
        let plan = TrialPlan { n_labeled, n_trials: 20, seed, per_class_balance: balanced };
        match sample_labels(&truth, &plan, trial) {
            Ok(mask) => {
                prop_assert_eq!(mask.iter().filter(|&&m| m).count(), n_labeled);
                prop_assert_eq!(&mask, &sample_labels(&truth, &plan, trial).unwrap());
                if balanced {
                    for c in 0..k {
                        let got = (0..n).filter(|&i| mask[i] && truth[i] == c).count();
                        let want = n_labeled / k + usize::from(c < n_labeled % k);
                        prop_assert_eq!(got, want);
                    }
                }
            }
            Err(_) => prop_assert!(balanced, "unbalanced sampling of a valid count failed"),
        }
    }
}

#[test]
fn trials_draw_different_label_sets() {
    let truth: Vec<usize> = (0..550).map(|i| i % 2).collect();
    let plan = TrialPlan { n_labeled: 50, n_trials: 10, seed: 1, per_class_balance: true };
    let masks: Vec<Vec<bool>> = (0..10).map(|t| sample_labels(&truth, &plan, t).unwrap()).collect();
    for a in 0..10 {
        for b in (a + 1)..10 {
            let overlap = (0..550).filter(|&i| masks[a][i] && masks[b][i]).count();
            // Expected overlap is 50 · 25/275 ≈ 4.5; identical sets would give 50.
            assert!(overlap < 20, "trials {a} and {b} share {overlap} labels");
        }
    }
}
