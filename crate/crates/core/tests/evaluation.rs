mod common;

use std::collections::HashSet;

use connsel::dataset::Dataset;
use connsel::evaluation::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn quick(seed: u64) -> NestedCvConfig {
    NestedCvConfig {
        outer_k: 5,
        inner_k: 4,
        seed,
        ..NestedCvConfig::default()
    }
}

#[test]
fn separable_subset_is_perfect() {
    let ds = common::perfect_pool(20, 3, 1);
    let r = nested_cv(&ds, &[0], &quick(0)).unwrap();
    assert_eq!(r.accuracy.mean, 1.0);
    assert_eq!(r.f1.mean, 1.0);
    assert_eq!(r.accuracy.std, 0.0);
    assert_eq!(r.folds.len(), 5);
}

#[test]
fn random_labels_are_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 60;
    let mut y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    use rand::seq::SliceRandom;
    y.shuffle(&mut rng);
    let x = Array2::from_shape_fn((n, 4), |_| rng.sample::<f64, _>(StandardNormal));
    let ds = Dataset::new(x, y, (0..4).collect(), (0..n).map(|i| format!("r{i}")).collect()).unwrap();
    let r = nested_cv(&ds, &[0, 1, 2, 3], &quick(3)).unwrap();
    assert!((r.accuracy.mean - 0.5).abs() <= 0.2, "{}", r.accuracy.mean);
}

#[test]
fn nested_cv_is_deterministic() {
    let ds = common::toy_pool(15, 2);
    let a = nested_cv(&ds, &[1, 4], &quick(5)).unwrap();
    let b = nested_cv(&ds, &[1, 4], &quick(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn outer_test_sets_partition_the_cohort() {
    let ds = common::toy_pool(15, 2);
    let r = nested_cv(&ds, &[1, 4], &quick(7)).unwrap();
    let mut seen = HashSet::new();
    for f in &r.folds {
        for s in &f.test_samples {
            assert!(seen.insert(s.clone()), "{s} tested twice");
        }
        assert_eq!(f.confusion.total(), f.test_samples.len());
    }
    assert_eq!(seen.len(), ds.n_samples());
}

#[test]
fn corrupting_test_rows_leaves_inner_search_alone() {
    let ds = common::toy_pool(15, 3);
    let subset = [0, 1, 4];
    let cfg = quick(11);
    let base = nested_cv(&ds, &subset, &cfg).unwrap();
    for fold in &base.folds {
        let mut x = ds.x().clone();
        for (i, id) in ds.sample_ids().iter().enumerate() {
            if fold.test_samples.contains(id) {
                x.row_mut(i).mapv_inplace(|v| v * 50.0 - 1e3);
            }
        }
        let corrupt = Dataset::new(x, ds.y().to_vec(), ds.feature_ids().to_vec(), ds.sample_ids().to_vec()).unwrap();
        let r = nested_cv(&corrupt, &subset, &cfg).unwrap();
        let same = &r.folds[fold.fold];
        assert_eq!(same.params, fold.params);
        assert_eq!(same.inner_accuracy, fold.inner_accuracy);
        assert_eq!(same.test_samples, fold.test_samples);
    }
}

#[test]
fn irrelevant_feature_shift_keeps_perfect_fold_accuracy() {
    let ds = common::perfect_pool(20, 1, 9);
    let cfg = quick(4);
    let base = nested_cv(&ds, &[0], &cfg).unwrap();
    for fold in &base.folds {
        let mut x = ds.x().clone();
        for (i, id) in ds.sample_ids().iter().enumerate() {
            if fold.test_samples.contains(id) {
                x[[i, 1]] += 100.0;
            }
        }
        let shifted = Dataset::new(x, ds.y().to_vec(), ds.feature_ids().to_vec(), ds.sample_ids().to_vec()).unwrap();
        assert_eq!(nested_cv(&shifted, &[0], &cfg).unwrap().fold_accuracies(), base.fold_accuracies());
    }
}

#[test]
fn pooled_and_fold_mean_metrics_agree() {
    let ds = common::toy_pool(25, 6);
    let r = nested_cv(&ds, &[0, 1, 4, 6], &quick(2)).unwrap();
    assert!((r.pooled.accuracy - r.accuracy.mean).abs() <= 0.05);
    assert!((r.pooled.recall - r.recall.mean).abs() <= 0.05);
    for v in [r.accuracy.mean, r.precision.mean, r.recall.mean, r.f1.mean] {
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn metrics_fixture() {
    let m = classification_metrics(9, 1, 2, 8).unwrap();
    let expect = [0.85, 0.9, 9.0 / 11.0, 2.0 * 0.9 * (9.0 / 11.0) / (0.9 + 9.0 / 11.0)];
    for (got, want) in [m.accuracy, m.precision, m.recall, m.f1].iter().zip(expect) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((m.f1 - 0.8571).abs() < 1e-4);
}

#[test]
fn ttest_matches_reference_oracle() {
    // scipy.stats.ttest_ind
    let a = [0.9, 1.0, 0.8];
    let b = [0.5, 0.6, 0.4];
    let r = two_sample_ttest(&a, &b, Variance::Pooled).unwrap();
    assert!((r.t - 4.8989794855663575).abs() < 1e-9);
    assert!((r.p - 0.008049893100837714).abs() < 1e-9);
    assert_eq!(r.df, 4.0);
    // scipy.stats.ttest_ind(equal_var=False)
    let w = two_sample_ttest(&[0.9, 1.0, 0.8, 0.85], &b, Variance::Welch).unwrap();
    assert!((w.t - 5.396407334626635).abs() < 1e-9);
    assert!((w.p - 0.005746366064380631).abs() < 1e-7);
}

#[test]
fn ttest_degenerate_cases() {
    let same = two_sample_ttest(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], Variance::Pooled).unwrap();
    assert_eq!((same.t, same.p), (0.0, 1.0));
    assert!(two_sample_ttest(&[1.0, 1.0], &[0.5, 0.5], Variance::Pooled).is_err());
    assert!(two_sample_ttest(&[1.0], &[0.5, 0.4], Variance::Pooled).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn ttest_antisymmetric(a in prop::collection::vec(0.0f64..1.0, 2..12), b in prop::collection::vec(0.0f64..1.0, 2..12)) {
        let ab = two_sample_ttest(&a, &b, Variance::Pooled);
        let ba = two_sample_ttest(&b, &a, Variance::Pooled);
        if let (Ok(ab), Ok(ba)) = (ab, ba) {
            prop_assert!((ab.t + ba.t).abs() < 1e-9);
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!(ab.p > 0.0 && ab.p <= 1.0);
        }
    }

    #[test]
    fn jaccard_properties(a in prop::collection::btree_set(0usize..40, 0..15), b in prop::collection::btree_set(0usize..40, 0..15), extra in 40usize..60) {
        let a: Vec<usize> = a.into_iter().collect();
        let b: Vec<usize> = b.into_iter().collect();
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
        let (mut a2, mut b2) = (a.clone(), b.clone());
        a2.push(extra);
        b2.push(extra);
        prop_assert!(jaccard(&a2, &b2) >= j);
    }
}

fn gaussian(n: usize, d: usize, mean: f64, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| mean + scale * rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn bhattacharyya_sample_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x1 = gaussian(40, 3, 0.0, 1.0, &mut rng);
    let x2 = gaussian(50, 3, 0.4, 1.5, &mut rng);
    let d12 = bhattacharyya(x1.view(), x2.view()).unwrap();
    let d21 = bhattacharyya(x2.view(), x1.view()).unwrap();
    assert!((d12 - d21).abs() < 1e-9);
    assert!(d12 > 0.0);
    assert!(bhattacharyya(x1.view(), x1.view()).unwrap().abs() < 1e-9);
}

#[test]
fn bhattacharyya_converges_to_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x1 = gaussian(20_000, 2, 0.0, 1.0, &mut rng);
    let x2 = gaussian(20_000, 2, 0.0, 2.0, &mut rng);
    let d = bhattacharyya(x1.view(), x2.view()).unwrap();
    assert!((d - 0.2231).abs() < 0.01, "{d}");
    let shifted = gaussian(20_000, 2, 0.0, 1.0, &mut rng) + ndarray::array![1.0, 0.0];
    let d = bhattacharyya(x1.view(), shifted.view()).unwrap();
    assert!((d - 0.125).abs() < 0.01, "{d}");
}

#[test]
fn bhattacharyya_with_fewer_samples_than_dims_is_regularized() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x1 = gaussian(4, 6, 0.0, 1.0, &mut rng);
    let x2 = gaussian(4, 6, 1.0, 1.0, &mut rng);
    let d = bhattacharyya(x1.view(), x2.view()).unwrap();
    assert!(d.is_finite() && d >= 0.0);
}

fn two_clusters(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, c)| rng.sample::<f64, _>(StandardNormal) + if c == 0 { 20.0 * y[i] as f64 } else { 0.0 });
    (x, y)
}

fn nn_purity(coords: &Array2<f64>, y: &[u8]) -> f64 {
    let n = y.len();
    let mut hits = 0;
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let da = (&coords.row(i) - &coords.row(a)).mapv(|v| v * v).sum();
                let db = (&coords.row(i) - &coords.row(b)).mapv(|v| v * v).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        hits += usize::from(y[nearest] == y[i]);
    }
    hits as f64 / n as f64
}

#[test]
fn tsne_separates_distant_clusters() {
    let (x, y) = two_clusters(80, 4);
    let e = tsne_embed(x.view(), 0, &TsneConfig::default()).unwrap();
    assert_eq!(e.coords.dim(), (80, 2));
    assert!(e.coords.iter().all(|v| v.is_finite()));
    assert!(nn_purity(&e.coords, &y) >= 0.95);
    let again = tsne_embed(x.view(), 0, &TsneConfig::default()).unwrap();
    assert_eq!(e.coords, again.coords);
}

#[test]
fn tsne_rejects_large_perplexity() {
    let (x, _) = two_clusters(10, 0);
    assert!(matches!(tsne_embed(x.view(), 0, &TsneConfig::default()), Err(connsel::Error::Argument(_))));
}

#[test]
fn comparing_a_selection_with_itself() {
    let ds = common::toy_pool(20, 5);
    let cfg = CompareConfig {
        nested: quick(1),
        tsne: TsneConfig {
            perplexity: 10.0,
            iterations: 300,
            ..TsneConfig::default()
        },
        variance: Variance::Pooled,
    };
    let sels = vec![
        NamedSelection { name: "a".into(), ids: vec![1, 4] },
        NamedSelection { name: "b".into(), ids: vec![1, 4] },
        NamedSelection { name: "noise".into(), ids: vec![5, 7] },
    ];
    let cmp = compare_selections(&ds, &sels, &cfg).unwrap();
    assert_eq!(cmp.methods.len(), 3);
    assert_eq!(cmp.pairs.len(), 3);
    let ab = cmp.pairs.iter().find(|p| p.a == "a" && p.b == "b").unwrap();
    assert_eq!((ab.t, ab.p, ab.jaccard), (0.0, 1.0, 1.0));
    assert_eq!(cmp.methods[0].report, cmp.methods[1].report);
    let signal = &cmp.methods[0];
    let noise = &cmp.methods[2];
    assert!(signal.report.accuracy.mean > noise.report.accuracy.mean);
    assert!(signal.bhattacharyya >= 0.0 && noise.bhattacharyya >= 0.0);
    let n = ds.n_samples();
    assert_eq!(signal.embedding.as_ref().unwrap().coords.len_of(Axis(0)), n);
}
