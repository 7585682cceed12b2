mod common;

use std::sync::OnceLock;

use connsel::evaluation::{two_sample_ttest, Variance};
use connsel::signal::recording_features;
use connsel::synth::*;
use connsel::wrapper::{CvScorer, SubsetScorer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn default_cohort() -> &'static Cohort {
    static COHORT: OnceLock<Cohort> = OnceLock::new();
    COHORT.get_or_init(|| generate_cohort(&CohortSpec::default()).unwrap())
}

/// Per-sample means of the features at planted and at non-planted ids.
fn planted_vs_rest(spec: &CohortSpec, label: u8, n: usize) -> (Vec<f64>, Vec<f64>) {
    let gt = spec.ground_truth().unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let rec = generate_recording(spec, label, connsel::derive_seed(99, &[s as u64])).unwrap();
            recording_features(&rec, &spec.pipeline).unwrap().0
        })
        .collect();
    let mut planted = Vec::new();
    let mut rest = Vec::new();
    for row in rows {
        let (mut p, mut r) = (Vec::new(), Vec::new());
        for (id, v) in row.into_iter().enumerate() {
            if gt.contains(&id) {
                p.push(v)
            } else {
                r.push(v)
            }
        }
        planted.push(p.iter().sum::<f64>() / p.len() as f64);
        rest.push(r.iter().sum::<f64>() / r.len() as f64);
    }
    (planted, rest)
}

#[test]
fn healthy_planted_ids_look_like_the_rest() {
    let spec = CohortSpec::default();
    let (planted, rest) = planted_vs_rest(&spec, 0, 20);
    let t = two_sample_ttest(&planted, &rest, Variance::Pooled).unwrap();
    assert!(t.p > 0.01, "t={} p={}", t.t, t.p);
}

#[test]
fn strong_pain_couplings_stand_out() {
    let mut spec = CohortSpec::default();
    for p in &mut spec.planted {
        p.strength = 0.9;
        p.lag = 0.25;
    }
    spec.expression_probability = 1.0;
    let (planted, rest) = planted_vs_rest(&spec, 1, 20);
    let mp = planted.iter().sum::<f64>() / 20.0;
    let mr = rest.iter().sum::<f64>() / 20.0;
    assert!(mp >= mr + 0.3, "planted {mp} rest {mr}");
}

#[test]
fn recordings_are_reproducible() {
    let spec = common::small_spec(2, 3);
    for label in [0, 1] {
        let a = generate_recording(&spec, label, 17).unwrap();
        let b = generate_recording(&spec, label, 17).unwrap();
        assert_eq!(a, b);
    }
    assert_ne!(generate_recording(&spec, 1, 17).unwrap(), generate_recording(&spec, 1, 18).unwrap());
}

#[test]
fn seed_override_changes_only_that_row() {
    let spec = common::small_spec(4, 5);
    let base = generate_cohort(&spec).unwrap();
    let mut other = spec.clone();
    other.seed_overrides.insert(5, 12345);
    let changed = generate_cohort(&other).unwrap();
    for r in 0..base.dataset.n_samples() {
        let same = base.dataset.x().row(r) == changed.dataset.x().row(r);
        assert_eq!(same, r != 5, "row {r}");
    }
    assert_eq!(base.dataset.y(), changed.dataset.y());
}

#[test]
fn small_cohort_shape_and_balance() {
    let spec = common::small_spec(3, 1);
    let c = generate_cohort(&spec).unwrap();
    assert_eq!(c.dataset.x().dim(), (6, 15 * 5));
    assert_eq!(c.dataset.class_counts(), [3, 3]);
    assert_eq!(c.dataset.sample_ids()[0], "healthy_000");
    assert_eq!(c.dataset.sample_ids()[3], "pain_000");
    let layout = spec.layout();
    let mut expect: Vec<usize> = spec.planted.iter().map(|p| layout.encode(p.i, p.j, p.band).unwrap().id).collect();
    expect.sort_unstable();
    assert_eq!(c.ground_truth, expect);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = common::small_spec(2, 0);
    spec.planted[0].lag = 0.0;
    assert!(spec.validate().is_err());
    let mut spec = common::small_spec(2, 0);
    spec.planted[1].i = 0;
    spec.planted[1].j = 3;
    spec.planted[1].band = 1;
    assert!(spec.validate().is_err(), "duplicate coupling accepted");
    let mut spec = common::small_spec(2, 0);
    spec.planted[0].j = 6;
    assert!(generate_cohort(&spec).is_err());
}

#[test]
fn default_cohort_shape() {
    let c = default_cohort();
    assert_eq!(c.dataset.x().dim(), (74, 855));
    assert_eq!(c.dataset.class_counts(), [37, 37]);
    assert_eq!(c.ground_truth.len(), 8);
}

#[test]
fn ground_truth_beats_random_noise() {
    let c = default_cohort();
    let scorer = CvScorer::new(&c.dataset, 10, 0).unwrap();
    let gt = scorer.score(&c.ground_truth).unwrap();
    let mut noise: Vec<usize> = (0..855).filter(|id| !c.ground_truth.contains(id)).collect();
    noise.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let noise = scorer.score(&noise[..8]).unwrap();
    assert!(gt >= 0.9, "ground truth {gt}");
    assert!(noise <= 0.7, "noise {noise}");
}
