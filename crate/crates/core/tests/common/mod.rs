#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Mutex;

use connsel::dataset::Dataset;
use connsel::synth::{CohortSpec, PlantedCoupling};
use connsel::wrapper::SubsetScorer;
use connsel::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// 8-feature toy pool: graded mean shifts, one interacting pair, noise.
pub fn toy_pool(n_per_class: usize, seed: u64) -> Dataset {
    let shifts = [0.3, 0.9, 0.0, 0.0, 0.6, 0.0, 0.2, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n_per_class)).collect();
    let mut x = Array2::zeros((n, 8));
    for i in 0..n {
        for f in 0..8 {
            x[[i, f]] = rng.sample::<f64, _>(StandardNormal) + shifts[f] * y[i] as f64;
        }
        // features 2 and 3 only carry the label through their product sign
        let s = if y[i] == 1 { 1.0 } else { -1.0 };
        let a: f64 = rng.sample(StandardNormal);
        x[[i, 2]] = a;
        x[[i, 3]] = s * a.signum() * (0.5 + rng.gen::<f64>()) + 0.3 * rng.sample::<f64, _>(StandardNormal);
    }
    let ids = (0..n).map(|i| format!("s{i:02}")).collect();
    Dataset::new(x, y, (0..8).collect(), ids).unwrap()
}

/// Plain greedy forward selection: `G_k = G_{k-1} ∪ argmax f`, ties to the
/// lowest id. Returns the score of every prefix size.
pub fn greedy_forward(pool: &[usize], k_max: usize, score: &dyn SubsetScorer) -> Vec<(Vec<usize>, f64)> {
    let mut current: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..k_max {
        let mut best: Option<(usize, f64)> = None;
        for &f in pool.iter().filter(|f| !current.contains(f)) {
            let mut set = current.clone();
            set.push(f);
            set.sort_unstable();
            let s = score.score(&set).unwrap();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((f, s));
            }
        }
        let (f, s) = best.unwrap();
        current.push(f);
        current.sort_unstable();
        out.push((current.clone(), s));
    }
    out
}

/// Wraps a scorer and counts how often each canonical subset is scored.
pub struct CountingScorer<'a> {
    pub inner: &'a dyn SubsetScorer,
    pub calls: Mutex<HashMap<Vec<usize>, usize>>,
}

impl<'a> CountingScorer<'a> {
    pub fn new(inner: &'a dyn SubsetScorer) -> Self {
        Self {
            inner,
            calls: Mutex::new(HashMap::new()),
        }
    }

    pub fn max_calls(&self) -> usize {
        self.calls.lock().unwrap().values().copied().max().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl SubsetScorer for CountingScorer<'_> {
    fn score(&self, subset: &[usize]) -> Result<f64> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        *self.calls.lock().unwrap().entry(key).or_insert(0) += 1;
        self.inner.score(subset)
    }
}

/// A small, fast cohort: 6 channels, one minute per recording.
pub fn small_spec(n_per_class: usize, seed: u64) -> CohortSpec {
    CohortSpec {
        n_per_class,
        channels: 6,
        fs: 128.0,
        duration_s: 70.0,
        planted: vec![
            PlantedCoupling {
                i: 0,
                j: 3,
                band: 1,
                lag: 0.25,
                strength: 0.9,
            },
            PlantedCoupling {
                i: 2,
                j: 5,
                band: 3,
                lag: 0.25,
                strength: 0.8,
            },
        ],
        expression_probability: 1.0,
        seed,
        ..CohortSpec::default()
    }
}

/// Perfectly separating feature 0 followed by `noise` label-independent columns.
pub fn perfect_pool(n_per_class: usize, noise: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
    let x = Array2::from_shape_fn((n, noise + 1), |(i, f)| {
        if f == 0 {
            y[i] as f64 * 4.0 + 0.1 * rng.gen::<f64>()
        } else {
            rng.sample(StandardNormal)
        }
    });
    let ids = (0..n).map(|i| format!("s{i:02}")).collect();
    Dataset::new(x, y, (0..=noise).collect(), ids).unwrap()
}
