//! Planted features against a random selection of the same size: fold
//! accuracies, t-test, Jaccard and embedding separability.

use connsel::evaluation::{compare_selections, CompareConfig, NamedSelection, NestedCvConfig};
use connsel::synth::{generate_cohort, CohortSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn main() -> connsel::Result<()> {
    let spec = CohortSpec { n_per_class: 20, duration_s: 60.0, seed: 3, ..CohortSpec::default() };
    let cohort = generate_cohort(&spec)?;
    let mut ids = cohort.dataset.feature_ids().to_vec();
    ids.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
    let random: Vec<usize> = ids[..cohort.ground_truth.len()].to_vec();

    let selections = vec![
        NamedSelection { name: "planted".into(), ids: cohort.ground_truth.clone() },
        NamedSelection { name: "random".into(), ids: random },
    ];
    let cfg = CompareConfig {
        nested: NestedCvConfig { outer_k: 5, inner_k: 5, ..NestedCvConfig::default() },
        ..CompareConfig::default()
    };
    let cmp = compare_selections(&cohort.dataset, &selections, &cfg)?;
    for m in &cmp.methods {
        println!("{:<8} acc {:.3} ± {:.3}  F1 {:.3}  D_B {:.3}", m.name, m.report.accuracy.mean, m.report.accuracy.std, m.report.f1.mean, m.bhattacharyya);
    }
    for p in &cmp.pairs {
        println!("{} vs {}: t {:.3}  p {:.4}  Jaccard {:.3}", p.a, p.b, p.t, p.p, p.jaccard);
    }
    Ok(())
}
