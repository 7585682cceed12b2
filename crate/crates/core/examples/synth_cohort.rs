//! Generate a reduced synthetic cohort, write it as CSV and list the planted
//! features by name.

use connsel::dataset::save_dataset;
use connsel::synth::{generate_cohort, CohortSpec};

fn main() -> connsel::Result<()> {
    let spec = CohortSpec {
        n_per_class: 10,
        duration_s: 60.0,
        seed: 4,
        ..CohortSpec::default()
    };
    let cohort = generate_cohort(&spec)?;
    let ds = &cohort.dataset;
    println!("{} samples x {} features, classes {:?}", ds.n_samples(), ds.n_features(), ds.class_counts());
    for &id in &cohort.ground_truth {
        let col = ds.column(id).expect("planted id in dataset");
        let (mut healthy, mut pain) = (0.0, 0.0);
        for (v, &y) in col.iter().zip(ds.y()) {
            if y == 1 { pain += v } else { healthy += v }
        }
        let n = spec.n_per_class as f64;
        println!("{:>4} {:<16} healthy {:.3}  pain {:.3}", id, ds.feature_name(id), healthy / n, pain / n);
    }

    let path = std::env::temp_dir().join("connsel_synth_example.csv");
    save_dataset(ds, &path)?;
    println!("written to {}", path.display());
    Ok(())
}
