use connsel::evaluation::{nested_cv, NestedCvConfig};
use connsel::synth::{generate_cohort, CohortSpec};

fn main() -> connsel::Result<()> {
    let spec = CohortSpec { n_per_class: 15, duration_s: 60.0, seed: 9, ..CohortSpec::default() };
    let cohort = generate_cohort(&spec)?;
    let cfg = NestedCvConfig { outer_k: 5, inner_k: 5, seed: 1, ..NestedCvConfig::default() };
    let report = nested_cv(&cohort.dataset, &cohort.ground_truth, &cfg)?;

    for f in &report.folds {
        println!("fold {}: C={:<5} gamma x{:<4} inner {:.3}  test acc {:.3}", f.fold, f.params.c, f.params.gamma_factor, f.inner_accuracy, f.metrics.accuracy);
    }
    println!("accuracy {:.3} ± {:.3}", report.accuracy.mean, report.accuracy.std);
    println!("precision {:.3}  recall {:.3}  F1 {:.3}", report.precision.mean, report.recall.mean, report.f1.mean);
    println!("pooled confusion {:?}", report.confusion);
    Ok(())
}
