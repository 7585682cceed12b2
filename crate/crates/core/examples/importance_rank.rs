//! Permutation importance, threshold preselection and top-n ranking.

use connsel::selection::{permutation_importance, preselect, rank_topn};
use connsel::synth::{generate_cohort, CohortSpec};
use connsel::wrapper::SvmParams;

fn main() -> connsel::Result<()> {
    let spec = CohortSpec { n_per_class: 15, channels: 6, duration_s: 60.0, seed: 1, expression_probability: 1.0, ..CohortSpec::default() };
    let planted = spec.planted.iter().filter(|p| p.i < 6 && p.j < 6).cloned().collect();
    let spec = CohortSpec { planted, ..spec };
    let cohort = generate_cohort(&spec)?;
    let ds = &cohort.dataset;

    let imp = permutation_importance(ds, 5, SvmParams::default(), 0, 3)?;
    let pool = preselect(ds.feature_ids(), &imp, 0.0)?;
    println!("{} of {} features have positive importance", pool.len(), ds.n_features());
    for id in rank_topn(&imp, 5)? {
        let mark = if cohort.ground_truth.contains(&id) { "planted" } else { "" };
        println!("{:<16} {:+.4} {mark}", ds.feature_name(id), imp.get(id).unwrap());
    }
    Ok(())
}
