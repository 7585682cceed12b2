//! Floating search on a small synthetic cohort, next to classical SFFS.

use connsel::selection::{msffs, sffs_baseline, Action, SearchOptions};
use connsel::synth::{generate_cohort, CohortSpec, PlantedCoupling};
use connsel::wrapper::CvScorer;

fn main() -> connsel::Result<()> {
    let planted = vec![
        PlantedCoupling { i: 0, j: 4, band: 1, lag: 0.25, strength: 0.7 },
        PlantedCoupling { i: 1, j: 6, band: 2, lag: 0.25, strength: 0.7 },
        PlantedCoupling { i: 3, j: 7, band: 3, lag: 0.2, strength: 0.7 },
    ];
    let spec = CohortSpec { n_per_class: 15, channels: 8, duration_s: 80.0, planted, seed: 2, expression_probability: 0.6, ..CohortSpec::default() };
    let cohort = generate_cohort(&spec)?;
    let ds = &cohort.dataset;
    let scorer = CvScorer::new(ds, 5, 0)?;
    let pool = ds.feature_ids().to_vec();

    let m = msffs(&pool, 5, &scorer, SearchOptions::default())?;
    let s = sffs_baseline(&pool, 5, &scorer)?;
    println!("planted: {:?}", cohort.ground_truth);
    for k in 1..=5 {
        println!("k={k}  mSFFS {:.3} {:?}   SFFS {:.3} {:?}", m.scores[k], m.winner(k), s.scores[k], s.winner(k));
    }
    let drops = m.trajectory.iter().filter(|e| e.action == Action::Drop && e.accepted).count();
    println!("{} subsets evaluated, {} accepted backward steps", m.evaluations(), drops);
    Ok(())
}
