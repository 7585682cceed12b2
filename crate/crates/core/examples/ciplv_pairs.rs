//! ciPLV ignores zero-lag coupling and responds to lagged coupling.

use std::f64::consts::PI;

use connsel::signal::{ciplv, cross_spectrum, EpochSet};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FS: f64 = 256.0;
const N: usize = 2560;

fn main() -> connsel::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n_ep = 30;
    let phases: Vec<f64> = (0..n_ep).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let noise = Array3::from_shape_fn((n_ep, 4, N), |_| 0.3 * rng.sample::<f64, _>(StandardNormal));

    // 0: source, 1: zero-lag copy, 2: quarter-cycle lag, 3: unrelated noise
    let lags = [0.0, 0.0, PI / 2.0];
    let data = Array3::from_shape_fn((n_ep, 4, N), |(e, c, t)| {
        let tone = if c < 3 { (2.0 * PI * 10.0 * t as f64 / FS + phases[e] - lags[c]).sin() } else { 0.0 };
        tone + noise[[e, c, t]]
    });
    let es = EpochSet::new(data, FS, 10.0, vec!["src".into(), "copy".into(), "lag".into(), "noise".into()])?;

    for (name, ch) in [("zero lag", 1), ("quarter lag", 2), ("unrelated", 3)] {
        let c = ciplv(&es, 0, ch, 10.0)?;
        let s = cross_spectrum(&es, 0, ch, 10.0, 0)?.value();
        println!("{name:>12}: ciPLV {:.3}   epoch-0 phase {:+.2} rad", c.value, s.arg());
    }
    Ok(())
}
