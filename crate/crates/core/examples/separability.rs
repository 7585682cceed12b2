//! Bhattacharyya distance on raw features and on a t-SNE embedding.

use connsel::evaluation::{bhattacharyya, class_bhattacharyya, tsne_embed, TsneConfig};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> connsel::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 60;
    let y: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
    for shift in [0.0, 0.5, 1.0, 2.0] {
        let x = Array2::from_shape_fn((n, 5), |(i, c)| {
            rng.sample::<f64, _>(StandardNormal) + if c == 0 { shift * y[i] as f64 } else { 0.0 }
        });
        let raw = bhattacharyya(x.slice(s![..n / 2, ..]), x.slice(s![n / 2.., ..]))?;
        let emb = tsne_embed(x.view(), 0, &TsneConfig { perplexity: 15.0, ..TsneConfig::default() })?;
        let embedded = class_bhattacharyya(emb.coords.view(), &y)?;
        println!("mean shift {shift:.1}: D_B raw {raw:.3}, on embedding {embedded:.3}");
    }
    Ok(())
}
