pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod selection;
pub mod signal;
pub mod synth;
pub mod wrapper;

pub use error::{Error, Result};

/// Derive an independent seed from a base seed and a path of indices
/// (splitmix64 finalizer folded over the parts).
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}
