//! Seeded random sources. Every random object in the crate is a pure function
//! of a `u64` seed, drawn through ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
}

/// `len` i.i.d. draws from the uniform distribution on `[lo, hi)`.
pub fn uniform_values(len: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let dist = rand_distr::Uniform::new(lo, hi).expect("lo < hi, both finite");
    let mut r = rng(seed);
    (0..len).map(|_| dist.sample(&mut r)).collect()
}

/// Derive an independent child seed (splitmix64 finalizer over `seed ^ stream`).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
