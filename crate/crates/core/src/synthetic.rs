//! Seeded generator for narrow-band Gaussian corpora, the shape production
//! embeddings tend to have: every coordinate drawn i.i.d. from
//! `Normal(mean, stddev)` with a small `stddev`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::store::Dataset;

pub fn generate_synthetic(n: usize, d: usize, mean: f32, stddev: f32, seed: u64) -> Result<Dataset<f32>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if !mean.is_finite() || !stddev.is_finite() || stddev < 0.0 {
        return Err(Error::invalid(format!(
            "need finite mean and non-negative stddev, got mean={mean} stddev={stddev}"
        )));
    }
    let normal = Normal::new(mean, stddev).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| normal.sample(&mut rng)).collect();
    Dataset::new(d, data)
}
