use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numcore::Tensor;

/// Seeded Xavier-uniform initializer. Values are drawn in registration
/// order, so a fixed seed and architecture give identical parameters.
pub(crate) struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub(crate) fn new(seed: u64) -> Self {
        Initializer { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform on `(-r, r)` with `r = sqrt(6 / (rows + cols))`.
    pub(crate) fn xavier(&mut self, rows: usize, cols: usize) -> Tensor {
        let r = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new(-r, r);
        let data = (0..rows * cols).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::matrix(rows, cols, data).expect("shape matches data")
    }
}
