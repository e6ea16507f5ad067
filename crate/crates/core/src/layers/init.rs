use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;
use crate::Scalar;

/// Seeded parameter initializer.
///
/// Weights are drawn from `U(-sqrt(1/fan_in), +sqrt(1/fan_in))`; biases and
/// gate logits start at zero. Draws happen in `f64` and are then rounded, so
/// an `f32` and an `f64` model built from the same seed agree to `f32`
/// precision.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn weights<T: Scalar>(&mut self, shape: &[usize], fan_in: usize) -> Result<Tensor<T>> {
        let bound = (1.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| T::of(self.rng.gen_range(-bound..bound)))
            .collect();
        Tensor::new(shape.to_vec(), data)
    }

    pub fn zeros<T: Scalar>(&mut self, shape: &[usize]) -> Result<Tensor<T>> {
        Tensor::zeros(shape)
    }
}
