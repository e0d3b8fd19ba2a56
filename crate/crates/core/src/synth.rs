//! Deterministic synthetic rasters for demos and property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::filter::{gaussian_kernel, separable_reflect};
use crate::imagecore::{normalize_unit, Image};

/// Band-limited noise: uniform white noise blurred with a Gaussian of
/// `sigma = 2` and rescaled to [0,1].
pub fn textured(width: usize, height: usize, seed: u64) -> Image {
    textured_with_sigma(width, height, seed, 2.0)
}

pub fn textured_with_sigma(width: usize, height: usize, seed: u64, sigma: f64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..width * height).map(|_| rng.random::<f64>()).collect();
    let radius = (3.0 * sigma).ceil() as usize;
    let blurred = separable_reflect(&noise, width, height, &gaussian_kernel(sigma, radius));
    let img = Image::new(width, height, blurred).expect("length matches");
    normalize_unit(&img).expect("non-empty")
}

/// Uniform white noise in [0,1).
pub fn noise(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(width, height, |_, _| rng.random::<f64>())
}
