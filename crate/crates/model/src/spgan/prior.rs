use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sphinv_core::{LatentCodes, SpherePrior};

use crate::Result;

/// Prior latent code: sphere coordinates concatenated with i.i.d. standard-normal
/// noise of width `latent_dim`, reproducible from `seed`.
pub fn make_prior_code(sphere: &SpherePrior, latent_dim: usize, seed: u64) -> Result<LatentCodes> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Array2::from_shape_fn((sphere.len(), latent_dim), |_| StandardNormal.sample(&mut rng));
    Ok(LatentCodes::from_prior(sphere, noise.view())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sphinv_core::sample_sphere_prior;

    #[test]
    fn zero_width_noise_is_the_sphere() {
        let s = sample_sphere_prior(32).unwrap();
        let z = make_prior_code(&s, 0, 9).unwrap();
        assert_eq!(z.values(), s.points());
    }

    #[test]
    fn seeded() {
        let s = sample_sphere_prior(16).unwrap();
        assert_eq!(make_prior_code(&s, 4, 1).unwrap(), make_prior_code(&s, 4, 1).unwrap());
        assert_ne!(make_prior_code(&s, 4, 1).unwrap(), make_prior_code(&s, 4, 2).unwrap());
    }

    #[test]
    fn noise_moments() {
        let s = sample_sphere_prior(2048).unwrap();
        let z = make_prior_code(&s, 32, 42).unwrap();
        let noise = z.noise();
        let n = noise.len() as f64;
        let mean = noise.sum() / n;
        let std = (noise.mapv(|v| (v - mean) * (v - mean)).sum() / n).sqrt();
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((std - 1.0).abs() < 0.1, "std {std}");
        assert_eq!(z.coords(), s.view());
    }
}
