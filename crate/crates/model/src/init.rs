use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) const LEAK: f64 = 0.2;

/// He-style initialization for leaky-ReLU layers.
pub(crate) fn weight<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let gain = (2.0 / (1.0 + LEAK * LEAK)).sqrt();
    let std = gain / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| std * rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn scaled<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, scale: f64) -> Array2<f64> {
    weight(rng, fan_in, fan_out) * scale
}

pub(crate) fn zeros(cols: usize) -> Array2<f64> {
    Array2::zeros((1, cols))
}
