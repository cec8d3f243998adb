use sphinv_autograd::{Graph, Var};

use super::discriminator::{DiscOutput, Scores};

/// `1/2 [D(fake)^2 + (D(real) - 1)^2] + lambda * 1/(2N) sum_i [D(fake_i)^2 + (D(real_i) - 1)^2]`.
pub fn discriminator_loss(g: &mut Graph, real: &DiscOutput, fake: &DiscOutput, lambda: f64) -> Var {
    let cloud_fake = g.half_mse(fake.score, 0.0);
    let cloud_real = g.half_mse(real.score, 1.0);
    let point_fake = g.half_mse(fake.point_scores, 0.0);
    let point_real = g.half_mse(real.point_scores, 1.0);
    let cloud = g.add(cloud_fake, cloud_real);
    let point = g.add(point_fake, point_real);
    let point = g.scale(point, lambda);
    g.add(cloud, point)
}

/// `1/2 (D(fake) - 1)^2 + beta * 1/(2N) sum_i (D(fake_i) - 1)^2`.
pub fn generator_loss(g: &mut Graph, fake: &DiscOutput, beta: f64) -> Var {
    let cloud = g.half_mse(fake.score, 1.0);
    let point = g.half_mse(fake.point_scores, 1.0);
    let point = g.scale(point, beta);
    g.add(cloud, point)
}

fn half_mean_sq(values: impl ExactSizeIterator<Item = f64>, target: f64) -> f64 {
    let n = values.len() as f64;
    0.5 * values.map(|v| (v - target) * (v - target)).sum::<f64>() / n
}

/// Discriminative loss evaluated directly on score values.
pub fn discriminator_loss_value(real: &Scores, fake: &Scores, lambda: f64) -> f64 {
    let cloud = 0.5 * (fake.global * fake.global + (real.global - 1.0) * (real.global - 1.0));
    let point = half_mean_sq(fake.points.iter().copied(), 0.0) + half_mean_sq(real.points.iter().copied(), 1.0);
    cloud + lambda * point
}

/// Generative loss evaluated directly on score values.
pub fn generator_loss_value(fake: &Scores, beta: f64) -> f64 {
    0.5 * (fake.global - 1.0) * (fake.global - 1.0) + beta * half_mean_sq(fake.points.iter().copied(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn scores(global: f64, point: f64, n: usize) -> Scores {
        Scores { global, points: Array1::from_elem(n, point) }
    }

    fn graph_out(g: &mut Graph, s: &Scores) -> DiscOutput {
        let score = g.constant(Array2::from_elem((1, 1), s.global));
        let point_scores = g.constant(s.points.clone().insert_axis(ndarray::Axis(1)));
        DiscOutput { score, point_scores, features: point_scores }
    }

    #[test]
    fn perfect_discriminator_is_zero() {
        let real = scores(1.0, 1.0, 8);
        let fake = scores(0.0, 0.0, 8);
        for lambda in [0.0, 1.0, 3.5] {
            assert_eq!(discriminator_loss_value(&real, &fake, lambda), 0.0);
            let mut g = Graph::new();
            let (r, f) = (graph_out(&mut g, &real), graph_out(&mut g, &fake));
            let l = discriminator_loss(&mut g, &r, &f, lambda);
            assert_eq!(g.scalar(l), 0.0);
        }
    }

    #[test]
    fn inverted_discriminator() {
        let real = scores(0.0, 0.0, 8);
        let fake = scores(1.0, 1.0, 8);
        for lambda in [0.0, 1.0, 2.0] {
            assert_eq!(discriminator_loss_value(&real, &fake, lambda), 1.0 + lambda);
            let mut g = Graph::new();
            let (r, f) = (graph_out(&mut g, &real), graph_out(&mut g, &fake));
            let l = discriminator_loss(&mut g, &r, &f, lambda);
            assert_eq!(g.scalar(l), 1.0 + lambda);
        }
    }

    #[test]
    fn lambda_zero_keeps_cloud_term() {
        let real = scores(0.3, 0.9, 4);
        let fake = scores(0.6, -0.2, 4);
        let expect = 0.5 * (0.36 + 0.49);
        assert!((discriminator_loss_value(&real, &fake, 0.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn generator_fixed_points() {
        for beta in [0.0, 1.0, 2.5] {
            assert_eq!(generator_loss_value(&scores(1.0, 1.0, 6), beta), 0.0);
            assert_eq!(generator_loss_value(&scores(0.0, 0.0, 6), beta), 0.5 + 0.5 * beta);
            let mut g = Graph::new();
            let f = graph_out(&mut g, &scores(0.0, 0.0, 6));
            let l = generator_loss(&mut g, &f, beta);
            assert_eq!(g.scalar(l), 0.5 + 0.5 * beta);
        }
        let s = scores(0.4, -3.0, 5);
        assert_eq!(generator_loss_value(&s, 0.0), 0.5 * 0.36);
    }
}
