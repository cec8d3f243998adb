use ndarray::{Array2, ArrayView2};

use crate::error::{CoreError, Result};

/// `N` ordered unit vectors; the fixed geometric prior that seeds generation.
///
/// Row order is part of the contract: every per-point latent code and every
/// generated point is identified by its row index here.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePrior {
    points: Array2<f64>,
}

impl SpherePrior {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    /// Accepts an externally supplied prior after checking every row is unit-norm.
    pub fn from_points(points: Array2<f64>) -> Result<Self> {
        if points.ncols() != 3 {
            return Err(CoreError::ColumnMismatch { expected: 3, got: points.ncols() });
        }
        if points.nrows() == 0 {
            return Err(CoreError::ZeroPoints);
        }
        for (row, r) in points.outer_iter().enumerate() {
            let norm = r.dot(&r).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
                return Err(CoreError::NonFinite { row });
            }
        }
        Ok(Self { points })
    }
}

/// Fibonacci spiral lattice from the north pole (`i = 0`) to the south pole
/// (`i = n - 1`), with consecutive points advanced by the golden angle.
pub fn sample_sphere_prior(n: usize) -> Result<SpherePrior> {
    if n == 0 {
        return Err(CoreError::ZeroPoints);
    }
    let mut points = Array2::zeros((n, 3));
    if n == 1 {
        points[[0, 2]] = 1.0;
        return Ok(SpherePrior { points });
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let z = 1.0 - 2.0 * i as f64 / (n - 1) as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        points[[i, 0]] = r * phi.cos();
        points[[i, 1]] = r * phi.sin();
        points[[i, 2]] = z;
    }
    Ok(SpherePrior { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force nearest-neighbor distance ratio over all pairs.
    fn nn_ratio(p: &Array2<f64>) -> f64 {
        let n = p.nrows();
        let mut nn = vec![f64::INFINITY; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = (&p.row(i) - &p.row(j)).mapv(|v| v * v).sum().sqrt();
                    nn[i] = nn[i].min(d);
                }
            }
        }
        let max = nn.iter().cloned().fold(0.0, f64::max);
        let min = nn.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    #[test]
    fn single_point_is_north_pole() {
        let s = sample_sphere_prior(1).unwrap();
        assert_eq!(s.points().row(0).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_rejected() {
        assert!(matches!(sample_sphere_prior(0), Err(CoreError::ZeroPoints)));
    }

    #[test]
    fn rows_are_unit() {
        let s = sample_sphere_prior(256).unwrap();
        for r in s.points().outer_iter() {
            assert!((r.dot(&r).sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic() {
        let a = sample_sphere_prior(777).unwrap();
        let b = sample_sphere_prior(777).unwrap();
        let bits = |s: &SpherePrior| s.points().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn quasi_uniform_2048() {
        let s = sample_sphere_prior(2048).unwrap();
        let ratio = nn_ratio(s.points());
        assert!(ratio <= 2.5, "ratio {ratio}");
    }

    #[test]
    fn quasi_uniform_small_sizes() {
        for n in [64, 65, 100, 256, 500, 1000] {
            let ratio = nn_ratio(sample_sphere_prior(n).unwrap().points());
            assert!(ratio <= 2.5, "n={n} ratio {ratio}");
        }
    }
}
