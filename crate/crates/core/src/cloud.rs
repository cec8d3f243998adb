use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{CoreError, Result};

/// An ordered set of 3D points, optionally carrying a per-point region label.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    labels: Option<Vec<u32>>,
}

impl PointCloud {
    /// Validates shape (`N x 3`, `N >= 1`) and finiteness.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        if points.ncols() != 3 {
            return Err(CoreError::ColumnMismatch { expected: 3, got: points.ncols() });
        }
        if points.nrows() == 0 {
            return Err(CoreError::EmptyCloud);
        }
        if let Some(row) = points.outer_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(CoreError::NonFinite { row });
        }
        Ok(Self { points, labels: None })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), 3), flat).map_err(|e| CoreError::Shape(e.to_string()))?;
        Self::new(points)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(CoreError::Cardinality { left: self.len(), right: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    pub fn max_norm(&self) -> f64 {
        self.points.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
    }

    pub fn centroid(&self) -> [f64; 3] {
        let m = self.points.mean_axis(Axis(0)).expect("nonempty");
        [m[0], m[1], m[2]]
    }

    /// Reorders rows (and labels) so that output row `i` is input row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(CoreError::Cardinality { left: self.len(), right: perm.len() });
        }
        let points = self.points.select(Axis(0), perm);
        let labels = self.labels.as_ref().map(|l| perm.iter().map(|&i| l[i]).collect());
        Ok(Self { points, labels })
    }

    /// Centers at the centroid and scales so the farthest point has norm 1.
    pub fn normalize(&self) -> Result<(PointCloud, NormalizeTransform)> {
        let center = self.centroid();
        let mut points = self.points.clone();
        for mut row in points.outer_iter_mut() {
            for k in 0..3 {
                row[k] -= center[k];
            }
        }
        let scale = points.outer_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max);
        if !(scale > 1e-12) {
            return Err(CoreError::DegenerateScale);
        }
        points.mapv_inplace(|v| v / scale);
        let transform = NormalizeTransform { center, scale };
        Ok((PointCloud { points, labels: self.labels.clone() }, transform))
    }
}

/// Maps model coordinates back to the original frame: `x = y * scale + center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        Self { center: [0.0; 3], scale: 1.0 }
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        let mut points = cloud.points.clone();
        for mut row in points.outer_iter_mut() {
            for k in 0..3 {
                row[k] = (row[k] - self.center[k]) / self.scale;
            }
        }
        PointCloud { points, labels: cloud.labels.clone() }
    }

    pub fn invert(&self, cloud: &PointCloud) -> PointCloud {
        let mut points = cloud.points.clone();
        for mut row in points.outer_iter_mut() {
            for k in 0..3 {
                row[k] = row[k] * self.scale + self.center[k];
            }
        }
        PointCloud { points, labels: cloud.labels.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(PointCloud::new(Array2::zeros((0, 3))), Err(CoreError::EmptyCloud)));
        assert!(matches!(PointCloud::new(Array2::zeros((2, 2))), Err(CoreError::ColumnMismatch { .. })));
        assert!(matches!(
            PointCloud::new(array![[0.0, 1.0, 2.0], [f64::NAN, 0.0, 0.0]]),
            Err(CoreError::NonFinite { row: 1 })
        ));
    }

    #[test]
    fn normalize_already_unit() {
        let c = PointCloud::from_rows(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0]]).unwrap();
        let (n, t) = c.normalize().unwrap();
        assert_eq!(t, NormalizeTransform::identity());
        assert_eq!(n, c);
    }

    #[test]
    fn normalize_segment() {
        let c = PointCloud::from_rows(&[[2.0, 0.0, 0.0], [4.0, 0.0, 0.0]]).unwrap();
        let (n, t) = c.normalize().unwrap();
        assert_eq!(t.center, [3.0, 0.0, 0.0]);
        assert_eq!(t.scale, 1.0);
        assert_eq!(n.points(), &array![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!((n.max_norm() - 1.0).abs() < 1e-12);
        let back = t.invert(&n);
        assert_eq!(back.points(), c.points());
        assert_eq!(t.apply(&c), n);
    }

    #[test]
    fn normalize_rejects_repeated_point() {
        let c = PointCloud::from_rows(&[[1.0, 2.0, 3.0]; 5]).unwrap();
        assert!(matches!(c.normalize(), Err(CoreError::DegenerateScale)));
    }

    #[test]
    fn permutation_carries_labels() {
        let c = PointCloud::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
            .unwrap()
            .with_labels(vec![7, 8, 9])
            .unwrap();
        let p = c.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.point(0)[0], 2.0);
        assert_eq!(p.labels().unwrap(), &[9, 7, 8]);
    }
}
