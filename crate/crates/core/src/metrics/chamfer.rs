use ndarray::ArrayView2;

use crate::cloud::PointCloud;
use crate::error::{CoreError, Result};

/// Which Chamfer aggregation to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferVariant {
    /// Larger of the two directed means of nearest-neighbor Euclidean distances.
    /// Every loss and reported metric in this workspace uses this form.
    #[default]
    MaxMean,
    /// Sum of the two directed means of squared nearest-neighbor distances.
    /// Offered for comparison with tables that report the squared convention.
    SquaredSum,
}

/// For each row of `from`, the index of and distance to its nearest row of `to`.
/// Ties resolve to the lowest index.
pub fn nearest_neighbors(from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> Vec<(usize, f64)> {
    let to_rows: Vec<[f64; 3]> = to.outer_iter().map(|r| [r[0], r[1], r[2]]).collect();
    from.outer_iter()
        .map(|a| {
            let (ax, ay, az) = (a[0], a[1], a[2]);
            let mut best = (0, f64::INFINITY);
            for (j, b) in to_rows.iter().enumerate() {
                let dx = ax - b[0];
                let dy = ay - b[1];
                let dz = az - b[2];
                let d = dx * dx + dy * dy + dz * dz;
                if d < best.1 {
                    best = (j, d);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

/// Mean over `from` of the distance to the nearest point of `to`.
pub fn directed_mean(from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> f64 {
    let nn = nearest_neighbors(from, to);
    nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64
}

fn check(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<()> {
    if p.nrows() == 0 || q.nrows() == 0 {
        return Err(CoreError::EmptyCloud);
    }
    for m in [p, q] {
        if m.ncols() != 3 {
            return Err(CoreError::ColumnMismatch { expected: 3, got: m.ncols() });
        }
    }
    Ok(())
}

/// Chamfer discrepancy on raw `N x 3` matrices.
pub fn chamfer_points(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64> {
    chamfer_points_with(p, q, ChamferVariant::MaxMean)
}

fn chamfer_points_with(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>, variant: ChamferVariant) -> Result<f64> {
    check(p, q)?;
    Ok(match variant {
        ChamferVariant::MaxMean => directed_mean(p, q).max(directed_mean(q, p)),
        ChamferVariant::SquaredSum => {
            let sq = |a, b| {
                let nn = nearest_neighbors(a, b);
                nn.iter().map(|&(_, d)| d * d).sum::<f64>() / nn.len() as f64
            };
            sq(p, q) + sq(q, p)
        }
    })
}

/// `max(mean_p min_q |p - q|, mean_q min_p |q - p|)`.
pub fn chamfer_discrepancy(p: &PointCloud, q: &PointCloud) -> f64 {
    chamfer_points(p.view(), q.view()).expect("point clouds are nonempty with 3 columns")
}

pub fn chamfer_with(p: &PointCloud, q: &PointCloud, variant: ChamferVariant) -> f64 {
    chamfer_points_with(p.view(), q.view(), variant).expect("valid clouds")
}
