//! Region-restricted edits of per-point codes.
//!
//! Codes are indexed by prior point, so a mask over prior indices selects the
//! same part of every shape inverted with the same generator. Edits only ever
//! touch masked rows and never reorder rows.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sphinv_core::{LatentCodes, PointCloud, SpherePrior};

use crate::spgan::{Generator, StyleVectors};
use crate::{ModelError, Result};

/// Sorted, duplicate-free prior indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RegionMask {
    indices: Vec<usize>,
}

impl RegionMask {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn all(n: usize) -> Self {
        Self { indices: (0..n).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Fails on the first index `>= n`.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(ModelError::Edit("mask is empty".into()));
        }
        match self.indices.last() {
            Some(&i) if i >= n => Err(ModelError::Edit(format!("mask index {i} out of range for {n} points"))),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for RegionMask {
    type Error = std::convert::Infallible;

    fn try_from(v: Vec<usize>) -> std::result::Result<Self, Self::Error> {
        Ok(Self::new(v))
    }
}

impl From<RegionMask> for Vec<usize> {
    fn from(m: RegionMask) -> Self {
        m.indices
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EditMode {
    /// Adds `sigma * N(0, 1)` to the latent (non-coordinate) columns.
    AdditiveNoise { sigma: f64 },
    /// Moves masked rows toward the donor's rows: `(1 - t) * row + t * donor`.
    InterpolateToward { donor: Vec<Vec<f64>>, t: f64 },
    /// `x -> linear * x + translation` on the coordinate columns.
    AffineTransform { linear: [[f64; 3]; 3], translation: [f64; 3] },
}

/// One edit as exchanged with clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOperation {
    pub mask: RegionMask,
    #[serde(flatten)]
    pub mode: EditMode,
    #[serde(default)]
    pub seed: u64,
}

impl EditOperation {
    /// Checks payload ranges and shapes against codes of size `n x width`.
    pub fn validate(&self, n: usize, width: usize) -> Result<()> {
        self.mask.check(n)?;
        match &self.mode {
            EditMode::AdditiveNoise { sigma } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return Err(ModelError::Edit(format!("sigma must be finite and nonnegative, got {sigma}")));
                }
            }
            EditMode::InterpolateToward { donor, t } => {
                if !(0.0..=1.0).contains(t) {
                    return Err(ModelError::Edit(format!("t must lie in [0, 1], got {t}")));
                }
                if donor.len() != n {
                    return Err(ModelError::Edit(format!("donor has {} rows, codes have {n}", donor.len())));
                }
                if let Some(i) = donor.iter().position(|r| r.len() != width) {
                    return Err(ModelError::Edit(format!("donor row {i} must have {width} values")));
                }
                if donor.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ModelError::Edit("donor codes must be finite".into()));
                }
            }
            EditMode::AffineTransform { linear, translation } => {
                if linear.iter().flatten().chain(translation).any(|v| !v.is_finite()) {
                    return Err(ModelError::Edit("affine payload must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Applies `op` to the masked rows; every other row is returned bit-for-bit.
/// Deterministic in `op.seed`.
pub fn apply_edit(codes: &LatentCodes, op: &EditOperation) -> Result<LatentCodes> {
    let (n, width) = codes.values().dim();
    op.validate(n, width)?;
    let mut out = codes.values().clone();
    match &op.mode {
        EditMode::AdditiveNoise { sigma } => {
            if *sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(op.seed);
                for &i in op.mask.indices() {
                    for c in 3..width {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        out[[i, c]] += sigma * e;
                    }
                }
            }
        }
        EditMode::InterpolateToward { donor, t } => {
            for &i in op.mask.indices() {
                for c in 0..width {
                    out[[i, c]] = (1.0 - t) * out[[i, c]] + t * donor[i][c];
                }
            }
        }
        EditMode::AffineTransform { linear, translation } => {
            for &i in op.mask.indices() {
                let x = [out[[i, 0]], out[[i, 1]], out[[i, 2]]];
                for r in 0..3 {
                    out[[i, r]] = linear[r][0] * x[0] + linear[r][1] * x[1] + linear[r][2] * x[2] + translation[r];
                }
            }
        }
    }
    Ok(LatentCodes::new(out)?)
}

/// Applies a stack of edits in order.
pub fn replay(codes: &LatentCodes, edits: &[EditOperation]) -> Result<LatentCodes> {
    edits.iter().try_fold(codes.clone(), |c, op| apply_edit(&c, op))
}

pub fn regenerate(codes: &LatentCodes, style: &StyleVectors, generator: &Generator) -> Result<PointCloud> {
    generator.generate(codes, style)
}

/// Color of prior point `i`: its coordinates mapped from `[-1, 1]` to `[0, 1]`.
pub fn correspondence_colors(sphere: &SpherePrior) -> Array2<f64> {
    sphere.points().mapv(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionQuery {
    /// Prior points within `angle` radians of the unit direction `center`.
    Cap {
        center: [f64; 3],
        angle: f64,
    },
    /// Reconstruction points inside the closed box; empty if any extent is not positive.
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Indices {
        indices: Vec<usize>,
    },
}

/// Selects prior indices by query; an empty selection is returned as an empty mask.
pub fn select_region(sphere: &SpherePrior, recon: &PointCloud, query: &RegionQuery) -> Result<RegionMask> {
    let n = sphere.len();
    if recon.len() != n {
        return Err(ModelError::Shape(format!("reconstruction has {} points, prior has {n}", recon.len())));
    }
    let picked = match query {
        RegionQuery::Cap { center, angle } => {
            let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) || angle.is_nan() {
                return Err(ModelError::Edit("cap needs a nonzero center and a valid angle".into()));
            }
            let cos_limit = angle.min(std::f64::consts::PI).cos();
            sphere
                .points()
                .outer_iter()
                .enumerate()
                .filter(|(_, p)| {
                    let cos = (p[0] * center[0] + p[1] * center[1] + p[2] * center[2]) / norm;
                    cos >= cos_limit - 1e-12
                })
                .map(|(i, _)| i)
                .collect()
        }
        RegionQuery::Box { min, max } => {
            if (0..3).any(|k| !(max[k] > min[k])) {
                Vec::new()
            } else {
                recon
                    .points()
                    .outer_iter()
                    .enumerate()
                    .filter(|(_, p)| (0..3).all(|k| p[k] >= min[k] && p[k] <= max[k]))
                    .map(|(i, _)| i)
                    .collect()
            }
        }
        RegionQuery::Indices { indices } => {
            if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
                return Err(ModelError::Edit(format!("mask index {bad} out of range for {n} points")));
            }
            indices.clone()
        }
    };
    Ok(RegionMask::new(picked))
}

/// Per-row Euclidean displacement between two clouds of equal size.
pub fn displacement(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    (a.points() - b.points()).map_axis(Axis(1), |r| r.dot(&r).sqrt()).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use sphinv_core::sample_sphere_prior;

    fn codes() -> LatentCodes {
        LatentCodes::new(Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f64 * 0.1 - 0.7)).unwrap()
    }

    fn op(mask: Vec<usize>, mode: EditMode) -> EditOperation {
        EditOperation { mask: RegionMask::new(mask), mode, seed: 7 }
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = codes();
        let out = apply_edit(&c, &op(vec![0, 1, 2, 3], EditMode::AdditiveNoise { sigma: 0.0 })).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn noise_only_touches_masked_latent_columns() {
        let c = codes();
        let out = apply_edit(&c, &op(vec![0], EditMode::AdditiveNoise { sigma: 0.1 })).unwrap();
        for i in 1..4 {
            assert_eq!(out.values().row(i), c.values().row(i));
        }
        assert_eq!(out.coords(), c.coords());
        assert_ne!(out.values().row(0), c.values().row(0));
    }

    #[test]
    fn interpolation_endpoints() {
        let c = codes();
        let donor: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 + 0.3; 5]).collect();
        let t1 = apply_edit(&c, &op(vec![1, 3], EditMode::InterpolateToward { donor: donor.clone(), t: 1.0 })).unwrap();
        assert_eq!(t1.values().row(1).to_vec(), donor[1]);
        assert_eq!(t1.values().row(3).to_vec(), donor[3]);
        assert_eq!(t1.values().row(0), c.values().row(0));
        let t0 = apply_edit(&c, &op(vec![1, 3], EditMode::InterpolateToward { donor, t: 0.0 })).unwrap();
        assert_eq!(t0, c);
    }

    #[test]
    fn affine_moves_coordinates_only() {
        let c = codes();
        let mode = EditMode::AffineTransform {
            linear: [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
            translation: [1.0, 0.0, 0.0],
        };
        let out = apply_edit(&c, &op(vec![2], mode)).unwrap();
        let (before, after) = (c.values().row(2), out.values().row(2));
        assert_eq!(after[0], 2.0 * before[0] + 1.0);
        assert_eq!(after[1], 2.0 * before[1]);
        assert_eq!(after.slice(ndarray::s![3..]), before.slice(ndarray::s![3..]));
    }

    #[test]
    fn invalid_operations() {
        let c = codes();
        let noise = |s| EditMode::AdditiveNoise { sigma: s };
        assert!(apply_edit(&c, &op(vec![], noise(0.1))).is_err());
        let e = apply_edit(&c, &op(vec![1, 9], noise(0.1))).unwrap_err();
        assert!(e.to_string().contains("index 9"), "{e}");
        assert!(apply_edit(&c, &op(vec![1], noise(-1.0))).is_err());
        let donor = vec![vec![0.0; 5]; 4];
        assert!(apply_edit(&c, &op(vec![1], EditMode::InterpolateToward { donor: donor.clone(), t: 1.5 })).is_err());
        assert!(
            apply_edit(&c, &op(vec![1], EditMode::InterpolateToward { donor: donor[..3].to_vec(), t: 0.5 })).is_err()
        );
    }

    #[test]
    fn seeded_noise_is_deterministic() {
        let c = codes();
        let o = op(vec![0, 2], EditMode::AdditiveNoise { sigma: 0.5 });
        assert_eq!(apply_edit(&c, &o).unwrap(), apply_edit(&c, &o).unwrap());
        let other = EditOperation { seed: 8, ..o.clone() };
        assert_ne!(apply_edit(&c, &o).unwrap(), apply_edit(&c, &other).unwrap());
    }

    #[test]
    fn colors_follow_formula() {
        let sphere = SpherePrior::from_points(array![[1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(correspondence_colors(&sphere), array![[1.0, 0.5, 0.5], [0.5, 0.5, 0.0]]);
        let c = correspondence_colors(&sample_sphere_prior(300).unwrap());
        assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn region_queries() {
        let sphere = sample_sphere_prior(64).unwrap();
        let recon = PointCloud::new(sphere.points() * 0.5).unwrap();
        let all = select_region(&sphere, &recon, &RegionQuery::Box { min: [-1.0; 3], max: [1.0; 3] }).unwrap();
        assert_eq!(all, RegionMask::all(64));
        let flat = RegionQuery::Box { min: [-1.0, -1.0, 0.0], max: [1.0, 1.0, 0.0] };
        assert!(select_region(&sphere, &recon, &flat).unwrap().is_empty());
        let cap = RegionQuery::Cap { center: [0.0, 0.0, 2.0], angle: std::f64::consts::PI };
        assert_eq!(select_region(&sphere, &recon, &cap).unwrap(), RegionMask::all(64));
        let north = RegionQuery::Cap { center: [0.0, 0.0, 1.0], angle: 0.5 };
        let m = select_region(&sphere, &recon, &north).unwrap();
        assert!(!m.is_empty() && m.len() < 64);
        assert!(m.indices().iter().all(|&i| sphere.points()[[i, 2]] >= 0.5f64.cos() - 1e-12));
        let bad = RegionQuery::Indices { indices: vec![3, 64] };
        assert!(select_region(&sphere, &recon, &bad).is_err());
    }

    #[test]
    fn operation_json_shape() {
        let o = op(vec![3, 1, 3], EditMode::AdditiveNoise { sigma: 0.25 });
        let json = serde_json::to_value(&o).unwrap();
        assert_eq!(json, serde_json::json!({"mask": [1, 3], "mode": "additive_noise", "sigma": 0.25, "seed": 7}));
        let back: EditOperation = serde_json::from_value(json).unwrap();
        assert_eq!(back, o);
    }
}
