//! Parametric shape families used as a desk-scale training corpus.
//!
//! Every shape is built as a triangle mesh, sampled uniformly over its surface
//! and normalized into the unit ball. `chair_toy` labels its points by part:
//! [`SEAT`], [`BACK`], [`LEGS`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::{sample_mesh_surface, TriangleMesh};
use crate::split::{split_indices, Corpus, Provenance};
use crate::{DataError, Result};

pub const SEAT: u32 = 0;
pub const BACK: u32 = 1;
pub const LEGS: u32 = 2;

const SEGMENTS: usize = 24;
const STACKS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Ellipsoid,
    Box,
    Capsule,
    ChairToy,
}

impl ShapeFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ellipsoid => "ellipsoid",
            Self::Box => "box",
            Self::Capsule => "capsule",
            Self::ChairToy => "chair_toy",
        }
    }

    /// Parameter names with their default ranges.
    pub fn default_ranges(self) -> BTreeMap<String, ParamRange> {
        let r = |min, max| ParamRange { min, max };
        let list: &[(&str, ParamRange)] = match self {
            Self::Ellipsoid => &[("rx", r(0.3, 1.0)), ("ry", r(0.3, 1.0)), ("rz", r(0.3, 1.0))],
            Self::Box => &[("sx", r(0.3, 1.0)), ("sy", r(0.3, 1.0)), ("sz", r(0.3, 1.0))],
            Self::Capsule => &[("radius", r(0.15, 0.4)), ("length", r(0.4, 1.2))],
            Self::ChairToy => &[
                ("seat_width", r(0.8, 1.2)),
                ("seat_depth", r(0.8, 1.2)),
                ("seat_thickness", r(0.08, 0.16)),
                ("back_height", r(0.6, 1.2)),
                ("leg_length", r(0.5, 0.9)),
                ("leg_radius", r(0.04, 0.08)),
            ],
        };
        list.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl std::str::FromStr for ShapeFamily {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipsoid" => Ok(Self::Ellipsoid),
            "box" => Ok(Self::Box),
            "capsule" => Ok(Self::Capsule),
            "chair_toy" => Ok(Self::ChairToy),
            other => Err(DataError::Family(format!("unknown family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFamilyConfig {
    pub family: ShapeFamily,
    pub num_points: usize,
    pub seed: u64,
    pub test_fraction: f64,
    /// Overrides for the family's default parameter ranges.
    #[serde(default)]
    pub ranges: BTreeMap<String, ParamRange>,
}

impl ShapeFamilyConfig {
    pub fn new(family: ShapeFamily, num_points: usize, seed: u64) -> Self {
        Self { family, num_points, seed, test_fraction: 0.10, ranges: BTreeMap::new() }
    }

    pub fn with_range(mut self, name: &str, min: f64, max: f64) -> Self {
        self.ranges.insert(name.to_string(), ParamRange { min, max });
        self
    }

    /// Defaults merged with overrides, after validation.
    pub fn resolved_ranges(&self) -> Result<BTreeMap<String, ParamRange>> {
        if self.num_points == 0 {
            return Err(DataError::Family("num_points must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DataError::Fraction(self.test_fraction));
        }
        let mut ranges = self.family.default_ranges();
        for (name, range) in &self.ranges {
            match ranges.get_mut(name) {
                Some(slot) => *slot = *range,
                None => return Err(DataError::Family(format!("{} has no parameter {name:?}", self.family.name()))),
            }
        }
        for (name, r) in &ranges {
            if !(r.min > 0.0 && r.min <= r.max && r.max.is_finite()) {
                return Err(DataError::Family(format!(
                    "range for {name} must satisfy 0 < min <= max, got [{}, {}]",
                    r.min, r.max
                )));
            }
        }
        Ok(ranges)
    }
}

/// Surface of revolution about the y axis from a top-to-bottom profile of
/// `(radius, y)` pairs.
fn lathe(profile: &[(f64, f64)]) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(profile.len() * SEGMENTS);
    for &(r, y) in profile {
        for s in 0..SEGMENTS {
            let a = 2.0 * PI * s as f64 / SEGMENTS as f64;
            vertices.push([r * a.cos(), y, r * a.sin()]);
        }
    }
    let mut faces = Vec::new();
    for ring in 0..profile.len() - 1 {
        for s in 0..SEGMENTS {
            let t = (s + 1) % SEGMENTS;
            let (a, b) = (ring * SEGMENTS + s, ring * SEGMENTS + t);
            let (c, d) = (a + SEGMENTS, b + SEGMENTS);
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
    }
    TriangleMesh { vertices, faces, face_labels: None }
}

fn sphere_mesh() -> TriangleMesh {
    let profile: Vec<_> = (0..=STACKS)
        .map(|i| {
            let t = PI * i as f64 / STACKS as f64;
            (t.sin(), t.cos())
        })
        .collect();
    lathe(&profile)
}

/// Capsule along y: cylinder of `length` capped by hemispheres of `radius`.
fn capsule_mesh(radius: f64, length: f64) -> TriangleMesh {
    let half = STACKS / 2;
    let mut profile = Vec::with_capacity(STACKS + 2);
    for i in 0..=half {
        let t = PI * i as f64 / STACKS as f64;
        profile.push((radius * t.sin(), radius * t.cos() + length / 2.0));
    }
    for i in half..=STACKS {
        let t = PI * i as f64 / STACKS as f64;
        profile.push((radius * t.sin(), radius * t.cos() - length / 2.0));
    }
    lathe(&profile)
}

/// Axis-aligned box with half extents `h`, centered at `c`.
fn box_mesh(h: [f64; 3], c: [f64; 3]) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let sign = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
        vertices.push([c[0] + sign(0) * h[0], c[1] + sign(1) * h[1], c[2] + sign(2) * h[2]]);
    }
    let quads = [[0, 2, 6, 4], [1, 5, 7, 3], [0, 4, 5, 1], [2, 3, 7, 6], [0, 1, 3, 2], [4, 6, 7, 5]];
    let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    TriangleMesh { vertices, faces, face_labels: None }
}

fn chair_mesh(p: &BTreeMap<String, f64>) -> TriangleMesh {
    let (w, d, t) = (p["seat_width"], p["seat_depth"], p["seat_thickness"]);
    let (bh, ll, lr) = (p["back_height"], p["leg_length"], p["leg_radius"]);
    let seat = box_mesh([w / 2.0, t / 2.0, d / 2.0], [0.0, ll + t / 2.0, 0.0]).labeled(SEAT);
    let back = box_mesh([w / 2.0, bh / 2.0, t / 2.0], [0.0, ll + t + bh / 2.0, -d / 2.0 + t / 2.0]).labeled(BACK);
    let mut parts = vec![seat, back];
    let (ix, iz) = (w / 2.0 - lr, d / 2.0 - lr);
    for (sx, sz) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
        let body = (ll - 2.0 * lr).max(0.0);
        let leg = capsule_mesh(lr, body).transformed([1.0; 3], [sx * ix, ll / 2.0, sz * iz]);
        parts.push(leg.labeled(LEGS));
    }
    TriangleMesh::merge(&parts)
}

/// Mesh for one draw of the family's parameters.
pub fn family_mesh(family: ShapeFamily, params: &BTreeMap<String, f64>) -> TriangleMesh {
    match family {
        ShapeFamily::Ellipsoid => sphere_mesh().transformed([params["rx"], params["ry"], params["rz"]], [0.0; 3]),
        ShapeFamily::Box => box_mesh([params["sx"] / 2.0, params["sy"] / 2.0, params["sz"] / 2.0], [0.0; 3]),
        ShapeFamily::Capsule => capsule_mesh(params["radius"], params["length"]),
        ShapeFamily::ChairToy => chair_mesh(params),
    }
}

fn item_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng.random()
}

/// Samples `count` normalized shapes from the family and splits them by the
/// configured test fraction. Deterministic in `cfg.seed`.
pub fn generate_family(cfg: &ShapeFamilyConfig, count: usize) -> Result<Corpus> {
    let ranges = cfg.resolved_ranges()?;
    let mut items = Vec::with_capacity(count);
    let mut seeds = Vec::with_capacity(count);
    for i in 0..count {
        let seed = item_seed(cfg.seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: BTreeMap<String, f64> = ranges
            .iter()
            .map(|(k, r)| (k.clone(), if r.min == r.max { r.min } else { rng.random_range(r.min..=r.max) }))
            .collect();
        let mesh = family_mesh(cfg.family, &params);
        let cloud = sample_mesh_surface(&mesh, cfg.num_points, rng.random())?;
        let (cloud, _) = cloud.normalize()?;
        items.push(cloud);
        seeds.push(seed);
    }
    let split = if count >= 2 {
        split_indices(count, cfg.test_fraction, cfg.seed)
    } else {
        crate::Split { train: (0..count).collect(), test: Vec::new() }
    };
    let provenance = Provenance {
        source: format!("family:{}", cfg.family.name()),
        split_seed: cfg.seed,
        test_fraction: cfg.test_fraction,
        item_seeds: seeds,
    };
    Ok(Corpus { items, split, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meshes_are_closed_enough_to_have_expected_area() {
        let cube = box_mesh([0.5; 3], [0.0; 3]);
        assert!((cube.total_area() - 6.0).abs() < 1e-12);
        let s = sphere_mesh().total_area();
        assert!((s - 4.0 * PI).abs() / (4.0 * PI) < 0.02, "{s}");
        let c = capsule_mesh(0.5, 1.0).total_area();
        let exact = 4.0 * PI * 0.25 + 2.0 * PI * 0.5;
        assert!((c - exact).abs() / exact < 0.02, "{c} vs {exact}");
    }

    #[test]
    fn chair_parts_are_labeled() {
        let cfg = ShapeFamilyConfig::new(ShapeFamily::ChairToy, 512, 3);
        let corpus = generate_family(&cfg, 2).unwrap();
        for cloud in &corpus.items {
            let labels = cloud.labels().unwrap();
            for part in [SEAT, BACK, LEGS] {
                assert!(labels.contains(&part));
            }
            // Backrest points sit above every leg point.
            let min_back =
                (0..cloud.len()).filter(|&i| labels[i] == BACK).map(|i| cloud.point(i)[1]).fold(f64::MAX, f64::min);
            let max_leg =
                (0..cloud.len()).filter(|&i| labels[i] == LEGS).map(|i| cloud.point(i)[1]).fold(f64::MIN, f64::max);
            assert!(min_back > max_leg);
        }
    }

    #[test]
    fn range_validation() {
        let base = ShapeFamilyConfig::new(ShapeFamily::Ellipsoid, 16, 0);
        assert!(base.clone().with_range("rx", 0.5, 0.4).resolved_ranges().is_err());
        assert!(base.clone().with_range("rx", 0.0, 0.4).resolved_ranges().is_err());
        assert!(base.clone().with_range("radius", 0.1, 0.4).resolved_ranges().is_err());
        assert!(ShapeFamilyConfig { num_points: 0, ..base.clone() }.resolved_ranges().is_err());
        assert!(base.with_range("rx", 0.5, 0.5).resolved_ranges().is_ok());
    }

    #[test]
    fn family_names_round_trip() {
        for f in [ShapeFamily::Ellipsoid, ShapeFamily::Box, ShapeFamily::Capsule, ShapeFamily::ChairToy] {
            assert_eq!(f.name().parse::<ShapeFamily>().unwrap(), f);
        }
    }
}
