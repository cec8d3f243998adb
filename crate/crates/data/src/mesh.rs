use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphinv_core::PointCloud;

use crate::{DataError, Result};

/// Indexed triangle mesh with optional per-face part labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub face_labels: Option<Vec<u32>>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(DataError::BadFaceIndex { face: f, index: bad as i64, count: vertices.len() });
            }
        }
        Ok(Self { vertices, faces, face_labels: None })
    }

    /// Tags every face with `label`.
    pub fn labeled(mut self, label: u32) -> Self {
        self.face_labels = Some(vec![label; self.faces.len()]);
        self
    }

    /// Concatenates meshes; labels are kept only if every part carries them.
    pub fn merge(parts: &[TriangleMesh]) -> Self {
        let mut out = TriangleMesh::default();
        let labeled = parts.iter().all(|p| p.face_labels.is_some());
        let mut labels = Vec::new();
        for part in parts {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&part.vertices);
            out.faces.extend(part.faces.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
            if let Some(l) = &part.face_labels {
                labels.extend_from_slice(l);
            }
        }
        if labeled {
            out.face_labels = Some(labels);
        }
        out
    }

    pub fn triangle(&self, f: usize) -> [[f64; 3]; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.triangle(f);
        let n = cross(sub(b, a), sub(c, a));
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Applies `v -> v * scale + offset` componentwise.
    pub fn transformed(mut self, scale: [f64; 3], offset: [f64; 3]) -> Self {
        for v in &mut self.vertices {
            for k in 0..3 {
                v[k] = v[k] * scale[k] + offset[k];
            }
        }
        self
    }
}

/// Samples `n` points uniformly over the surface: a face is drawn with
/// probability proportional to its area, then a uniform point inside it.
/// Labels follow the sampled faces when the mesh carries them.
pub fn sample_mesh_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    let (cloud, _) = sample_with_faces(mesh, n, seed)?;
    Ok(cloud)
}

/// As [`sample_mesh_surface`], also returning the source face of each point.
pub fn sample_with_faces(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if mesh.faces.is_empty() {
        return Err(DataError::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(DataError::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Array2::zeros((n, 3));
    let mut faces = Vec::with_capacity(n);
    for i in 0..n {
        let r = rng.random::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= r).min(mesh.faces.len() - 1);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let su = u.sqrt();
        let (wa, wb, wc) = (1.0 - su, su * (1.0 - v), su * v);
        let [a, b, c] = mesh.triangle(f);
        for k in 0..3 {
            points[[i, k]] = wa * a[k] + wb * b[k] + wc * c[k];
        }
        faces.push(f);
    }
    let mut cloud = PointCloud::new(points)?;
    if let Some(labels) = &mesh.face_labels {
        cloud = cloud.with_labels(faces.iter().map(|&f| labels[f]).collect())?;
    }
    Ok((cloud, faces))
}
