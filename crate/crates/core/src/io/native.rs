use ndarray::Array2;

use super::container::{ByteReader, ByteWriter, Container};
use crate::cloud::{NormalizeTransform, PointCloud};
use crate::error::{CoreError, Result};

const POINTS: [u8; 4] = *b"PNTS";
const LABELS: [u8; 4] = *b"LABL";
const META: [u8; 4] = *b"META";

/// A cloud plus the metadata the native format carries alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeCloud {
    pub cloud: PointCloud,
    /// Latent noise dimension of the model the cloud belongs to (0 if none).
    pub latent_dim: usize,
    pub transform: NormalizeTransform,
}

impl NativeCloud {
    pub fn plain(cloud: PointCloud) -> Self {
        Self { cloud, latent_dim: 0, transform: NormalizeTransform::identity() }
    }
}

pub fn encode_native_cloud(native: &NativeCloud) -> Vec<u8> {
    let mut c = Container::new();
    let mut w = ByteWriter::new();
    w.matrix(native.cloud.points());
    c.push(POINTS, w.finish());
    if let Some(labels) = native.cloud.labels() {
        let mut w = ByteWriter::new();
        w.u64(labels.len() as u64);
        for &l in labels {
            w.u32(l);
        }
        c.push(LABELS, w.finish());
    }
    let mut w = ByteWriter::new();
    let t = &native.transform;
    w.u64(native.cloud.len() as u64)
        .u64(native.latent_dim as u64)
        .f64(t.center[0])
        .f64(t.center[1])
        .f64(t.center[2])
        .f64(t.scale);
    c.push(META, w.finish());
    c.to_bytes()
}

pub fn decode_native_cloud(bytes: &[u8]) -> Result<NativeCloud> {
    let c = Container::from_bytes(bytes)?;
    let points: Array2<f64> = ByteReader::new(c.require(&POINTS)?).matrix()?;
    let mut cloud = PointCloud::new(points)?;
    if let Some(payload) = c.get(&LABELS) {
        let mut r = ByteReader::new(payload);
        let n = r.u64()? as usize;
        if n != cloud.len() {
            return Err(CoreError::Cardinality { left: cloud.len(), right: n });
        }
        let labels = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        cloud = cloud.with_labels(labels)?;
    }
    let mut r = ByteReader::new(c.require(&META)?);
    let n = r.u64()? as usize;
    if n != cloud.len() {
        return Err(CoreError::Cardinality { left: cloud.len(), right: n });
    }
    let latent_dim = r.u64()? as usize;
    let center = [r.f64()?, r.f64()?, r.f64()?];
    let scale = r.f64()?;
    Ok(NativeCloud { cloud, latent_dim, transform: NormalizeTransform { center, scale } })
}
