//! Point-cloud file formats: XYZ text, PLY (ASCII and binary little-endian),
//! and the native `PINV` section container.

pub mod container;
mod native;
mod ply;
mod xyz;

use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{CoreError, Result};

pub use container::{ByteReader, ByteWriter, Container, Tag, CONTAINER_VERSION, MAGIC};
pub use native::{decode_native_cloud, encode_native_cloud, NativeCloud};
pub use ply::{parse_ply, write_ply, PlyEncoding};
pub use xyz::{parse_xyz, write_xyz};

/// On-disk formats recognized by extension or by sniffing content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
    Native,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).unwrap_or_default();
        match ext.as_str() {
            "xyz" | "txt" => Ok(Self::Xyz),
            "ply" => Ok(Self::Ply),
            "pinv" => Ok(Self::Native),
            _ => Err(CoreError::UnsupportedExtension(ext)),
        }
    }

    /// Guesses from leading bytes: `PINV` magic, a `ply` header, else XYZ text.
    pub fn sniff(bytes: &[u8]) -> Self {
        if bytes.starts_with(MAGIC) {
            Self::Native
        } else if bytes.starts_with(b"ply") {
            Self::Ply
        } else {
            Self::Xyz
        }
    }
}

/// Parses an in-memory payload of the given format.
pub fn parse_pointcloud(bytes: &[u8], format: CloudFormat, origin: &Path) -> Result<PointCloud> {
    match format {
        CloudFormat::Xyz => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| CoreError::Format { format: "xyz", msg: format!("not UTF-8 text: {e}") })?;
            parse_xyz(text, origin)
        }
        CloudFormat::Ply => parse_ply(bytes).map(|(cloud, _)| cloud),
        CloudFormat::Native => decode_native_cloud(bytes).map(|n| n.cloud),
    }
}

pub fn load_pointcloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let format = CloudFormat::from_path(path)?;
    let bytes = std::fs::read(path)?;
    parse_pointcloud(&bytes, format, path)
}

pub fn save_pointcloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match CloudFormat::from_path(path)? {
        CloudFormat::Xyz => write_xyz(cloud).into_bytes(),
        CloudFormat::Ply => write_ply(cloud, None, PlyEncoding::Ascii),
        CloudFormat::Native => encode_native_cloud(&NativeCloud::plain(cloud.clone())),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}
