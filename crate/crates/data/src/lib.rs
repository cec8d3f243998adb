//! Data ingestion: triangle meshes and their area-weighted surface sampling,
//! OBJ parsing, reproducible train/test splits, on-disk corpus manifests and
//! synthetic parametric shape families.

mod error;
pub mod family;
pub mod manifest;
pub mod mesh;
pub mod obj;
pub mod split;

pub use error::{DataError, Result};
pub use family::{generate_family, ParamRange, ShapeFamily, ShapeFamilyConfig};
pub use manifest::{load_corpus, save_corpus, Manifest, ManifestItem};
pub use mesh::{sample_mesh_surface, TriangleMesh};
pub use obj::{load_obj, parse_obj};
pub use split::{make_split, Corpus, Split};
