use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sphinv_core::io::{encode_native_cloud, load_pointcloud, NativeCloud};

use crate::split::{Corpus, Provenance, Split};
use crate::{DataError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub split: Membership,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// JSON index of a corpus on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub items: Vec<ManifestItem>,
}

/// Writes every item as a native cloud (labels preserved) plus `manifest.json`.
/// Returns the manifest path.
pub fn save_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut test = vec![false; corpus.len()];
    for &i in &corpus.split.test {
        test[i] = true;
    }
    let mut items = Vec::with_capacity(corpus.len());
    for (i, cloud) in corpus.items.iter().enumerate() {
        let name = PathBuf::from(format!("item_{i:05}.pinv"));
        std::fs::write(dir.join(&name), encode_native_cloud(&NativeCloud::plain(cloud.clone())))?;
        items.push(ManifestItem {
            path: name,
            split: if test[i] { Membership::Test } else { Membership::Train },
            seed: corpus.provenance.item_seeds.get(i).copied(),
        });
    }
    let manifest = Manifest {
        source: corpus.provenance.source.clone(),
        split_seed: corpus.provenance.split_seed,
        test_fraction: corpus.provenance.test_fraction,
        items,
    };
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Loads a manifest (or a directory containing `manifest.json`) and every
/// item it lists, in any supported point-cloud format.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push(MANIFEST_FILE);
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut items = Vec::with_capacity(manifest.items.len());
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    let mut seeds = Vec::new();
    for (i, item) in manifest.items.iter().enumerate() {
        items.push(load_pointcloud(base.join(&item.path))?);
        match item.split {
            Membership::Train => split.train.push(i),
            Membership::Test => split.test.push(i),
        }
        if let Some(s) = item.seed {
            seeds.push(s);
        }
    }
    if !seeds.is_empty() && seeds.len() != items.len() {
        return Err(DataError::Manifest("seeds must be given for all items or none".into()));
    }
    let provenance = Provenance {
        source: manifest.source,
        split_seed: manifest.split_seed,
        test_fraction: manifest.test_fraction,
        item_seeds: seeds,
    };
    Ok(Corpus { items, split, provenance })
}
