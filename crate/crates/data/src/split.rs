use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sphinv_core::PointCloud;

use crate::{DataError, Result};

/// Disjoint train/test index sets over a corpus, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Where a corpus came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub split_seed: u64,
    pub test_fraction: f64,
    /// Per-item generation seeds; empty for ingested data.
    #[serde(default)]
    pub item_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub items: Vec<PointCloud>,
    pub split: Split,
    pub provenance: Provenance,
}

impl Corpus {
    pub fn train(&self) -> Vec<PointCloud> {
        self.split.train.iter().map(|&i| self.items[i].clone()).collect()
    }

    pub fn test(&self) -> Vec<PointCloud> {
        self.split.test.iter().map(|&i| self.items[i].clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Number of test items: `round(fraction * total)`, halves rounded away from zero.
pub fn test_count(total: usize, fraction: f64) -> usize {
    (fraction * total as f64).round() as usize
}

/// Shuffles indices with a seeded generator and takes the first
/// [`test_count`] as the test set.
pub fn make_split(items: Vec<PointCloud>, test_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Fraction(test_fraction));
    }
    if items.len() < 2 {
        return Err(DataError::TooFewItems(items.len()));
    }
    let split = split_indices(items.len(), test_fraction, seed);
    let provenance = Provenance { source: "ingested".into(), split_seed: seed, test_fraction, item_seeds: Vec::new() };
    Ok(Corpus { items, split, provenance })
}

pub(crate) fn split_indices(total: usize, test_fraction: f64, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = test_count(total, test_fraction);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Split { train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_of_test_counts() {
        assert_eq!(test_count(6778, 0.10), 678);
        assert_eq!(test_count(10, 0.10), 1);
        assert_eq!(test_count(200, 0.10), 20);
    }

    #[test]
    fn invalid_fraction() {
        let items = vec![PointCloud::from_rows(&[[0.0; 3]]).unwrap(); 3];
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(make_split(items.clone(), f, 0), Err(DataError::Fraction(_))));
        }
        assert!(matches!(make_split(items[..1].to_vec(), 0.1, 0), Err(DataError::TooFewItems(1))));
    }
}
