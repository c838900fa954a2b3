//! Shared dataset container and RNG stream derivation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Sensitive-attribute value (cohort id).
pub type Attribute = u32;

/// A labeled dataset of flat feature vectors (image mode stores the pixels
/// row-major and remembers the side length).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    /// binary class labels
    pub labels: Vec<u8>,
    pub attributes: Vec<Attribute>,
    /// Some(h) when features are h×h pixel grids
    pub image_side: Option<usize>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<u8>,
        attributes: Vec<Attribute>,
        image_side: Option<usize>,
    ) -> Result<Self> {
        if features.len() != labels.len() || features.len() != attributes.len() {
            return Err(Error::Shape(format!(
                "features/labels/attributes lengths differ: {}/{}/{}",
                features.len(),
                labels.len(),
                attributes.len()
            )));
        }
        if let Some(first) = features.first() {
            let dim = first.len();
            if features.iter().any(|f| f.len() != dim) {
                return Err(Error::Shape("ragged feature rows".into()));
            }
            if let Some(h) = image_side {
                if h * h != dim {
                    return Err(Error::Shape(format!(
                        "image side {h} does not square to feature dim {dim}"
                    )));
                }
            }
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidInput("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            attributes,
            image_side,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Distinct attribute values present, ascending.
    pub fn groups(&self) -> Vec<Attribute> {
        self.attributes
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Row indices belonging to one attribute value.
    pub fn group_indices(&self, g: Attribute) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.attributes[i] == g).collect()
    }

    /// New dataset restricted to the given row indices (in order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            attributes: indices.iter().map(|&i| self.attributes[i]).collect(),
            image_side: self.image_side,
        }
    }
}

/// Derives an independent RNG seed for a named stream from a master seed
/// (splitmix64 over master XOR stream id). Stages, epochs, and per-group
/// generators each get their own stream so reordering one never shifts
/// another.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_and_groups() {
        let ds = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
            None,
        )
        .unwrap();
        assert_eq!(ds.groups(), vec![0, 1]);
        assert_eq!(ds.group_indices(1), vec![2, 3]);
        let sub = ds.subset(&[3, 0]);
        assert_eq!(sub.features, vec![vec![3.0], vec![0.0]]);
        assert_eq!(sub.labels, vec![1, 0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Dataset::new(
            vec![vec![0.0], vec![1.0, 2.0]],
            vec![0, 1],
            vec![0, 0],
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn derived_streams_differ() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
