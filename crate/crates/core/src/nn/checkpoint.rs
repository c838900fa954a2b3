//! Versioned JSON checkpoints. serde_json prints floats with the shortest
//! representation that parses back to the same bits, so parameter
//! round-trips are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DenseNet, Head};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub backbone: DenseNet,
    pub head: Head,
    pub rng_seed: u64,
}

impl Checkpoint {
    pub fn new(backbone: DenseNet, head: Head, rng_seed: u64) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            backbone,
            head,
            rng_seed,
        }
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(ckpt)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint format version {}",
            ckpt.format_version
        )));
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_dense_net, init_head};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = StdRng::seed_from_u64(123);
        let backbone = init_dense_net(&[5, 7, 3], &mut rng).unwrap();
        let head = init_head(3, 2, 1.5, &mut rng).unwrap();
        let ckpt = Checkpoint::new(backbone, head, 123);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt.json");
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();

        assert_eq!(loaded, ckpt);
        // parameters bit-for-bit
        for (a, b) in loaded
            .backbone
            .layers
            .iter()
            .zip(&ckpt.backbone.layers)
        {
            for (x, y) in a.weight.as_slice().iter().zip(b.weight.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(loaded.head.temperature.to_bits(), ckpt.head.temperature.to_bits());
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut rng = StdRng::seed_from_u64(1);
        let ckpt = Checkpoint {
            format_version: 999,
            backbone: init_dense_net(&[2, 2], &mut rng).unwrap(),
            head: init_head(2, 2, 1.0, &mut rng).unwrap(),
            rng_seed: 1,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt.json");
        save_checkpoint(&ckpt, &path).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
