//! Versioned JSON checkpoint.
//!
//! ```json
//! {
//!   "format": "lanmax-checkpoint",
//!   "version": 1,
//!   "network": { "layers": [...], "latent": [[...]], "biases": [[...]], "width_multiplier": 1.0 },
//!   "noise": [0.01, ...],
//!   "seed": 7,
//!   "epoch": 20
//! }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BinaryNetwork;
use crate::error::{Error, Result};
use crate::faultmem::NoiseVector;

pub const CHECKPOINT_FORMAT: &str = "lanmax-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub network: BinaryNetwork,
    pub noise: NoiseVector,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn new(network: BinaryNetwork, noise: NoiseVector, seed: u64, epoch: usize) -> Result<Self> {
        if noise.len() != network.num_layers() {
            return Err(Error::Config(format!(
                "noise vector has {} rates for {} layers",
                noise.len(),
                network.num_layers()
            )));
        }
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            network,
            noise,
            seed,
            epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            serde_json::to_writer(&mut file, self)?;
            file.write_all(b"\n")?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!(
                "{}: not a checkpoint (format {:?})",
                path.display(),
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                ckpt.version
            )));
        }
        // Rebuild to re-run structural validation on the decoded layers.
        let mut net = BinaryNetwork::new(ckpt.network.layers().to_vec())?;
        net.set_latent(ckpt.network.latent().to_vec())?;
        net.set_biases(ckpt.network.biases().to_vec())?;
        net.width_multiplier = ckpt.network.width_multiplier();
        Checkpoint::new(net, ckpt.noise, ckpt.seed, ckpt.epoch)
    }
}
