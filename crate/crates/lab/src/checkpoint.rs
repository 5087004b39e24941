//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! form and parsed back exactly, so save/load is bit-exact.

use std::path::Path;

use olnl_core::{Mlp, Optimizer};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::fsio;

pub const FORMAT: &str = "olnl-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Epochs completed; training resumes at this epoch.
    pub epoch: usize,
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub config: RunConfig,
    pub model: Mlp,
    pub optimizer: Optimizer,
}

impl Checkpoint {
    pub fn new(config: &RunConfig, epoch: usize, model: &Mlp, optimizer: &Optimizer) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            epoch,
            sizes: model.sizes(),
            seed: model.seed,
            config: config.clone(),
            model: model.clone(),
            optimizer: optimizer.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::Invalid(format!("cannot encode checkpoint: {e}")))
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| LabError::format(path, e))?;
        if c.format != FORMAT {
            return Err(LabError::format(path, "not an olnl checkpoint"));
        }
        if c.version != VERSION {
            return Err(LabError::format(path, format!("unsupported checkpoint version {}", c.version)));
        }
        c.model.validate().map_err(|e| LabError::format(path, e))?;
        if c.model.sizes() != c.sizes {
            return Err(LabError::format(path, "layer sizes disagree with the stored parameters"));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsio::read_to_string(path)?, path)
    }
}
