//! Versioned checkpoint files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SastError};
use crate::scalar::Scalar;
use crate::snn::NetworkParams;

pub const CHECKPOINT_FORMAT: &str = "sast-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Checkpoint<S> {
    pub format: String,
    pub version: u32,
    pub params: NetworkParams<S>,
}

/// JSON text; floats are written in shortest round-trip form so a
/// save/load cycle is bit-exact.
pub fn checkpoint_to_string<S: Scalar>(params: &NetworkParams<S>) -> Result<String> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        params: params.clone(),
    };
    Ok(serde_json::to_string_pretty(&ck)?)
}

pub fn checkpoint_from_str<S: Scalar>(text: &str) -> Result<NetworkParams<S>> {
    let ck: Checkpoint<S> = serde_json::from_str(text)?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(SastError::Malformed(format!("not a checkpoint file ({})", ck.format)));
    }
    if ck.version != CHECKPOINT_VERSION {
        return Err(SastError::Version {
            expected: CHECKPOINT_VERSION,
            found: ck.version,
        });
    }
    ck.params.validate()?;
    Ok(ck.params)
}

pub fn save_checkpoint<S: Scalar>(path: &Path, params: &NetworkParams<S>) -> Result<()> {
    fs::write(path, checkpoint_to_string(params)?).map_err(|e| SastError::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<NetworkParams<S>> {
    let text = fs::read_to_string(path).map_err(|e| SastError::io(path, e))?;
    checkpoint_from_str(&text)
}
