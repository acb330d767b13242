//! JSON snapshots of the world and state digests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};
use crate::state::World;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    world: World,
}

pub fn to_json(w: &World) -> Result<String> {
    #[derive(Serialize)]
    struct Borrowed<'a> {
        version: u32,
        world: &'a World,
    }
    serde_json::to_string(&Borrowed {
        version: SNAPSHOT_VERSION,
        world: w,
    })
    .map_err(|e| SimError::Snapshot(e.to_string()))
}

pub fn from_json(text: &str) -> Result<World> {
    let env: Envelope =
        serde_json::from_str(text).map_err(|e| SimError::Snapshot(e.to_string()))?;
    if env.version != SNAPSHOT_VERSION {
        return Err(SimError::Snapshot(format!(
            "unsupported snapshot version {}",
            env.version
        )));
    }
    Ok(env.world)
}

pub fn save(path: &Path, w: &World) -> Result<()> {
    std::fs::write(path, to_json(w)?).map_err(|e| SimError::io(path, e))
}

pub fn load(path: &Path) -> Result<World> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    from_json(&text)
}

/// SHA-256 of the serialized world, as hex.
pub fn digest(w: &World) -> Result<String> {
    let bytes = to_json(w)?;
    Ok(Sha256::digest(bytes.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
