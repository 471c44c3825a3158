//! Versioned JSON container for encoder and model checkpoints.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Envelope<P> {
    kind: String,
    version: u32,
    payload: P,
}

/// Writes `payload` tagged with `kind` and the container version.
pub fn save<P: Serialize>(path: &Path, kind: &str, payload: &P) -> Result<()> {
    let env = Envelope {
        kind: kind.to_owned(),
        version: CHECKPOINT_VERSION,
        payload,
    };
    let json = serde_json::to_vec(&env).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load<P: DeserializeOwned>(path: &Path, kind: &str) -> Result<P> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let env: Envelope<serde_json::Value> =
        serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    if env.kind != kind {
        return Err(bad(format!("expected a `{kind}` checkpoint, found `{}`", env.kind)));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {}", env.version)));
    }
    serde_json::from_value(env.payload).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let v = vec![0.1f64, 1.0 / 3.0, -2.5e-300];
        save(&p, "vec", &v).unwrap();
        let back: Vec<f64> = load(&p, "vec").unwrap();
        assert_eq!(back, v);
        assert!(matches!(load::<Vec<f64>>(&p, "other"), Err(Error::Checkpoint { .. })));
        assert!(matches!(
            load::<Vec<f64>>(&dir.path().join("missing.json"), "vec"),
            Err(Error::Io { .. })
        ));
    }
}
