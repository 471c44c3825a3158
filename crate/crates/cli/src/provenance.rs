//! Provenance records written next to every output: the resolved config, the
//! seed and a SHA-256 of each input file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, RunConfig};

pub const CONFIG_FILE: &str = "config.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seed: u64,
    pub inputs: Vec<InputHash>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

/// Writes `config.json` into `dir` and merges this command's record into
/// `provenance.json` (one entry per command name).
pub fn stamp(dir: &Path, cfg: &RunConfig, command: &str, inputs: &[PathBuf]) -> Result<(), CliError> {
    create_dir(dir)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    let path = dir.join(PROVENANCE_FILE);
    let mut all: BTreeMap<String, Record> = match std::fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    let inputs = inputs
        .iter()
        .map(|p| {
            Ok(InputHash {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    all.insert(
        command.to_owned(),
        Record {
            seed: cfg.seed,
            inputs,
        },
    );
    write_json(&path, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn records_accumulate_per_command() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.csv");
        std::fs::write(&input, "a\n").unwrap();
        let cfg = RunConfig::default();
        stamp(dir.path(), &cfg, "split", &[input.clone()]).unwrap();
        stamp(dir.path(), &cfg, "train", &[]).unwrap();
        let all: BTreeMap<String, Record> =
            serde_json::from_slice(&std::fs::read(dir.path().join(PROVENANCE_FILE)).unwrap()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all["split"].inputs[0].path, input);
        let back: RunConfig =
            serde_json::from_slice(&std::fs::read(dir.path().join(CONFIG_FILE)).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
