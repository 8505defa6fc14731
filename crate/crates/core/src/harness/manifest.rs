use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the config's JSON encoding.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutputs {
    pub seed: u64,
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub task: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub outputs: Vec<SeedOutputs>,
    /// Files not tied to a single seed.
    pub shared_files: Vec<PathBuf>,
    pub wall_clock: Vec<Timing>,
    pub failures: Vec<Failure>,
}

impl RunManifest {
    pub fn new<T: Serialize>(config: &T) -> Result<Self> {
        Ok(Self {
            config_hash: config_hash(config)?,
            tool_version: TOOL_VERSION.to_string(),
            outputs: Vec::new(),
            shared_files: Vec::new(),
            wall_clock: Vec::new(),
            failures: Vec::new(),
        })
    }

    pub fn add_file(&mut self, seed: u64, path: PathBuf) {
        match self.outputs.iter_mut().find(|o| o.seed == seed) {
            Some(o) => o.files.push(path),
            None => self.outputs.push(SeedOutputs {
                seed,
                files: vec![path],
            }),
        }
    }

    pub fn all_files(&self) -> impl Iterator<Item = &PathBuf> {
        self.outputs
            .iter()
            .flat_map(|o| &o.files)
            .chain(&self.shared_files)
    }

    /// Every referenced file must exist.
    pub fn verify_files(&self) -> Result<()> {
        for f in self.all_files() {
            if !f.exists() {
                return Err(Error::InvariantViolation(format!(
                    "manifest lists missing file {}",
                    f.display()
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentConfig;

    #[test]
    fn hash_tracks_every_field() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.training.lr_g = 1.0000001e-4;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let mut c = a.clone();
        c.seeds.push(9);
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn missing_files_are_reported() {
        let mut m = RunManifest::new(&1u8).unwrap();
        m.add_file(0, PathBuf::from("/definitely/not/here.csv"));
        assert!(m.verify_files().is_err());
    }
}
