//! Run manifests: everything needed to repeat a solve exactly.

use std::fs;
use std::path::{Path, PathBuf};

use aggamg::{CycleConfig, ProblemSpec, SetupConfig, SolverConfig};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// An input file and the digest of its contents when the run was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl HashedFile {
    /// Records the absolute path so a manifest replays from any directory.
    pub fn new(path: &Path) -> Result<Self> {
        let path = fs::canonicalize(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        Ok(HashedFile {
            sha256: sha256_file(&path)?,
            path,
        })
    }

    /// Fails if the file changed since the manifest was written.
    pub fn verify(&self) -> Result<()> {
        let now = sha256_file(&self.path)?;
        if now != self.sha256 {
            bail!(InputError(format!(
                "{} changed since the manifest was written (sha256 {} != {})",
                self.path.display(),
                now,
                self.sha256
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum Inputs {
    Files {
        matrix: HashedFile,
        /// Absent means a right-hand side of ones.
        rhs: Option<HashedFile>,
        /// Absent means the constant near-null-space vector.
        b0: Option<HashedFile>,
    },
    Generated {
        problem: ProblemSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub inputs: Inputs,
    pub setup: SetupConfig,
    pub cycle: CycleConfig,
    pub solver: SolverConfig,
    /// Pool size used for the run; results do not depend on it.
    pub threads: Option<usize>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        if m.version != aggamg::VERSION {
            log::warn!(
                "manifest written by version {}, running {}",
                m.version,
                aggamg::VERSION
            );
        }
        m.setup.seed = m.seed;
        if let Inputs::Files { matrix, rhs, b0 } = &m.inputs {
            matrix.verify()?;
            for f in rhs.iter().chain(b0) {
                f.verify()?;
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Problems with the command-line inputs rather than the computation.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}
