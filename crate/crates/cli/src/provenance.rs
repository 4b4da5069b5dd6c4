use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Identifies the inputs behind an output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn header(&self) -> String {
        match self.seed {
            Some(seed) => format!("# config_sha256={} seed={}\n", self.config_sha256, seed),
            None => format!("# config_sha256={} seed=none\n", self.config_sha256),
        }
    }

    /// Writes a CSV file prefixed with the provenance comment line.
    pub fn write_csv<F>(&self, path: &Path, body: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> covsim_core::Result<()>,
    {
        let mut buf = self.header().into_bytes();
        body(&mut buf)?;
        fs::write(path, buf).map_err(|e| CliError::io(path, e))
    }
}
