//! JSON config loading with errors anchored to a line of the file.

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::error::{CliError, Location, Result};

/// A parsed config together with the text it came from.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub path: PathBuf,
    pub text: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value = serde_json::from_str(&text).map_err(|e| CliError::Config {
        location: Location {
            path: path.to_path_buf(),
            line: Some(e.line()),
            column: Some(e.column()),
        },
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })?;
    Ok(Loaded {
        sha256: sha256_hex(text.as_bytes()),
        value,
        path: path.to_path_buf(),
        text,
    })
}

impl<T> Loaded<T> {
    /// Wraps a validation error, pointing at the first line that mentions
    /// the offending field when the message names one.
    pub fn reject(&self, err: covsim_core::Error) -> CliError {
        let message = err.to_string();
        let line = field_name(&message).and_then(|f| find_key_line(&self.text, f));
        match err {
            covsim_core::Error::InvalidConfig(_) | covsim_core::Error::InvalidScheme(_) => CliError::Config {
                location: Location {
                    path: self.path.clone(),
                    line,
                    column: None,
                },
                message,
            },
            other => CliError::Core(other),
        }
    }
}

fn field_name(message: &str) -> Option<&str> {
    let body = message.split_once(": ").map_or(message, |(_, rest)| rest);
    let word = body.split_whitespace().next()?;
    let word = word.rsplit('.').next()?;
    word.chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        .then_some(word)
}

fn find_key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_field_lines() {
        let text = "{\n  \"seed\": 1,\n  \"replications\": 0\n}";
        assert_eq!(find_key_line(text, "replications"), Some(3));
        assert_eq!(
            field_name("invalid configuration: replications must be at least 1"),
            Some("replications")
        );
        assert_eq!(
            field_name("invalid configuration: collapse.min_c1 must be positive"),
            Some("min_c1")
        );
    }
}
