//! `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys are normalized so that
//! dashes and underscores are interchangeable; command-line flags override
//! file entries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let shown_path = path.display().to_string();
        let text = fs::read_to_string(path)?;
        let mut entries = BTreeMap::new();
        for (line_index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: shown_path.clone(),
                line: line_index + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let key = normalize(key);
            if key.is_empty() {
                return Err(Error::Parse {
                    path: shown_path.clone(),
                    line: line_index + 1,
                    message: "empty key".into(),
                });
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// All keys, normalized and sorted.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
