//! Flat `key = value` files with dotted keys.
//!
//! ```text
//! # comment
//! experiment = csbm_sweep
//! csbm.phi = -0.75, 0, 0.75
//! jdr.eta_A = 0.415
//! ```

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: PathBuf,
    entries: BTreeMap<String, String>,
    read: RefCell<BTreeSet<String>>,
}

impl KeyValues {
    pub fn parse(text: &str, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: String| CliError::Syntax {
                path: source.clone(),
                line: i + 1,
                msg,
            };
            let Some((k, v)) = line.split_once('=') else {
                return Err(syntax(format!("expected key = value, got {line:?}")));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(syntax(format!("bad key {k:?}")));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(syntax(format!("duplicate key {k}")));
            }
        }
        Ok(KeyValues {
            source,
            entries,
            read: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key)?;
        self.read.borrow_mut().insert(key.to_string());
        Some(v)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|_| CliError::config(key, format!("cannot parse {v:?}")))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| CliError::config(key, "missing required key"))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::config(key, format!("cannot parse list item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Keys present in the file that nothing asked for.
    pub fn unused(&self) -> Vec<String> {
        let read = self.read.borrow();
        self.entries.keys().filter(|k| !read.contains(*k)).cloned().collect()
    }
}
