//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored; a trailing `# ...`
//! comment after a value is stripped. Keys are case-sensitive and may appear
//! only once per file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered key/value pairs together with where each key came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let location = format!("{origin}:{}", lineno + 1);
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(&location, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::config(&location, "empty key"));
            }
            if kv.entries.contains_key(key) {
                return Err(Error::config(&location, format!("duplicate key `{key}`")));
            }
            kv.entries.insert(key.to_string(), (value.to_string(), location));
        }
        Ok(kv)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses a single `key=value` override such as the CLI's `--set`.
    pub fn parse_override(s: &str) -> Result<(String, String)> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("expected key=value, got `{s}`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::config("--set", "empty key"));
        }
        Ok((k.to_string(), v.trim().to_string()))
    }

    /// Inserts or replaces a value; later layers win.
    pub fn set(&mut self, key: &str, value: &str, location: &str) {
        self.entries
            .insert(key.to_string(), (value.to_string(), location.to_string()));
    }

    pub fn merge(&mut self, other: &KeyValues) {
        for (k, (v, loc)) in &other.entries {
            self.entries.insert(k.clone(), (v.clone(), loc.clone()));
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn location(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, l)| l.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, loc)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::config(loc, format!("`{key}` expects a number, got `{v}`"))),
        }
    }

    pub fn get_i64(&self, key: &str) -> Result<Option<i64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, loc)) => v
                .parse::<i64>()
                .map(Some)
                .map_err(|_| Error::config(loc, format!("`{key}` expects an integer, got `{v}`"))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, loc)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Error::config(loc, format!("`{key}` expects a nonnegative integer, got `{v}`"))),
        }
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (k, (_, loc)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::config(loc, format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}
