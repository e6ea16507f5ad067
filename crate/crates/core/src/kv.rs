//! Plain `key=value` text, one entry per line.
//!
//! Shared by the model file header and the training config file. Blank lines
//! and lines starting with `#` are ignored; keys must be unique.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if kv.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Removes and parses `key`, falling back to `default` when absent.
    pub fn take_parsed<V: FromStr>(&mut self, key: &str, default: V) -> Result<V> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => parse_value(key, &raw),
        }
    }

    pub fn take_required<V: FromStr>(&mut self, key: &str) -> Result<V> {
        let raw = self
            .take(key)
            .ok_or_else(|| Error::Config(format!("missing key {key}")))?;
        parse_value(key, &raw)
    }

    pub fn take_list<V: FromStr>(&mut self, key: &str) -> Result<Option<Vec<V>>> {
        self.take(key).map(|raw| parse_list(key, &raw)).transpose()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Errors if any key was left unconsumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(_) => Err(Error::Config(format!(
                "unknown keys: {}",
                self.entries.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn into_map(self) -> BTreeMap<String, String> {
        self.entries
    }
}

pub fn parse_value<V: FromStr>(key: &str, raw: &str) -> Result<V> {
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
}

pub fn parse_list<V: FromStr>(key: &str, raw: &str) -> Result<Vec<V>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|s| parse_value(key, s.trim())).collect()
}

pub fn join<V: Display>(values: &[V]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
