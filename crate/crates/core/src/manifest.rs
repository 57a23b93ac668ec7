//! Flat `key: value` text manifests.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    /// First value stored under `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All values stored under `key`, in insertion order.
    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require<T: std::str::FromStr>(&self, op: &'static str, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::input(op, format!("manifest lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::input(op, format!("manifest `{key}` has bad value `{raw}`")))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(op: &'static str, path: &Path, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or_else(|| Error::Parse {
                op,
                path: path.to_owned(),
                line: idx + 1,
                msg: "expected `key: value`".into(),
            })?;
            entries.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        Ok(Self { entries })
    }

    pub fn write(&self, op: &'static str, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(op, path, e))
    }

    pub fn read(op: &'static str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(op, path, e))?;
        Self::parse(op, path, &text)
    }
}
