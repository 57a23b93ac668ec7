//! Output directories: refusal to clobber, and a manifest line per artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::Failure;

/// Hex SHA-256 of a rendered config.
pub fn config_hash(rendered: &str) -> String {
    Sha256::digest(rendered.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub struct OutputDir {
    root: PathBuf,
    /// `config=<hash> seed=<..> ...`, appended to every artifact line.
    provenance: String,
    lines: Vec<String>,
}

impl OutputDir {
    /// Creates `root` if needed. An existing non-empty directory is only
    /// reused with `force`.
    pub fn create(
        op: &'static str,
        root: &Path,
        force: bool,
        provenance: String,
    ) -> Result<Self, Failure> {
        if root.exists() {
            let occupied = fs::read_dir(root)
                .map_err(|e| Failure::runtime(op, format!("{}: {e}", root.display())))?
                .next()
                .is_some();
            if occupied && !force {
                return Err(Failure::validation(
                    op,
                    format!(
                        "{} is not empty; pass --force to write into it",
                        root.display()
                    ),
                ));
            }
        }
        fs::create_dir_all(root)
            .map_err(|e| Failure::runtime(op, format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_owned(),
            provenance,
            lines: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records an artifact written by someone else.
    pub fn record(&mut self, name: &str) {
        self.lines
            .push(format!("artifact: {name} {}", self.provenance));
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
        let path = self.path(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::runtime("cli::write", format!("{}: {e}", path.display())))?;
        self.record(name);
        Ok(())
    }

    /// Rewrites `manifest.txt` with every artifact so far; called after each
    /// batch of writes so an interrupted command still leaves a manifest.
    pub fn flush(&self) -> std::io::Result<()> {
        let path = self.path("manifest.txt");
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(&path, text)
    }
}
