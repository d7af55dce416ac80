//! `relative/path.wav,label` dataset manifests.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::ClassLabel;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub path: PathBuf,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parse manifest text. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (path, label) = line.rsplit_once(',').ok_or_else(|| {
                Error::Data(format!(
                    "manifest line {}: expected `path,label`",
                    lineno + 1
                ))
            })?;
            let label = label
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("manifest line {}: {e}", lineno + 1)))?;
            entries.push(ManifestEntry {
                path: PathBuf::from(path.trim()),
                label,
            });
        }
        Ok(Manifest { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# path,label\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.path.display(), e.label));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
