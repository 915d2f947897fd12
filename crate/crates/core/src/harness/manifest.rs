//! JSON utterance manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::Split;
use crate::ctc::Alphabet;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub text: String,
    pub subject: usize,
    pub split: Split,
    /// Stream name (`eeg`, `audio`, `video`, `eeg_stat`, ...) to a path relative to the manifest.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub utterances: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    /// Checks transcripts against the alphabet and that every listed `stream` file exists.
    pub fn validate(&self, base: &Path, streams: &[&str]) -> Result<()> {
        let alphabet = Alphabet::default();
        for u in &self.utterances {
            alphabet
                .encode(&u.text)
                .map_err(|e| Error::Data(format!("utterance {}: {e}", u.id)))?;
            for s in streams {
                let path = entry_path(base, u, s)?;
                if !path.is_file() {
                    return Err(Error::Data(format!("missing {s} file {}", path.display())));
                }
            }
        }
        Ok(())
    }
}

/// Absolute path of an entry's stream file.
pub fn entry_path(base: &Path, entry: &ManifestEntry, stream: &str) -> Result<PathBuf> {
    entry
        .files
        .get(stream)
        .map(|rel| base.join(rel))
        .ok_or_else(|| Error::Data(format!("utterance {} has no {stream} entry; run the extraction step first", entry.id)))
}

/// Directory that manifest-relative paths are resolved against.
pub fn manifest_base(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}
