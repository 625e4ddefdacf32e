//! Output directory handling: one directory per invocation, holding the
//! config snapshot, transcripts and report files. Writes are single-writer
//! and byte-deterministic for a fixed config and seed.

use std::path::{Path, PathBuf};

use crate::config::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create output dir {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn snapshot_config(&self, raw: &str) -> Result<(), CliError> {
        self.write("config.snapshot.toml", raw)
    }
}

pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report serializes");
    out.push('\n');
    out
}
