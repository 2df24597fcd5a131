//! Output files with embedded provenance headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const TOOL: &str = "causal-pieces";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool version, command, seed and resolved configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Meta {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)?,
        })
    }

    /// `#`-prefixed lines placed above a CSV header.
    pub fn comment_lines(&self) -> String {
        format!(
            "# {} {}\n# command: {}\n# seed: {}\n# config: {}\n",
            self.tool, self.version, self.command, self.seed, self.config
        )
    }
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
    pub meta: Meta,
}

impl OutDir {
    pub fn create(root: &Path, meta: Meta) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            meta,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Opens `name` and writes the comment header; the caller adds the CSV.
    pub fn csv_file(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        w.write_all(self.meta.comment_lines().as_bytes())?;
        Ok(w)
    }

    /// Writes `{"meta": ..., "result": ...}`.
    pub fn json(&self, name: &str, result: &impl Serialize) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            meta: &'a Meta,
            result: &'a T,
        }
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&Doc {
            meta: &self.meta,
            result,
        })?;
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Reads a CSV written by this tool, skipping the comment header.
pub fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader)
}
