//! Output plumbing: every file is written to a temp name in the target
//! directory and renamed into place, so readers never see partial files and
//! failed runs leave nothing behind. Every file starts with a header line
//! tying it to the config hash and seed that produced it.

use anyhow::{Context, Result};
use std::fs;
use std::path::{Path, PathBuf};

pub struct OutputDir {
    dir: PathBuf,
    header: String,
}

impl OutputDir {
    pub fn new(dir: &str, config_digest: &str, seed: i64) -> Result<Self> {
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir,
            header: format!("# config-sha256={config_digest} seed={seed}\n"),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write header plus body under `name`, atomically.
    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let final_path = self.path(name);
        let tmp_path = self.dir.join(format!(".{name}.tmp"));
        let full = format!("{}{}", self.header, body);
        fs::write(&tmp_path, full.as_bytes())
            .with_context(|| format!("writing {}", tmp_path.display()))?;
        fs::rename(&tmp_path, &final_path)
            .with_context(|| format!("renaming into {}", final_path.display()))?;
        println!("wrote {}", final_path.display());
        Ok(final_path)
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Shortest-round-trip float formatting: exact, compact, deterministic.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}
