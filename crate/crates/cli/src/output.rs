//! Output staging: everything is written to a scratch location next to the
//! destination and moved into place only once complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub struct StagedDir {
    tmp: tempfile::TempDir,
    dest: PathBuf,
}

impl StagedDir {
    /// `dest` must not exist or be an empty directory.
    pub fn new(dest: &Path) -> Result<Self> {
        if dest.exists() {
            let empty = dest.is_dir() && fs::read_dir(dest)?.next().is_none();
            if !empty {
                bail!("output {} exists and is not an empty directory", dest.display());
            }
        }
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let tmp = tempfile::Builder::new().prefix(".staging-").tempdir_in(&parent)?;
        Ok(StagedDir { tmp, dest: dest.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn commit(self) -> Result<PathBuf> {
        if self.dest.exists() {
            fs::remove_dir(&self.dest)?;
        }
        let staged = self.tmp.keep();
        fs::rename(&staged, &self.dest).with_context(|| format!("moving output to {}", self.dest.display()))?;
        Ok(self.dest)
    }
}

/// Writes `bytes` to `dest` through a temporary file in the same directory.
pub fn write_file_atomic(dest: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let mut f = tempfile::NamedTempFile::new_in(&parent)?;
    f.write_all(bytes)?;
    f.persist(dest).with_context(|| format!("writing {}", dest.display()))?;
    Ok(())
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Run description echoed next to every output. Holds no wall-clock or
/// host data, so identical runs produce identical bytes.
#[derive(Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
}

pub fn metadata<'a, C: Serialize>(command: &'a str, config: &'a C) -> Metadata<'a, C> {
    Metadata { tool: "coalesce-flow", version: env!("CARGO_PKG_VERSION"), command, config }
}
