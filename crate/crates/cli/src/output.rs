//! Artifact writing. Files go to a temporary sibling first and are renamed
//! into place, so a failed run never leaves a half-written artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::{NamedTempFile, TempDir};

use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = parent_of(path);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A directory assembled in a temporary location and swapped in whole.
pub struct StagedDir {
    tmp: TempDir,
    target: PathBuf,
}

impl StagedDir {
    pub fn new(target: &Path) -> Result<Self, CliError> {
        let parent = parent_of(target);
        std::fs::create_dir_all(&parent).map_err(|e| io_err(&parent, e))?;
        let tmp = tempfile::Builder::new().prefix(".staging-").tempdir_in(&parent).map_err(|e| io_err(target, e))?;
        Ok(Self { tmp, target: target.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.tmp.path().join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| io_err(&p, e))
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&self.path(name), e))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Replaces the target directory with the staged contents.
    pub fn commit(self) -> Result<(), CliError> {
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        }
        let staged = self.tmp.keep();
        std::fs::rename(&staged, &self.target).map_err(|e| io_err(&self.target, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn staged_dir_swaps_whole() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("explain");
        std::fs::create_dir_all(&target).unwrap();
        std::fs::write(target.join("stale.svg"), "x").unwrap();
        let s = StagedDir::new(&target).unwrap();
        s.write("fresh.svg", b"<svg/>").unwrap();
        s.commit().unwrap();
        let names: Vec<_> = std::fs::read_dir(&target).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, ["fresh.svg"]);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn dropped_stage_leaves_target_alone() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("explain");
        std::fs::create_dir_all(&target).unwrap();
        std::fs::write(target.join("keep.svg"), "x").unwrap();
        {
            let s = StagedDir::new(&target).unwrap();
            s.write("partial.svg", b"<").unwrap();
        }
        assert!(target.join("keep.svg").exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
