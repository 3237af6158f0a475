//! Output directories: an exclusive lock for the run and a manifest on completion.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::Failure;

const LOCK: &str = ".lock";

pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl OutputDir {
    /// Creates `root` if needed and takes its lock; fails if another run holds it.
    pub fn lock(root: &Path) -> Result<Self, Failure> {
        let io = |e: std::io::Error| Failure::Config(format!("output directory {}: {e}", root.display()));
        fs::create_dir_all(root).map_err(io)?;
        let mut f = OpenOptions::new().write(true).create_new(true).open(root.join(LOCK)).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Failure::Config(format!("output directory {} is locked by another run (remove {LOCK} if stale)", root.display()))
            } else {
                io(e)
            }
        })?;
        writeln!(f, "pid = {}", std::process::id()).map_err(io)?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of an artifact that the caller writes itself, recorded in the manifest.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
        let path = self.artifact(name);
        fs::write(&path, contents).map_err(|e| Failure::Numeric(format!("writing {}: {e}", path.display())))
    }

    /// Writes `manifest.txt` listing the run's provenance, outcome and artifacts.
    pub fn finish(&mut self, header: &[(&str, String)], outcome: &str) -> Result<(), Failure> {
        let mut m = String::from("format = pilotwave-run 1\n");
        for (k, v) in header {
            writeln!(m, "{k} = {v}").unwrap();
        }
        writeln!(m, "outcome = {outcome}").unwrap();
        for a in &self.artifacts {
            writeln!(m, "artifact = {a}").unwrap();
        }
        let path = self.root.join("manifest.txt");
        fs::write(&path, m).map_err(|e| Failure::Numeric(format!("writing {}: {e}", path.display())))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK));
    }
}
