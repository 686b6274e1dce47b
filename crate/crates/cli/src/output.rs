//! Staged output writing: nothing lands at its final path until every file
//! of the run has been produced, then each is renamed into place. A failure
//! mid-computation therefore leaves no partial outputs behind.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Default)]
pub struct StagedOutputs {
    files: Vec<(PathBuf, String)>,
}

impl StagedOutputs {
    pub fn new() -> Self {
        StagedOutputs::default()
    }

    pub fn stage(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.files.push((path.into(), contents));
    }

    /// Write all staged files via temp-then-rename.
    pub fn commit(self) -> io::Result<()> {
        let mut temps: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(self.files.len());
        for (path, contents) in &self.files {
            let tmp = temp_path(path);
            if let Err(e) = fs::write(&tmp, contents) {
                cleanup(&temps, Some(&tmp));
                return Err(e);
            }
            temps.push((tmp, path.clone()));
        }
        for (i, (tmp, path)) in temps.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, path) {
                cleanup(&temps[i..], None);
                return Err(e);
            }
        }
        Ok(())
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp-{}", std::process::id()));
    path.with_file_name(name)
}

fn cleanup(temps: &[(PathBuf, PathBuf)], extra: Option<&Path>) {
    for (tmp, _) in temps {
        let _ = fs::remove_file(tmp);
    }
    if let Some(p) = extra {
        let _ = fs::remove_file(p);
    }
}
