//! Atomic file output with rollback.

use crate::commands::CliError;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Files and directories created by one command, so a failure can remove
/// them again. Safe to share between parallel runs.
#[derive(Default)]
pub struct OutputSet {
    created: Mutex<Vec<(PathBuf, bool)>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates `dir` (and missing parents) unless it already exists.
    pub fn create_dir(&self, dir: &Path) -> Result<(), CliError> {
        if dir.is_dir() {
            return Ok(());
        }
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur.filter(|d| !d.as_os_str().is_empty() && !d.exists()) {
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        let mut created = self.created.lock().expect("poisoned");
        created.extend(missing.into_iter().rev().map(|d| (d, true)));
        Ok(())
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        let res = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            return Err(io_error(path)(e));
        }
        self.created
            .lock()
            .expect("poisoned")
            .push((path.to_path_buf(), false));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.created
            .lock()
            .expect("poisoned")
            .iter()
            .filter(|(_, dir)| !dir)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes everything created so far, newest first.
    pub fn rollback(&self) {
        let mut created = self.created.lock().expect("poisoned");
        while let Some((path, is_dir)) = created.pop() {
            let _ = if is_dir {
                fs::remove_dir(&path)
            } else {
                fs::remove_file(&path)
            };
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        context: path.display().to_string(),
        source,
    }
}
