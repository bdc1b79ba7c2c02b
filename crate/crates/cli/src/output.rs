use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Fails unless `path` is an existing regular file.
pub fn check_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::validation(
            "BadPath",
            format!("input file {} does not exist", path.display()),
        ))
    }
}

/// Fails unless the directory that would hold `path` exists.
pub fn check_output(path: &Path) -> Result<(), CliError> {
    let dir = parent(path);
    if dir.is_dir() && !path.is_dir() {
        Ok(())
    } else {
        Err(CliError::validation(
            "BadPath",
            format!("cannot write {}: no such directory", path.display()),
        ))
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::validation("Io", format!("{}: {e}", path.display())))
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes via a temporary file in the same directory, renamed into place
/// only once fully written.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent(path))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}

/// Writes to `path` if given, otherwise to standard output.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
