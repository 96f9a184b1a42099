use std::path::{Path, PathBuf};

use crate::CliError;

/// Create a fresh run directory `<root>/<UTC timestamp>-<hash8>`. An existing
/// directory is never reused: a numeric suffix is appended instead.
pub fn create_run_dir(root: &Path, hash: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(root)
        .map_err(|e| CliError::Runtime(format!("cannot create output root {}: {e}", root.display())))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let short = &hash[..hash.len().min(8)];
    let base = format!("{stamp}-{short}");
    for k in 0u32.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Runtime(format!("cannot create {}: {e}", dir.display()))),
        }
    }
    unreachable!("u32 suffixes exhausted")
}

/// Write a new file; refuses to replace an existing one.
pub fn write_new(path: &Path, contents: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
