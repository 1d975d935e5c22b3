use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Writes to `path` through a sibling temp file and a rename, so readers
/// never see a partial file; prints to stdout without a path.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())?;
        return Ok(out.flush()?);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::from(e.error))?;
    Ok(())
}
