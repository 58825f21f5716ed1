use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Write a file atomically: write a sibling temp file, flush, rename.
/// Interrupted runs never leave a torn output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::runtime(format!("bad output path {}", path.display())))?;
    let tmp = parent.join(format!(".{file_name}.tmp"));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
