pub mod convert;
pub mod dataset;
pub mod decompose;
pub mod eval;
pub mod infer;
pub mod selfcheck;
pub mod train;

use std::path::Path;

use crate::error::{io_err, CliResult};

/// Creates the parent directory of `path` if it does not exist.
pub fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| io_err(p, e)),
        _ => Ok(()),
    }
}
