//! File formats: tensor-series CSV, run configuration, posterior summaries
//! and raw draw dumps.

pub mod config;
pub mod preprocess;
pub mod series_file;
pub mod summary;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::RunConfig;
pub use preprocess::{preprocess, PreprocessStep, Preprocessed};
pub use series_file::{export, ingest, parse_series, series_to_string};
pub use summary::{posterior_means, read_draws_bin, read_summary, summarize, write_draws_bin, write_summary, SummaryRow};

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
