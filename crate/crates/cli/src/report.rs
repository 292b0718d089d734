//! Report envelope and atomic file output. The `report` object is fully
//! deterministic for a fixed configuration; volatile fields (timestamps,
//! tool version) live in the separate `meta` block.

use anyhow::{Context, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Serialize)]
pub struct Meta {
    pub generated_at: String,
    pub tool_version: &'static str,
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub report: T,
    pub meta: Meta,
}

pub fn envelope<T: Serialize>(report: T) -> Envelope<T> {
    Envelope {
        report,
        meta: Meta {
            generated_at: chrono::Utc::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION"),
        },
    }
}

/// Write to the path via a temp file and rename, or to stdout when no path
/// is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        None => {
            println!("{contents}");
            Ok(())
        }
        Some(path) => {
            let tmp = path.with_extension("tmp");
            {
                let mut f = std::fs::File::create(&tmp)
                    .with_context(|| format!("creating {}", tmp.display()))?;
                f.write_all(contents.as_bytes())?;
                f.write_all(b"\n")?;
                f.sync_all()?;
            }
            std::fs::rename(&tmp, path)
                .with_context(|| format!("renaming into {}", path.display()))?;
            Ok(())
        }
    }
}

pub fn emit_json<T: Serialize>(path: Option<&Path>, report: T) -> Result<()> {
    let text = serde_json::to_string_pretty(&envelope(report))?;
    emit(path, &text)
}
