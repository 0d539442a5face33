//! Commands behind the `cervdx` binary, callable in-process.

pub mod diagnose;
pub mod eval_dx;
pub mod eval_seg;
pub mod overlay;
pub mod phantom_cmd;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub use diagnose::{cmd_diagnose, cmd_diagnose_batch, DiagnoseInputs};
pub use eval_dx::cmd_eval_dx;
pub use eval_seg::cmd_eval_seg;
pub use phantom_cmd::cmd_phantom;

/// Sorted ids of files `<id><suffix>` directly under `dir`.
pub fn case_ids(dir: &Path, suffix: &str) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name();
        if let Some(id) = name.to_string_lossy().strip_suffix(suffix) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    Ok(ids)
}

pub(crate) fn write_pretty<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
