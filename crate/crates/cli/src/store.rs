//! Result layout and atomic file writes.
//!
//! ```text
//! <output_dir>/<config hash>/<seed>/<head>/result.json
//!                                         /log.jsonl
//!                                         /model.json, model.bin
//!                                         /scores.csv   (OOD / open-set runs)
//!                                         /timing.json  (wall clock, not compared)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use maxsep_core::nn::HeadKind;

use crate::error::{CliError, Result};

pub const RESULT_FILE: &str = "result.json";
pub const LOG_FILE: &str = "log.jsonl";
pub const MODEL_STEM: &str = "model";
pub const SCORES_FILE: &str = "scores.csv";
pub const TIMING_FILE: &str = "timing.json";

pub fn run_dir(output_dir: &Path, config_hash: &str, seed: u64, head: HeadKind) -> PathBuf {
    output_dir
        .join(config_hash)
        .join(seed.to_string())
        .join(head.as_str())
}

/// Write via a temporary sibling and rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("result types serialize");
    text.push('\n');
    write_atomic(path, text)
}

/// Every `result.json` below `root`, in sorted path order.
pub fn find_results(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::io(&dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RESULT_FILE) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/result.json");
        write_atomic(&path, "{}").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "{}");
        let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
        assert_eq!(find_results(dir.path()).unwrap(), vec![path]);
    }
}
