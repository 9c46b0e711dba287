use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ExperimentReport, HarnessError, OutputPaths};
use crate::functionals::Trace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub trace: PathBuf,
    pub report: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    file.write_all(contents).map_err(io_err(&tmp))?;
    file.sync_all().map_err(io_err(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes the trace CSV (header row always present) and the pretty-printed
/// report JSON into `paths.dir`, creating it if needed.
pub fn emit_outputs(report: &ExperimentReport, trace: &Trace, paths: &OutputPaths) -> Result<OutputFiles, HarnessError> {
    fs::create_dir_all(&paths.dir).map_err(io_err(&paths.dir))?;
    let files = OutputFiles {
        trace: paths.dir.join(&paths.trace),
        report: paths.dir.join(&paths.report),
    };
    write_atomic(&files.trace, trace.to_csv().as_bytes())?;
    let mut json = serde_json::to_string_pretty(report).map_err(|e| HarnessError::numerical("harness", e))?;
    json.push('\n');
    write_atomic(&files.report, json.as_bytes())?;
    Ok(files)
}
