pub mod detect;
pub mod explain;
pub mod generate;
pub mod report;
pub mod train;

use std::path::{Path, PathBuf};

use twinx::telemetry::{load_csv, ChannelSchema, CsvLoad, TelemetryError, TelemetryFrame};
use twinx::{Instance, SavedModel};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";
pub const SUMMARY_FILE: &str = "detection_summary.json";
pub const EXPLAIN_DIR: &str = "explain";
pub const REPORT_FILE: &str = "report.md";

/// Input files named by flags or config must exist before any work starts.
pub fn require_input(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("input file {} does not exist", path.display())))
    }
}

pub fn model_path(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| cfg.out_dir().join(MODEL_FILE))
}

pub fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    SavedModel::load(path).map_err(|e| CliError::Runtime(format!("model {}: {e}", path.display())))
}

/// Reads and cleans a telemetry file. A file without data rows yields
/// `None` rather than an error.
pub fn load_clean(path: &Path, schema: &ChannelSchema) -> Result<Option<(CsvLoad, TelemetryFrame)>, CliError> {
    let fail = |e: TelemetryError| CliError::Runtime(format!("{}: {e}", path.display()));
    let load = match load_csv(path, schema) {
        Ok(l) => l,
        Err(TelemetryError::EmptyFile(_)) => return Ok(None),
        Err(e) => return Err(fail(e)),
    };
    match load.frame.clean() {
        Ok(f) => Ok(Some((load, f))),
        Err(TelemetryError::AllRowsDropped) => Ok(None),
        Err(e) => Err(fail(e)),
    }
}

/// The query frame in model units, or `None` when the file has no rows.
pub fn scaled_query(path: &Path, cfg: &RunConfig, saved: &SavedModel) -> Result<Option<(TelemetryFrame, TelemetryFrame)>, CliError> {
    let Some((_, frame)) = load_clean(path, &cfg.schema())? else {
        return Ok(None);
    };
    saved
        .scaler
        .check_schema(&frame)
        .map_err(|e| CliError::Runtime(format!("{} does not match the model: {e}", path.display())))?;
    let scaled = saved.scaler.apply(&frame).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(Some((frame, scaled)))
}

/// The window starting at row `origin` and the row after it.
pub fn instance_at(scaled: &TelemetryFrame, origin: usize, window_length: usize) -> Option<Instance> {
    let d = scaled.channels();
    let end = origin.checked_add(window_length)?;
    if end >= scaled.rows() {
        return None;
    }
    Some(Instance::new(scaled.values[origin * d..end * d].to_vec(), scaled.row(end).to_vec()))
}

pub fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}
