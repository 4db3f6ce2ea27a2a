//! Vehicle telemetry: schema, CSV ingestion, cleaning, min-max scaling,
//! sliding windows and a seeded synthetic generator.

mod frame;
mod scaler;
mod schema;
pub mod synth;
mod window;

pub use frame::{load_csv, CsvLoad, TelemetryFrame};
pub use scaler::ScalerParams;
pub use schema::{Channel, ChannelSchema, Fwg};
pub use synth::{injection_unit, synth_generate, AnomalyKind, Injection, Regime, SynthConfig};
pub use window::{make_windows, WindowedDataset};

use std::path::PathBuf;

/// Column name of the label sidecar written next to synthetic data.
pub const LABEL_COLUMN: &str = "anomaly";

#[derive(Debug, thiserror::Error)]
pub enum TelemetryError {
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("file {0} has no header or no data rows")]
    EmptyFile(PathBuf),
    #[error("{out_of_order} of {rows} rows are out of time order; wrong file?")]
    NonMonotoneTime { out_of_order: usize, rows: usize },
    #[error("cleaning dropped every row")]
    AllRowsDropped,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
