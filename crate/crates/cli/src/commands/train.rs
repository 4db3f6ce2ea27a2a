use serde::Serialize;
use twinx::anomaly::fit_error_model;
use twinx::forecaster::{train, TcnModel, TrainReport};
use twinx::telemetry::{make_windows, ScalerParams};
use twinx::SavedModel;

use super::{load_clean, require_input, warn, MODEL_FILE, TRAIN_REPORT_FILE};
use crate::config::{stream, RunConfig};
use crate::error::CliError;
use crate::output::write_json;
use crate::output::write_atomic;
use crate::TrainArgs;

#[derive(Debug, Serialize)]
struct TrainSummary {
    rows: usize,
    dropped_rows: usize,
    duplicate_rows: usize,
    windows: usize,
    error_model_windows: usize,
    receptive_field: usize,
    parameters: usize,
    threshold: f64,
    training: TrainReport,
}

pub fn run(mut cfg: RunConfig, args: TrainArgs) -> Result<(), CliError> {
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let path = args.data.unwrap_or_else(|| cfg.train_data());
    require_input(&path)?;
    let (load, frame) = load_clean(&path, &cfg.schema())?
        .ok_or_else(|| CliError::Runtime(format!("{} has no usable rows", path.display())))?;

    let tc = cfg.train_config();
    let (fit_rows, _) = frame.split_chronological(1.0 - tc.validation_fraction);
    let scaler = ScalerParams::fit(&fit_rows);
    let scaled = scaler.apply(&frame).map_err(|e| CliError::Runtime(e.to_string()))?;
    let w = cfg.window.length;
    let windows = make_windows::<f64>(&scaled, w, cfg.window.stride);

    let arch = cfg.arch(frame.channels());
    let initial = TcnModel::init(&arch, cfg.seed_for(stream::INIT)).map_err(|e| CliError::Config(e.to_string()))?;
    if tc.epochs == 0 {
        warn("epochs = 0: saving the initial weights untrained");
    }
    let (model, report) = train(&initial, &windows, &tc).map_err(|e| CliError::Runtime(format!("training failed: {e}")))?;
    let (fit_windows, _) = windows.split_chronological(1.0 - tc.validation_fraction);
    let error_model = fit_error_model(&model, &fit_windows, cfg.anomaly.shrinkage, cfg.anomaly.quantile)
        .map_err(|e| CliError::Runtime(format!("error model: {e}")))?;

    let summary = TrainSummary {
        rows: frame.rows(),
        dropped_rows: load.dropped_count,
        duplicate_rows: load.duplicate_count,
        windows: windows.len(),
        error_model_windows: fit_windows.len(),
        receptive_field: arch.receptive_field(),
        parameters: model.param_count(),
        threshold: error_model.threshold,
        training: report,
    };
    let saved = SavedModel { model, window_length: w, scaler, error_model, training_seed: tc.seed };
    let out = cfg.out_dir();
    write_atomic(&out.join(MODEL_FILE), saved.to_json().as_bytes())?;
    write_json(&out.join(TRAIN_REPORT_FILE), &summary)?;

    let best = summary.training.epochs.iter().next_back().map(|e| e.best_validation_mse);
    println!(
        "trained on {} windows ({} rows, {} dropped), {} epochs, best validation MSE {}",
        summary.windows,
        summary.rows,
        summary.dropped_rows,
        summary.training.final_epoch,
        best.map_or("n/a".into(), |b| format!("{b:.6}"))
    );
    println!("threshold {:.6} at quantile {}", summary.threshold, cfg.anomaly.quantile);
    println!("wrote {}", out.join(MODEL_FILE).display());
    Ok(())
}
