use twinx::anomaly::{score_dataset, write_verdicts_csv, DetectionSummary, VerdictRecord};
use twinx::telemetry::make_windows;

use super::{load_model, model_path, require_input, scaled_query, warn, SUMMARY_FILE, VERDICTS_FILE};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{write_atomic, write_json};
use crate::DetectArgs;

pub fn run(cfg: RunConfig, args: DetectArgs) -> Result<(), CliError> {
    cfg.validate()?;
    let path = args.data.unwrap_or_else(|| cfg.query_data());
    require_input(&path)?;
    let saved = load_model(&model_path(&cfg, args.model))?;
    let w = saved.window_length;

    let mut records = Vec::new();
    match scaled_query(&path, &cfg, &saved)? {
        Some((frame, scaled)) => {
            let windows = make_windows::<f64>(&scaled, w, cfg.score_stride());
            let verdicts = score_dataset(&saved.model, &saved.error_model, &windows)
                .map_err(|e| CliError::Runtime(format!("scoring failed: {e}")))?;
            for (i, v) in verdicts.iter().enumerate() {
                records.push(VerdictRecord {
                    origin_index: windows.origin_indices[i],
                    timestamp: frame.timestamps[windows.target_index(i)],
                    distance: v.distance,
                    score: v.score,
                    is_anomaly: v.is_anomaly,
                });
            }
        }
        None => warn(format!("{} has no usable rows", path.display())),
    }
    if records.is_empty() {
        warn(format!("no complete window of {} rows plus a target; writing zero verdicts", w));
    }

    let summary = DetectionSummary::from_records(&records, saved.error_model.threshold, saved.error_model.quantile);
    let mut csv = Vec::new();
    write_verdicts_csv(&records, &mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    let out = cfg.out_dir();
    write_atomic(&out.join(VERDICTS_FILE), &csv)?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    println!(
        "scored {} windows, flagged {} ({:.2}%), threshold {:.6}",
        summary.count,
        summary.flagged,
        100.0 * summary.flag_rate,
        summary.threshold
    );
    Ok(())
}
