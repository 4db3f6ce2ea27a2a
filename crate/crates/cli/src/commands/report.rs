use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::Value;
use twinx::aggregate::Importance;
use twinx::anomaly::DetectionSummary;

use super::explain::{ExplainIndex, IMPORTANCE_FILE, INDEX_FILE};
use super::{load_model, EXPLAIN_DIR, MODEL_FILE, REPORT_FILE, SUMMARY_FILE, TRAIN_REPORT_FILE, VERDICTS_FILE};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::write_atomic;

fn require(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("missing artifact {}", path.display())))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn link(rel: &str) -> String {
    format!("[{rel}]({rel})")
}

pub fn run(cfg: RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = cfg.out_dir();
    let ex: PathBuf = out.join(EXPLAIN_DIR);

    let model_path = out.join(MODEL_FILE);
    require(&model_path)?;
    let saved = load_model(&model_path)?;
    let training: Value = read_json(&out.join(TRAIN_REPORT_FILE))?;
    require(&out.join(VERDICTS_FILE))?;
    let detection: DetectionSummary = read_json(&out.join(SUMMARY_FILE))?;
    let index: ExplainIndex = read_json(&ex.join(INDEX_FILE))?;
    let ranking: Vec<Importance> = read_json(&ex.join(IMPORTANCE_FILE))?;
    let mut charts = vec![index.bar.clone(), index.beeswarm.clone()];
    charts.extend(index.dependence.iter().cloned());
    for e in &index.instances {
        charts.push(e.svg.clone());
        require(&ex.join(&e.json))?;
    }
    for c in &charts {
        require(&ex.join(c))?;
    }

    let arch = &saved.model.arch;
    let mut md = String::new();
    let _ = writeln!(md, "# twinx report\n");
    let _ = writeln!(md, "## Model\n");
    let _ = writeln!(md, "| setting | value |\n|---|---|");
    let _ = writeln!(md, "| channels | {} |", arch.input_channels);
    let _ = writeln!(md, "| window length | {} |", saved.window_length);
    let _ = writeln!(md, "| receptive field | {} |", arch.receptive_field());
    let _ = writeln!(md, "| hidden channels | {} |", arch.hidden_channels);
    let _ = writeln!(md, "| kernel size | {} |", arch.kernel_size);
    let _ = writeln!(md, "| dilations | {:?} |", arch.dilations);
    let _ = writeln!(md, "| parameters | {} |", saved.model.param_count());
    let _ = writeln!(md, "| training seed | {} |", saved.training_seed);
    let _ = writeln!(md, "| shrinkage | {} |", saved.error_model.shrinkage);
    let _ = writeln!(md, "| threshold quantile | {} |", saved.error_model.quantile);
    let _ = writeln!(md, "| threshold | {:.6} |", saved.error_model.threshold);
    let epochs = training["training"]["final_epoch"].as_u64().unwrap_or(0);
    let best = training["training"]["best_epoch"].as_u64().unwrap_or(0);
    let _ = writeln!(md, "| epochs run | {epochs} |");
    let _ = writeln!(md, "| best epoch | {best} |\n");

    let _ = writeln!(md, "## Detection\n");
    let _ = writeln!(md, "| windows | flagged | flag rate | threshold |\n|---|---|---|---|");
    let _ = writeln!(
        md,
        "| {} | {} | {:.4} | {:.6} |\n",
        detection.count, detection.flagged, detection.flag_rate, detection.threshold
    );
    let _ = writeln!(md, "Verdicts: {}\n", link(VERDICTS_FILE));

    let _ = writeln!(md, "## Global feature importance\n");
    let _ = writeln!(md, "| rank | feature | mean(\\|SHAP value\\|) |\n|---|---|---|");
    for (k, r) in ranking.iter().enumerate() {
        let _ = writeln!(md, "| {} | {} | {:.6} |", k + 1, r.name, r.mean_abs_phi);
    }
    let _ = writeln!(md);

    let rel = |f: &str| format!("{EXPLAIN_DIR}/{f}");
    let _ = writeln!(md, "## Charts\n");
    let _ = writeln!(md, "### Bar\n\n![bar]({})\n", rel(&index.bar));
    let _ = writeln!(md, "### Beeswarm\n\n![beeswarm]({})\n", rel(&index.beeswarm));
    let _ = writeln!(md, "### Dependence\n");
    if index.dependence.is_empty() {
        let _ = writeln!(md, "None: fewer than three explanations.\n");
    }
    for d in &index.dependence {
        let _ = writeln!(md, "![dependence]({})\n", rel(d));
    }
    let _ = writeln!(md, "### Force\n");
    let _ = writeln!(
        md,
        "Estimator: {}, background of {} windows.\n",
        index.estimator, index.background_size
    );
    let _ = writeln!(md, "| kind | window origin | score | largest push | plot | data |\n|---|---|---|---|---|---|");
    for e in &index.instances {
        let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let _ = writeln!(
            md,
            "| {kind} | {} | {:.6} | {} | {} | {} |",
            e.origin_index,
            e.score,
            e.largest.as_deref().unwrap_or("none"),
            link(&rel(&e.svg)),
            link(&rel(&e.json))
        );
    }

    let path = out.join(REPORT_FILE);
    write_atomic(&path, md.as_bytes())?;
    println!("wrote {} ({} charts)", path.display(), charts.len());
    Ok(())
}
