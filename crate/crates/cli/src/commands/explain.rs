use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use twinx::aggregate::{beeswarm_data, dependence_data, force_data, global_importance, ExplanationSet, ForceSegments};
use twinx::anomaly::{read_verdicts_csv, VerdictRecord};
use twinx::render::{render_bar, render_beeswarm, render_dependence, render_force};
use twinx::shapley::{explain_instance, Background, ExplanationDoc};
use twinx::telemetry::make_windows;
use twinx::Explanation;

use super::{instance_at, load_clean, load_model, model_path, require_input, scaled_query, EXPLAIN_DIR, VERDICTS_FILE};
use crate::config::{stream, RunConfig};
use crate::error::CliError;
use crate::output::StagedDir;
use crate::{ExplainArgs, SelectionArgs};

const DEFAULT_TOP_K: usize = 5;
/// Dependence plots drawn for this many top-ranked features.
const DEPENDENCE_PLOTS: usize = 3;

pub const INDEX_FILE: &str = "index.json";
pub const IMPORTANCE_FILE: &str = "importance.json";
pub const BAR_FILE: &str = "bar.svg";
pub const BEESWARM_FILE: &str = "beeswarm.svg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Anomaly,
    Normal,
}

#[derive(Debug, Serialize)]
struct InstanceDoc<'a> {
    kind: InstanceKind,
    origin_index: usize,
    timestamp: f64,
    distance: f64,
    score: f64,
    explanation: ExplanationDoc,
    force: &'a ForceSegments,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub kind: InstanceKind,
    pub origin_index: usize,
    pub score: f64,
    pub fx: f64,
    pub largest: Option<String>,
    pub json: String,
    pub svg: String,
}

/// Table of contents for the explain directory; `report` reads it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainIndex {
    pub estimator: String,
    pub background_size: usize,
    pub instances: Vec<IndexEntry>,
    pub bar: String,
    pub beeswarm: String,
    pub dependence: Vec<String>,
}

fn select(records: &[VerdictRecord], sel: &SelectionArgs) -> Result<Vec<usize>, CliError> {
    let flagged: Vec<usize> = (0..records.len()).filter(|&i| records[i].is_anomaly).collect();
    if let Some(wanted) = &sel.indices {
        return wanted
            .iter()
            .map(|&o| {
                records
                    .iter()
                    .position(|r| r.origin_index == o)
                    .ok_or_else(|| CliError::Runtime(format!("no verdict for window origin {o}")))
            })
            .collect();
    }
    if sel.all_anomalies {
        return Ok(flagged);
    }
    let k = sel.top_k.unwrap_or(DEFAULT_TOP_K);
    let mut ranked = flagged;
    ranked.sort_by(|&a, &b| records[b].score.total_cmp(&records[a].score).then(a.cmp(&b)));
    ranked.truncate(k);
    Ok(ranked)
}

/// An equally sized, seeded sample of unflagged windows outside the selection.
fn normal_sample(records: &[VerdictRecord], chosen: &[usize], seed: u64) -> Vec<usize> {
    let pool: Vec<usize> = (0..records.len()).filter(|i| !records[*i].is_anomaly && !chosen.contains(i)).collect();
    let take = chosen.len().min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = index::sample(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]).collect();
    picks.sort_unstable();
    picks
}

fn safe_name(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn render_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("rendering failed: {e}"))
}

pub fn run(cfg: RunConfig, args: ExplainArgs) -> Result<(), CliError> {
    cfg.validate()?;
    let query_path = args.data.unwrap_or_else(|| cfg.query_data());
    let train_path = cfg.train_data();
    require_input(&query_path)?;
    require_input(&train_path)?;
    let saved = load_model(&model_path(&cfg, args.model))?;
    let out = cfg.out_dir();
    let verdict_path = out.join(VERDICTS_FILE);
    if !verdict_path.is_file() {
        return Err(CliError::Runtime(format!("missing {}; run detect first", verdict_path.display())));
    }
    let records = read_verdicts_csv(&verdict_path).map_err(|e| CliError::Runtime(format!("{}: {e}", verdict_path.display())))?;

    let anomalies = select(&records, &args.selection)?;
    if anomalies.is_empty() {
        return Err(CliError::Runtime("selection is empty: no window to explain".into()));
    }
    let normals = normal_sample(&records, &anomalies, cfg.seed_for(stream::NORMAL_SAMPLE));

    let w = saved.window_length;
    let (_, scaled) = scaled_query(&query_path, &cfg, &saved)?
        .ok_or_else(|| CliError::Runtime(format!("{} has no usable rows", query_path.display())))?;
    let (_, train_frame) = load_clean(&train_path, &cfg.schema())?
        .ok_or_else(|| CliError::Runtime(format!("{} has no usable rows", train_path.display())))?;
    let train_scaled = saved.scaler.apply(&train_frame).map_err(|e| CliError::Runtime(e.to_string()))?;
    let pool = make_windows::<f64>(&train_scaled, w, 1);
    if pool.is_empty() {
        return Err(CliError::Runtime(format!("{} is too short for a background window", train_path.display())));
    }
    let ecfg = cfg.explain_config();
    let background = Background::sample(&pool, ecfg.background_size, cfg.seed_for(stream::BACKGROUND));
    let names = saved.scaler.channels.clone();

    let jobs: Vec<(InstanceKind, usize)> = anomalies
        .iter()
        .map(|&i| (InstanceKind::Anomaly, i))
        .chain(normals.iter().map(|&i| (InstanceKind::Normal, i)))
        .collect();
    let mut explained: Vec<(InstanceKind, &VerdictRecord, Explanation)> = Vec::with_capacity(jobs.len());
    for (n, &(kind, i)) in jobs.iter().enumerate() {
        let rec = &records[i];
        let x = instance_at(&scaled, rec.origin_index, w).ok_or_else(|| {
            CliError::Runtime(format!("verdict origin {} does not fit {}; rerun detect", rec.origin_index, query_path.display()))
        })?;
        eprintln!("explaining {}/{}: window {}", n + 1, jobs.len(), rec.origin_index);
        let e = explain_instance(&saved.model, &saved.error_model, &x, &background, &ecfg, Some(&saved.scaler))
            .map_err(|e| CliError::Runtime(format!("window {}: {e}", rec.origin_index)))?;
        if !e.is_efficient() {
            return Err(CliError::Invariant(format!(
                "explanation of window {} violates efficiency: |b + sum(phi) - f(x)| = {:e} exceeds {:e}",
                rec.origin_index,
                e.efficiency_gap(),
                e.efficiency_tolerance()
            )));
        }
        explained.push((kind, rec, e));
    }

    let stage = StagedDir::new(&out.join(EXPLAIN_DIR))?;
    let mut entries = Vec::with_capacity(explained.len());
    for (kind, rec, e) in &explained {
        let force = force_data(e, &names);
        let stem = format!("{}_{:06}", if *kind == InstanceKind::Anomaly { "anomaly" } else { "normal" }, rec.origin_index);
        let doc = InstanceDoc {
            kind: *kind,
            origin_index: rec.origin_index,
            timestamp: rec.timestamp,
            distance: rec.distance,
            score: rec.score,
            explanation: e.to_document(&names),
            force: &force,
        };
        stage.write_json(&format!("{stem}.json"), &doc)?;
        stage.write(&format!("{stem}.svg"), render_force(&force, &cfg.style).map_err(render_err)?.as_bytes())?;
        entries.push(IndexEntry {
            kind: *kind,
            origin_index: rec.origin_index,
            score: rec.score,
            fx: e.fx,
            largest: force.largest().map(|s| s.name.clone()),
            json: format!("{stem}.json"),
            svg: format!("{stem}.svg"),
        });
    }

    let all: Vec<Explanation> = explained.iter().map(|(_, _, e)| e.clone()).collect();
    let set = ExplanationSet::new(names.clone(), &all).map_err(|e| CliError::Runtime(e.to_string()))?;
    let ranking = global_importance(&set).map_err(|e| CliError::Runtime(e.to_string()))?;
    stage.write_json(IMPORTANCE_FILE, &ranking)?;
    stage.write(BAR_FILE, render_bar(&ranking, &cfg.style).map_err(render_err)?.as_bytes())?;
    let swarm = beeswarm_data(&set).map_err(|e| CliError::Runtime(e.to_string()))?;
    stage.write_json("beeswarm.json", &swarm)?;
    stage.write(BEESWARM_FILE, render_beeswarm(&swarm, &cfg.style).map_err(render_err)?.as_bytes())?;

    let mut dependence = Vec::new();
    if set.len() >= 3 {
        for imp in ranking.iter().take(DEPENDENCE_PLOTS) {
            let data = dependence_data(&set, &imp.name).map_err(|e| CliError::Runtime(e.to_string()))?;
            let stem = format!("dependence_{}", safe_name(&imp.name));
            stage.write_json(&format!("{stem}.json"), &data)?;
            stage.write(&format!("{stem}.svg"), render_dependence(&data, &cfg.style).map_err(render_err)?.as_bytes())?;
            dependence.push(format!("{stem}.svg"));
        }
    } else {
        super::warn(format!("dependence plots need at least 3 explanations, have {}", set.len()));
    }

    let estimator = explained.first().map_or(String::new(), |(_, _, e)| e.estimator.to_string());
    let index = ExplainIndex {
        estimator,
        background_size: background.len(),
        instances: entries,
        bar: BAR_FILE.into(),
        beeswarm: BEESWARM_FILE.into(),
        dependence,
    };
    stage.write_json(INDEX_FILE, &index)?;
    stage.commit()?;

    println!(
        "explained {} flagged and {} normal windows with the {} estimator",
        anomalies.len(),
        normals.len(),
        index.estimator
    );
    println!("top features:");
    for imp in ranking.iter().take(3) {
        println!("  {:<28} {:.6}", imp.name, imp.mean_abs_phi);
    }
    println!("bottom features:");
    for imp in ranking.iter().rev().take(3).collect::<Vec<_>>().into_iter().rev() {
        println!("  {:<28} {:.6}", imp.name, imp.mean_abs_phi);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(origin: usize, score: f64, flagged: bool) -> VerdictRecord {
        VerdictRecord { origin_index: origin, timestamp: origin as f64, distance: score, score, is_anomaly: flagged }
    }

    fn sel(top_k: Option<usize>, all: bool, indices: Option<Vec<usize>>) -> SelectionArgs {
        SelectionArgs { top_k, all_anomalies: all, indices }
    }

    #[test]
    fn selection_modes() {
        let r = vec![rec(0, 0.9, true), rec(10, 0.2, false), rec(20, 0.95, true), rec(30, 0.6, true)];
        assert_eq!(select(&r, &sel(Some(2), false, None)).unwrap(), [2, 0]);
        assert_eq!(select(&r, &sel(None, true, None)).unwrap(), [0, 2, 3]);
        assert_eq!(select(&r, &sel(None, false, Some(vec![10, 30]))).unwrap(), [1, 3]);
        assert!(select(&r, &sel(None, false, Some(vec![5]))).is_err());
        assert_eq!(select(&r, &sel(None, false, None)).unwrap().len(), 3);
    }

    #[test]
    fn normal_sample_is_seeded_and_disjoint() {
        let r: Vec<_> = (0..50).map(|i| rec(i, 0.1, i % 7 == 0)).collect();
        let chosen = vec![0, 7, 14];
        let a = normal_sample(&r, &chosen, 3);
        assert_eq!(a, normal_sample(&r, &chosen, 3));
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|i| !r[*i].is_anomaly && !chosen.contains(i)));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(safe_name("Eng Temp/°F"), "Eng_Temp__F");
    }
}
