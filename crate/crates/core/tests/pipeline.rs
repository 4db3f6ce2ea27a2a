//! Library-level pipeline: synthesize, train, score, explain, aggregate,
//! render and persist, all on a small model.

use twinx::aggregate::{beeswarm_data, dependence_data, force_data, global_importance, ExplanationSet};
use twinx::anomaly::{fit_error_model, score_dataset};
use twinx::forecaster::{train, TcnArch, TcnModel, TrainConfig};
use twinx::render::{render_bar, render_beeswarm, render_dependence, render_force, ChartStyle};
use twinx::shapley::{explain_instance, Background, ExplainConfig, Instance};
use twinx::telemetry::{make_windows, synth_generate, ChannelSchema, ScalerParams, SynthConfig};
use twinx::SavedModel;

fn small_arch() -> TcnArch {
    TcnArch { input_channels: 15, hidden_channels: 6, kernel_size: 2, dilations: vec![1, 2] }
}

#[test]
fn train_score_explain_render_persist() {
    let frame = synth_generate(&SynthConfig { duration_s: 900, seed: 21, ..SynthConfig::default() }).unwrap();
    let scaler = ScalerParams::fit(&frame);
    let data = make_windows::<f64>(&scaler.apply(&frame).unwrap(), 16, 1);
    let cfg = TrainConfig { epochs: 3, seed: 2, ..TrainConfig::default() };
    let (model, report) = train(&TcnModel::init(&small_arch(), 9).unwrap(), &data, &cfg).unwrap();
    assert_eq!(report.final_epoch, 3);
    let em = fit_error_model(&model, &data, 0.1, 0.99).unwrap();

    let verdicts = score_dataset(&model, &em, &data).unwrap();
    assert_eq!(verdicts.len(), data.len());
    let flagged = verdicts.iter().filter(|v| v.is_anomaly).count();
    assert!(flagged > 0 && flagged * 20 < data.len(), "{flagged} of {} flagged", data.len());

    // a handful of explanations with a small background
    let bg = Background::sample(&data, 3, 4);
    let ex_cfg = ExplainConfig { background_size: 3, ..ExplainConfig::default() };
    let names = ChannelSchema::default().names();
    let picks = [40usize, 200, 400, 600];
    let explanations: Vec<_> = picks
        .iter()
        .map(|&i| explain_instance(&model, &em, &Instance::from_dataset(&data, i), &bg, &ex_cfg, Some(&scaler)).unwrap())
        .collect();
    for (e, &i) in explanations.iter().zip(&picks) {
        assert!(e.is_efficient());
        assert!((e.fx - verdicts[i].score).abs() < 1e-12);
        // summaries are raw-unit channel means
        let raw_mean: f64 = (0..16).map(|r| frame.row(i + r)[0]).sum::<f64>() / 16.0;
        assert!((e.feature_summaries[0] - raw_mean).abs() < 1e-9);
    }

    let set = ExplanationSet::new(names.clone(), &explanations).unwrap();
    let style = ChartStyle::default();
    let ranking = global_importance(&set).unwrap();
    let svgs = [
        render_bar(&ranking, &style).unwrap(),
        render_beeswarm(&beeswarm_data(&set).unwrap(), &style).unwrap(),
        render_dependence(&dependence_data(&set, &ranking[0].name).unwrap(), &style).unwrap(),
        render_force(&force_data(&explanations[0], &names), &style).unwrap(),
    ];
    for svg in &svgs {
        let doc = roxmltree::Document::parse(svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
    }

    let saved = SavedModel { model, window_length: 16, scaler, error_model: em, training_seed: cfg.seed };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, saved.to_json()).unwrap();
    let loaded = SavedModel::load(&path).unwrap();
    let again = score_dataset(&loaded.model, &loaded.error_model, &data).unwrap();
    for (a, b) in verdicts.iter().zip(&again) {
        assert_eq!(a.score.to_bits(), b.score.to_bits());
    }
}

#[test]
fn single_precision_pipeline_agrees_with_double() {
    let frame = synth_generate(&SynthConfig { duration_s: 300, seed: 5, ..SynthConfig::default() }).unwrap();
    let scaler = ScalerParams::fit(&frame);
    let scaled = scaler.apply(&frame).unwrap();
    let wide = make_windows::<f64>(&scaled, 16, 4);
    let narrow = make_windows::<f32>(&scaled, 16, 4);
    let model = TcnModel::<f64>::init(&small_arch(), 3).unwrap();
    let em = fit_error_model(&model, &wide, 0.1, 0.99).unwrap();
    let em32 = fit_error_model(&model.cast::<f32>(), &narrow, 0.1, 0.99).unwrap();
    let a = score_dataset(&model, &em, &wide).unwrap();
    let b = score_dataset(&model.cast::<f32>(), &em32, &narrow).unwrap();
    let agree = a.iter().zip(&b).filter(|(x, y)| x.is_anomaly == y.is_anomaly).count();
    assert!(agree * 100 >= a.len() * 95, "{agree} of {} verdicts agree", a.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x.distance - y.distance as f64).abs() < 1e-2 * (1.0 + x.distance));
    }
}
