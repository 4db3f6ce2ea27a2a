//! Exit codes and artifact behaviour of the `twinx` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const CONFIG: &str = r#"
seed = 5
[generate]
duration = 1500
injections = ["EngCoolantTemp:spike:700:5:8", "FuelRate:drift:1100:200:4"]
[window]
length = 16
score_stride = 1
[model]
hidden_channels = 6
kernel_size = 2
dilations = [1, 2]
[train]
epochs = 2
[shapley]
background_size = 3
"#;

fn twinx(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinx"))
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Run {
    _dir: tempfile::TempDir,
    config: PathBuf,
    out: PathBuf,
}

/// One generated, trained and scored run shared by the tests below; tests
/// that damage artifacts work on a copy.
fn run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.toml");
        std::fs::write(&config, CONFIG).unwrap();
        let out = dir.path().join("out");
        for step in [&["generate"][..], &["train"], &["detect"]] {
            let o = twinx(&config, &out, step);
            assert!(o.status.success(), "{step:?}: {}", stderr(&o));
        }
        Run { _dir: dir, config, out }
    })
}

fn copy_run(to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(&run().out).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            std::fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
        }
    }
}

#[test]
fn generate_refuses_to_overwrite_without_force() {
    let r = run();
    let before = std::fs::read(r.out.join("telemetry.csv")).unwrap();
    let o = twinx(&r.config, &r.out, &["generate"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("--force"));
    assert_eq!(std::fs::read(r.out.join("telemetry.csv")).unwrap(), before);

    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("t.csv");
    std::fs::write(&target, "old").unwrap();
    let o = twinx(&r.config, tmp.path(), &["generate", "--out", target.to_str().unwrap(), "--force"]);
    assert!(o.status.success());
    // same seed, same bytes
    assert_eq!(std::fs::read(&target).unwrap(), before);
}

#[test]
fn config_problems_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[window]\nlenght = 8\n").unwrap();
    assert_eq!(code(&twinx(&bad, tmp.path(), &["generate"])), 2);

    std::fs::write(&bad, "[window]\nlength = 4\n").unwrap();
    let o = twinx(&bad, tmp.path(), &["generate"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("receptive field"));

    let o = twinx(&run().config, tmp.path(), &["train", "--data", "nowhere.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nowhere.csv"));

    let o = twinx(&run().config, tmp.path(), &["generate", "--inject", "Nope:spike:1:1:1"]);
    assert_eq!(code(&o), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_twinx"))
        .env("TWINX_THREADS", "0")
        .args(["--out-dir", tmp.path().to_str().unwrap(), "generate", "--duration", "100"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupted_model_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let model = tmp.path().join("model.json");
    let text = std::fs::read_to_string(&model).unwrap();
    std::fs::write(&model, &text[..text.len() / 2]).unwrap();
    let o = twinx(&run().config, tmp.path(), &["detect", "--data", run().out.join("telemetry.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("model.json"));
}

#[test]
fn header_only_query_gives_zero_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let header = std::fs::read_to_string(run().out.join("telemetry.csv")).unwrap().lines().next().unwrap().to_string();
    let query = tmp.path().join("empty.csv");
    std::fs::write(&query, format!("{header}\n")).unwrap();
    let o = twinx(&run().config, tmp.path(), &["detect", "--data", query.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("detection_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["count"], 0);
    let verdicts = std::fs::read_to_string(tmp.path().join("verdicts.csv")).unwrap();
    assert_eq!(verdicts.lines().count(), 1);
}

#[test]
fn detection_flags_the_injected_spike() {
    let text = std::fs::read_to_string(run().out.join("verdicts.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (origin, flag) = (col("origin_index"), col("is_anomaly"));
    let flagged: Vec<usize> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[flag] == "1")
        .map(|f| f[origin].parse().unwrap())
        .collect();
    // the window whose target is row 700 starts at 684
    assert!(flagged.iter().any(|&o| (684..=688).contains(&o)), "flagged origins {flagged:?}");
}

#[test]
fn explain_top_five_writes_ten_force_plots_and_report_links_them() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let data = run().out.join("telemetry.csv");
    let o = twinx(&run().config, tmp.path(), &["explain", "--data", data.to_str().unwrap(), "--top-k", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ex = tmp.path().join("explain");
    let names: Vec<String> =
        std::fs::read_dir(&ex).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    let count = |prefix: &str, ext: &str| names.iter().filter(|n| n.starts_with(prefix) && n.ends_with(ext)).count();
    assert_eq!(count("anomaly_", ".svg"), 5);
    assert_eq!(count("normal_", ".svg"), 5);
    assert_eq!(count("anomaly_", ".json"), 5);
    assert_eq!(count("dependence_", ".svg"), 3);
    for f in ["bar.svg", "beeswarm.svg", "importance.json", "beeswarm.json", "index.json"] {
        assert!(names.iter().any(|n| n == f), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("EngCoolantTemp") || stdout.contains("FuelRate"));

    let o = twinx(&run().config, tmp.path(), &["report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(tmp.path().join("report.md")).unwrap();
    for n in names.iter().filter(|n| n.ends_with(".svg")) {
        assert!(report.contains(n.as_str()), "report does not reference {n}");
    }

    std::fs::remove_file(ex.join("beeswarm.svg")).unwrap();
    let o = twinx(&run().config, tmp.path(), &["report"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("beeswarm.svg"));
}

#[test]
fn explain_rejects_unknown_window_and_conflicting_selection() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let o = twinx(&run().config, tmp.path(), &["explain", "--indices", "999999"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!tmp.path().join("explain").exists());
    let o = twinx(&run().config, tmp.path(), &["explain", "--top-k", "2", "--all-anomalies"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_without_explanations_names_the_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    copy_run(tmp.path());
    let o = twinx(&run().config, tmp.path(), &["report"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("index.json"), "{}", stderr(&o));
}
