//! Run configuration: a TOML document with one table per pipeline stage.
//! Every key is optional; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use twinx::forecaster::{TcnArch, TrainConfig};
use twinx::render::ChartStyle;
use twinx::shapley::ExplainConfig;
use twinx::telemetry::{ChannelSchema, Injection, SynthConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; generation, initialization, shuffling and background
    /// sampling derive their seeds from it.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data: DataSection,
    pub generate: GenerateSection,
    pub window: WindowSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub anomaly: AnomalySection,
    pub shapley: ShapleySection,
    pub style: ChartStyle,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Training telemetry; also the background pool for explanations.
    pub train: Option<PathBuf>,
    /// Telemetry to score and explain; defaults to the training file.
    pub query: Option<PathBuf>,
    pub schema: Option<ChannelSchema>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub duration: usize,
    pub start_time: i64,
    pub noise: Option<Vec<f64>>,
    /// `channel:kind:start:length:magnitude` strings.
    pub injections: Vec<String>,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self { duration: 7200, start_time: SynthConfig::default().start_time, noise: None, injections: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub length: usize,
    /// Stride for training windows.
    pub stride: usize,
    /// Stride for scoring; defaults to the window length.
    pub score_stride: Option<usize>,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { length: 64, stride: 1, score_stride: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_channels: usize,
    pub kernel_size: usize,
    pub dilations: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let a = TcnArch::with_defaults(1);
        Self { hidden_channels: a.hidden_channels, kernel_size: a.kernel_size, dilations: a.dilations }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            validation_fraction: t.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySection {
    pub shrinkage: f64,
    pub quantile: f64,
}

impl Default for AnomalySection {
    fn default() -> Self {
        Self { shrinkage: 0.1, quantile: 0.99 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorChoice {
    /// Exact up to 15 features, kernel above.
    #[default]
    Auto,
    Exact,
    Kernel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapleySection {
    pub estimator: EstimatorChoice,
    pub background_size: usize,
    pub kernel_samples: usize,
}

impl Default for ShapleySection {
    fn default() -> Self {
        let e = ExplainConfig::default();
        Self { estimator: EstimatorChoice::Auto, background_size: e.background_size, kernel_samples: e.kernel_samples }
    }
}

/// Seed streams derived from the master seed.
pub mod stream {
    pub const GENERATE: u64 = 0;
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const BACKGROUND: u64 = 3;
    pub const KERNEL: u64 = 4;
    pub const NORMAL_SAMPLE: u64 = 5;
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn seed_for(&self, stream: u64) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("twinx-out"))
    }

    pub fn schema(&self) -> ChannelSchema {
        self.data.schema.clone().unwrap_or_default()
    }

    /// Where `generate` writes and later stages read by default.
    pub fn default_data_path(&self) -> PathBuf {
        self.out_dir().join("telemetry.csv")
    }

    pub fn train_data(&self) -> PathBuf {
        self.data.train.clone().unwrap_or_else(|| self.default_data_path())
    }

    pub fn query_data(&self) -> PathBuf {
        self.data.query.clone().unwrap_or_else(|| self.train_data())
    }

    pub fn score_stride(&self) -> usize {
        self.window.score_stride.unwrap_or(self.window.length)
    }

    pub fn arch(&self, channels: usize) -> TcnArch {
        TcnArch {
            input_channels: channels,
            hidden_channels: self.model.hidden_channels,
            kernel_size: self.model.kernel_size,
            dilations: self.model.dilations.clone(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            patience: self.train.patience,
            validation_fraction: self.train.validation_fraction,
            seed: self.seed_for(stream::SHUFFLE),
            ..TrainConfig::default()
        }
    }

    pub fn explain_config(&self) -> ExplainConfig {
        let exact_max_features = match self.shapley.estimator {
            EstimatorChoice::Auto => ExplainConfig::default().exact_max_features,
            EstimatorChoice::Exact => twinx::shapley::MAX_EXACT_FEATURES,
            EstimatorChoice::Kernel => 0,
        };
        ExplainConfig {
            exact_max_features,
            kernel_samples: self.shapley.kernel_samples,
            background_size: self.shapley.background_size,
            seed: self.seed_for(stream::KERNEL),
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig, CliError> {
        let injections = self
            .generate
            .injections
            .iter()
            .map(|s| s.parse::<Injection>().map_err(|e| CliError::Config(format!("injection {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let base = SynthConfig::default();
        let cfg = SynthConfig {
            duration_s: self.generate.duration,
            seed: self.seed_for(stream::GENERATE),
            start_time: self.generate.start_time,
            noise: self.generate.noise.clone().unwrap_or(base.noise),
            injections,
            schedule: base.schedule,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks the stage-independent ranges so bad values fail before any work.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(s) = &self.data.schema {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.window.length == 0 || self.window.stride == 0 || self.score_stride() == 0 {
            return bad("window length and strides must be positive".into());
        }
        let arch = self.arch(self.schema().len());
        arch.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if arch.receptive_field() > self.window.length {
            return bad(format!(
                "window length {} is shorter than the model receptive field {}",
                self.window.length,
                arch.receptive_field()
            ));
        }
        self.train_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        let a = &self.anomaly;
        if !(0.0..=1.0).contains(&a.shrinkage) {
            return bad(format!("anomaly.shrinkage must lie in [0, 1], got {}", a.shrinkage));
        }
        if !(a.quantile > 0.0 && a.quantile < 1.0) {
            return bad(format!("anomaly.quantile must lie in (0, 1), got {}", a.quantile));
        }
        if self.shapley.background_size == 0 {
            return bad("shapley.background_size must be positive".into());
        }
        if self.shapley.kernel_samples < 2 {
            return bad("shapley.kernel_samples must be at least 2".into());
        }
        self.style.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c.window.length, 64);
        assert_eq!(c.score_stride(), 64);
        assert_eq!(c.model.dilations, [1, 2, 4]);
        assert_eq!(c.train.epochs, 50);
        assert_eq!(c.anomaly.quantile, 0.99);
        assert_eq!(c.shapley.background_size, 100);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn sections_parse() {
        let c: RunConfig = toml::from_str(
            r##"
            seed = 9
            out_dir = "runs/a"
            [window]
            length = 32
            score_stride = 1
            [model]
            hidden_channels = 8
            [shapley]
            estimator = "kernel"
            [style]
            positive_color = "#aa0000"
            [generate]
            injections = ["FuelRate:spike:10:5:8"]
            "##,
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.out_dir(), PathBuf::from("runs/a"));
        assert_eq!(c.score_stride(), 1);
        assert_eq!(c.explain_config().exact_max_features, 0);
        assert_eq!(c.synth_config().unwrap().injections.len(), 1);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[window]\nlenght = 3").is_err());
        let mut c = RunConfig::default();
        c.window.length = 10;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = RunConfig::default();
        c.anomaly.quantile = 1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.style.negative_color = "blue".into();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.generate.injections.push("Nope:spike:1:1:1".into());
        assert!(c.synth_config().is_err());
    }

    #[test]
    fn seed_streams_differ() {
        let c = RunConfig { seed: 42, ..RunConfig::default() };
        assert_ne!(c.seed_for(stream::INIT), c.seed_for(stream::SHUFFLE));
        assert_eq!(c.seed_for(stream::INIT), RunConfig { seed: 42, ..RunConfig::default() }.seed_for(stream::INIT));
    }
}
