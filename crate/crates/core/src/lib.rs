//! Digital-twin anomaly explanation for multichannel vehicle telemetry.
//!
//! The pipeline forecasts the next telemetry row with a dilated causal
//! convolutional network, scores the forecast residual by its Mahalanobis
//! distance to the training residual distribution, and attributes each
//! score to the sensor channels with Shapley values. [`aggregate`] and
//! [`render`] turn attributions into bar, beeswarm, dependence and force
//! charts.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod aggregate;
pub mod anomaly;
pub mod forecaster;
pub mod linalg;
pub mod persist;
pub mod render;
mod scalar;
pub mod shapley;
pub mod telemetry;

pub use scalar::Scalar;

pub type Tcn = forecaster::TcnModel<f64>;
pub type Tcn32 = forecaster::TcnModel<f32>;
pub type Windows = telemetry::WindowedDataset<f64>;
pub type ErrorModel = anomaly::ErrorModel<f64>;
pub type Explanation = shapley::Explanation<f64>;
pub type Instance = shapley::Instance<f64>;
pub type SavedModel = persist::SavedModel<f64>;
