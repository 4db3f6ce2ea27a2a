//! Mahalanobis scoring of forecast residuals.
//!
//! The error model is the mean and shrunk covariance of the training
//! residuals plus a distance threshold `τ` taken as an empirical quantile
//! of the training distances. A query residual is scored by its distance
//! `D` and squashed to `s = D² / (D² + τ²)`, so `s > 0.5` exactly when
//! `D > τ`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forecaster::{ForecastError, TcnModel};
use crate::linalg;
use crate::telemetry::WindowedDataset;
use crate::Scalar;

/// Diagonal ridge added after shrinkage.
pub const RIDGE: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnomalyError {
    #[error("need at least {need} residuals, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("covariance is not positive definite after shrinkage")]
    Singular,
    #[error("training residuals carry no signal (threshold would be zero)")]
    TooFewSignal,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel<T> {
    pub mean: Vec<T>,
    /// Row-major `d × d`, after shrinkage and ridge.
    pub covariance: Vec<T>,
    pub precision: Vec<T>,
    /// Distance threshold `τ`.
    pub threshold: T,
    pub shrinkage: f64,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict<T> {
    pub distance: T,
    pub score: T,
    pub is_anomaly: bool,
    pub residual: Vec<T>,
}

impl<T: Scalar> ErrorModel<T> {
    /// Fits mean, covariance `(1−λ)·S + λ·diag(S) + ridge·I` and the
    /// `q`-quantile distance threshold from `n × d` row-major residuals.
    pub fn fit_residuals(residuals: &[T], dim: usize, shrinkage: f64, quantile: f64) -> Result<Self, AnomalyError> {
        if !(0.0..=1.0).contains(&shrinkage) {
            return Err(AnomalyError::InvalidParameter(format!("shrinkage {shrinkage} outside [0, 1]")));
        }
        if !(quantile > 0.0 && quantile < 1.0) {
            return Err(AnomalyError::InvalidParameter(format!("quantile {quantile} outside (0, 1)")));
        }
        if dim == 0 || !residuals.len().is_multiple_of(dim) {
            return Err(AnomalyError::DimensionMismatch { expected: dim, got: residuals.len() });
        }
        let n = residuals.len() / dim;
        if n < dim + 1 {
            return Err(AnomalyError::TooFewSamples { got: n, need: dim + 1 });
        }

        let mut mean = vec![T::zero(); dim];
        for row in residuals.chunks(dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv_n = T::one() / T::of_usize(n);
        mean.iter_mut().for_each(|m| *m *= inv_n);

        let mut cov = vec![T::zero(); dim * dim];
        let mut centred = vec![T::zero(); dim];
        for row in residuals.chunks(dim) {
            for c in 0..dim {
                centred[c] = row[c] - mean[c];
            }
            for i in 0..dim {
                for j in 0..=i {
                    cov[i * dim + j] += centred[i] * centred[j];
                }
            }
        }
        let inv_dof = T::one() / T::of_usize(n - 1);
        let keep = T::of(1.0 - shrinkage);
        for i in 0..dim {
            for j in 0..=i {
                let s = cov[i * dim + j] * inv_dof;
                let v = if i == j { s } else { keep * s };
                cov[i * dim + j] = v;
                cov[j * dim + i] = v;
            }
        }
        if cov.iter().all(|v| *v == T::zero()) {
            return Err(AnomalyError::TooFewSignal);
        }
        for i in 0..dim {
            cov[i * dim + i] += T::of(RIDGE);
        }

        let mut model = Self::from_parts(mean, cov, T::one())?;
        model.shrinkage = shrinkage;
        model.quantile = quantile;
        let mut distances: Vec<T> = residuals
            .chunks(dim)
            .map(|e| model.distance_unchecked(e))
            .collect();
        distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let rank = ((quantile * n as f64).ceil() as usize).clamp(1, n) - 1;
        model.threshold = distances[rank];
        if !(model.threshold > T::zero()) {
            return Err(AnomalyError::TooFewSignal);
        }
        Ok(model)
    }

    /// Builds a model from a mean, a covariance and a threshold.
    pub fn from_parts(mean: Vec<T>, covariance: Vec<T>, threshold: T) -> Result<Self, AnomalyError> {
        let d = mean.len();
        if covariance.len() != d * d {
            return Err(AnomalyError::DimensionMismatch { expected: d * d, got: covariance.len() });
        }
        let precision = linalg::spd_inverse(&covariance, d).ok_or(AnomalyError::Singular)?;
        Ok(Self { mean, covariance, precision, threshold, shrinkage: 0.0, quantile: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn distance_unchecked(&self, e: &[T]) -> T {
        let centred: Vec<T> = e.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        linalg::quad_form(&self.precision, self.dim(), &centred).max(T::zero()).sqrt()
    }

    /// Maps a distance to `D² / (D² + τ²)`.
    pub fn score(&self, distance: T) -> T {
        let d2 = distance * distance;
        d2 / (d2 + self.threshold * self.threshold)
    }

    pub fn verdict(&self, residual: Vec<T>) -> Result<AnomalyVerdict<T>, AnomalyError> {
        let distance = mahalanobis(&residual, self)?;
        Ok(AnomalyVerdict { distance, score: self.score(distance), is_anomaly: distance > self.threshold, residual })
    }
}

/// `sqrt((e − μ)ᵀ Σ⁻¹ (e − μ))`.
pub fn mahalanobis<T: Scalar>(e: &[T], model: &ErrorModel<T>) -> Result<T, AnomalyError> {
    if e.len() != model.dim() {
        return Err(AnomalyError::DimensionMismatch { expected: model.dim(), got: e.len() });
    }
    Ok(model.distance_unchecked(e))
}

/// `target − forecast(window)` for every window.
pub fn residuals<T: Scalar>(model: &TcnModel<T>, data: &WindowedDataset<T>) -> Result<Vec<T>, AnomalyError> {
    let rows: Vec<Vec<T>> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let y = model.forward(data.window(i))?;
            Ok(data.target(i).iter().zip(y).map(|(&t, p)| t - p).collect())
        })
        .collect::<Result<_, ForecastError>>()?;
    Ok(rows.concat())
}

/// Fits the error model on the forecaster's residuals over `train`.
pub fn fit_error_model<T: Scalar>(
    model: &TcnModel<T>,
    train: &WindowedDataset<T>,
    shrinkage: f64,
    quantile: f64,
) -> Result<ErrorModel<T>, AnomalyError> {
    let d = model.channels();
    if train.len() < d + 1 {
        return Err(AnomalyError::TooFewSamples { got: train.len(), need: d + 1 });
    }
    ErrorModel::fit_residuals(&residuals(model, train)?, d, shrinkage, quantile)
}

pub fn score_window<T: Scalar>(
    model: &TcnModel<T>,
    error_model: &ErrorModel<T>,
    window: &[T],
    target: &[T],
) -> Result<AnomalyVerdict<T>, AnomalyError> {
    if target.len() != error_model.dim() {
        return Err(AnomalyError::DimensionMismatch { expected: error_model.dim(), got: target.len() });
    }
    let y = model.forward(window)?;
    error_model.verdict(target.iter().zip(y).map(|(&t, p)| t - p).collect())
}

/// Scores every window of a dataset, in order.
pub fn score_dataset<T: Scalar>(
    model: &TcnModel<T>,
    error_model: &ErrorModel<T>,
    data: &WindowedDataset<T>,
) -> Result<Vec<AnomalyVerdict<T>>, AnomalyError> {
    (0..data.len())
        .into_par_iter()
        .map(|i| score_window(model, error_model, data.window(i), data.target(i)))
        .collect()
}

/// One exported verdict row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub origin_index: usize,
    pub timestamp: f64,
    pub distance: f64,
    pub score: f64,
    pub is_anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub count: usize,
    pub flagged: usize,
    pub flag_rate: f64,
    pub threshold: f64,
    pub quantile: f64,
}

impl DetectionSummary {
    pub fn from_records(records: &[VerdictRecord], threshold: f64, quantile: f64) -> Self {
        let flagged = records.iter().filter(|r| r.is_anomaly).count();
        let flag_rate = if records.is_empty() { 0.0 } else { flagged as f64 / records.len() as f64 };
        Self { count: records.len(), flagged, flag_rate, threshold, quantile }
    }
}

/// Writes `origin_index,timestamp,distance,score,is_anomaly` rows.
pub fn write_verdicts_csv<W: Write>(records: &[VerdictRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["origin_index", "timestamp", "distance", "score", "is_anomaly"])?;
    for r in records {
        w.write_record([
            r.origin_index.to_string(),
            r.timestamp.to_string(),
            r.distance.to_string(),
            r.score.to_string(),
            if r.is_anomaly { "1".into() } else { "0".into() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_verdicts_csv(path: impl AsRef<std::path::Path>) -> csv::Result<Vec<VerdictRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().unwrap_or(f64::NAN);
        out.push(VerdictRecord {
            origin_index: field(0).parse().unwrap_or(usize::MAX),
            timestamp: num(1),
            distance: num(2),
            score: num(3),
            is_anomaly: field(4) == "1",
        });
    }
    Ok(out)
}
