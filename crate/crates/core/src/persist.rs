//! Versioned JSON model files.
//!
//! A file holds the architecture, the window length, the scaler, the error
//! model and every weight tensor by name, shape and flattened values.
//! Tensors appear in the order of [`TcnModel::for_each_tensor`]. Values are
//! written as `f64` and survive a save/load cycle bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anomaly::ErrorModel;
use crate::forecaster::{TcnArch, TcnModel};
use crate::telemetry::ScalerParams;
use crate::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("unsupported model format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("model file schema error: {0}")]
    Schema(String),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDoc {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelDoc {
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub covariance: Vec<f64>,
    pub precision: Vec<f64>,
    pub threshold: f64,
    pub shrinkage: f64,
    pub quantile: f64,
}

/// On-disk layout; field order is the key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub format_version: u32,
    pub arch: TcnArch,
    pub window_length: usize,
    pub scaler: ScalerParams,
    pub error_model: ErrorModelDoc,
    pub tensors: Vec<TensorDoc>,
    pub training_seed: u64,
}

/// Everything needed to score and explain new telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel<T> {
    pub model: TcnModel<T>,
    pub window_length: usize,
    pub scaler: ScalerParams,
    pub error_model: ErrorModel<T>,
    pub training_seed: u64,
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::of(x)).collect()
}

fn schema(msg: impl Into<String>) -> PersistError {
    PersistError::Schema(msg.into())
}

impl<T: Scalar> SavedModel<T> {
    pub fn to_doc(&self) -> ModelDoc {
        let mut tensors = Vec::new();
        self.model.for_each_tensor(|name, shape, values| tensors.push(TensorDoc { name, shape, values: to_f64(values) }));
        let em = &self.error_model;
        ModelDoc {
            format_version: FORMAT_VERSION,
            arch: self.model.arch.clone(),
            window_length: self.window_length,
            scaler: self.scaler.clone(),
            error_model: ErrorModelDoc {
                mean: to_f64(&em.mean),
                covariance: to_f64(&em.covariance),
                precision: to_f64(&em.precision),
                threshold: em.threshold.as_f64(),
                shrinkage: em.shrinkage,
                quantile: em.quantile,
            },
            tensors,
            training_seed: self.training_seed,
        }
    }

    /// Validates a document against its own architecture and rebuilds the model.
    pub fn from_doc(doc: &ModelDoc) -> Result<Self, PersistError> {
        if doc.format_version != FORMAT_VERSION {
            return Err(PersistError::UnsupportedVersion(doc.format_version));
        }
        let arch = &doc.arch;
        arch.validate().map_err(|e| schema(e.to_string()))?;
        let d = arch.output_channels();
        if doc.window_length < arch.receptive_field() {
            return Err(schema(format!(
                "window_length {} is shorter than the receptive field {}",
                doc.window_length,
                arch.receptive_field()
            )));
        }
        let s = &doc.scaler;
        if s.channels.len() != d || s.min.len() != d || s.max.len() != d {
            return Err(schema(format!("scaler describes {} channels, model has {d}", s.channels.len())));
        }
        if s.min.iter().chain(&s.max).any(|v| !v.is_finite()) || s.min.iter().zip(&s.max).any(|(lo, hi)| hi < lo) {
            return Err(schema("scaler bounds must be finite with max >= min"));
        }

        let mut model = TcnModel::<T>::zeros(arch).map_err(|e| schema(e.to_string()))?;
        let mut expected = Vec::new();
        model.for_each_tensor(|name, shape, _| expected.push((name, shape)));
        if expected.len() != doc.tensors.len() {
            return Err(schema(format!("expected {} tensors, found {}", expected.len(), doc.tensors.len())));
        }
        let mut flat = Vec::with_capacity(model.param_count());
        for ((name, shape), t) in expected.iter().zip(&doc.tensors) {
            if &t.name != name {
                return Err(schema(format!("expected tensor {name}, found {}", t.name)));
            }
            if &t.shape != shape {
                return Err(schema(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
            if t.values.len() != shape.iter().product::<usize>() {
                return Err(schema(format!("tensor {name} holds {} values for shape {shape:?}", t.values.len())));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(schema(format!("tensor {name} has non-finite values")));
            }
            flat.extend(from_f64::<T>(&t.values));
        }
        model.set_flat(&flat).map_err(|e| schema(e.to_string()))?;

        let e = &doc.error_model;
        if e.mean.len() != d || e.covariance.len() != d * d || e.precision.len() != d * d {
            return Err(schema(format!("error model dimensions do not match {d} channels")));
        }
        let finite = e.mean.iter().chain(&e.covariance).chain(&e.precision).all(|v| v.is_finite());
        if !finite || !(e.threshold.is_finite() && e.threshold > 0.0) {
            return Err(schema("error model must be finite with a positive threshold"));
        }
        let error_model = ErrorModel {
            mean: from_f64(&e.mean),
            covariance: from_f64(&e.covariance),
            precision: from_f64(&e.precision),
            threshold: T::of(e.threshold),
            shrinkage: e.shrinkage,
            quantile: e.quantile,
        };
        Ok(Self {
            model,
            window_length: doc.window_length,
            scaler: doc.scaler.clone(),
            error_model,
            training_seed: doc.training_seed,
        })
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("model documents always serialize");
        s.push('\n');
        s
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<(), PersistError> {
        writer.write_all(self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, PersistError> {
        let doc: ModelDoc = serde_json::from_reader(reader)?;
        Self::from_doc(&doc)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PersistError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
