use serde::{Deserialize, Serialize};

use super::{exact_shapley, kernel_shap, Background, Explanation, Features, Instance, ShapleyError};
use crate::anomaly::{AnomalyError, ErrorModel};
use crate::forecaster::TcnModel;
use crate::telemetry::ScalerParams;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Use exact enumeration up to this many features, kernel sampling above.
    pub exact_max_features: usize,
    pub kernel_samples: usize,
    pub background_size: usize,
    pub seed: u64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { exact_max_features: 15, kernel_samples: 2048, background_size: 100, seed: 0 }
    }
}

/// The anomaly score of a forecast query as a plain function of the query.
///
/// Instances must already be cut to the model's receptive field (see
/// [`ScoreFunction::prepare`]).
pub struct ScoreFunction<'a, T> {
    model: &'a TcnModel<T>,
    error_model: &'a ErrorModel<T>,
}

impl<'a, T: Scalar> ScoreFunction<'a, T> {
    pub fn new(model: &'a TcnModel<T>, error_model: &'a ErrorModel<T>) -> Result<Self, AnomalyError> {
        if error_model.dim() != model.channels() {
            return Err(AnomalyError::DimensionMismatch { expected: model.channels(), got: error_model.dim() });
        }
        Ok(Self { model, error_model })
    }

    /// Validates shape and keeps only the receptive-field rows the
    /// forecaster reads.
    pub fn prepare(&self, x: &Instance<T>) -> Result<Instance<T>, AnomalyError> {
        let tail = self.model.window_tail(&x.window)?;
        if x.target.len() != self.model.channels() {
            return Err(AnomalyError::DimensionMismatch { expected: self.model.channels(), got: x.target.len() });
        }
        Ok(Instance { window: tail.to_vec(), target: x.target.clone() })
    }

    pub fn score(&self, x: &Instance<T>) -> T {
        let y = self.model.predict_tail(&x.window);
        let residual: Vec<T> = x.target.iter().zip(y).map(|(&t, p)| t - p).collect();
        let d = crate::anomaly::mahalanobis(&residual, self.error_model).expect("dimension checked at construction");
        self.error_model.score(d)
    }
}

/// Explains the anomaly score of one `(window, target)` query.
///
/// Dispatches to exact enumeration when the channel count is at most
/// `config.exact_max_features`, kernel sampling otherwise. Feature
/// summaries are the channel means of the window, unscaled when a scaler
/// is given.
pub fn explain_instance<T: Scalar>(
    model: &TcnModel<T>,
    error_model: &ErrorModel<T>,
    x: &Instance<T>,
    bg: &Background<Instance<T>>,
    config: &ExplainConfig,
    scaler: Option<&ScalerParams>,
) -> Result<Explanation<T>, ShapleyError> {
    let score = ScoreFunction::new(model, error_model)?;
    let xt = score.prepare(x)?;
    let bgt = Background::new(bg.items.iter().map(|b| score.prepare(b)).collect::<Result<Vec<_>, _>>()?);
    let f = |i: &Instance<T>| score.score(i);
    let mut e = if xt.feature_count() <= config.exact_max_features {
        exact_shapley(&f, &xt, &bgt)?
    } else {
        kernel_shap(&f, &xt, &bgt, config.kernel_samples, config.seed)?
    };
    e.feature_summaries = x
        .column_means()
        .into_iter()
        .enumerate()
        .map(|(c, m)| match scaler {
            Some(s) => T::of(s.unscale_value(c, m.as_f64())),
            None => m,
        })
        .collect();
    Ok(e)
}
