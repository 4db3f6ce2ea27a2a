use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_grads, ForecastError, TcnModel};
use crate::telemetry::WindowedDataset;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Trailing share of windows held out for validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::InvalidConfig(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("betas must lie in [0, 1) and epsilon be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
    pub best_validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Last epoch run (1-based); 0 when no epoch ran.
    pub final_epoch: usize,
    /// Epoch whose weights were returned; 0 means the initial weights.
    pub best_epoch: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0 }
    }

    fn update(&mut self, params: &mut [T], grads: &[T], cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let lr = T::of(cfg.learning_rate);
        let eps = T::of(cfg.epsilon);
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// A loss this many times above the initial validation loss (floored at
/// 1e-3) counts as divergence even while it is still finite.
pub const DIVERGENCE_RATIO: f64 = 1e8;

/// Mean squared one-step error of `model` over a dataset.
pub fn dataset_mse<T: Scalar>(model: &TcnModel<T>, data: &WindowedDataset<T>) -> Result<T, ForecastError> {
    let mut sse = T::zero();
    for i in 0..data.len() {
        let y = model.forward(data.window(i))?;
        for (p, t) in y.iter().zip(data.target(i)) {
            sse += (*p - *t) * (*p - *t);
        }
    }
    Ok(sse / T::of_usize(data.len().max(1) * data.channels))
}

/// Mini-batch Adam on the leading windows, early-stopped on the trailing
/// validation share. Returns the best-validation weights.
///
/// Fails with [`ForecastError::Diverged`] when a loss turns non-finite or
/// exceeds [`DIVERGENCE_RATIO`] times the initial validation loss.
pub fn train<T: Scalar>(
    model: &TcnModel<T>,
    dataset: &WindowedDataset<T>,
    cfg: &TrainConfig,
) -> Result<(TcnModel<T>, TrainReport), ForecastError> {
    cfg.validate()?;
    let mut report = TrainReport { epochs: Vec::new(), final_epoch: 0, best_epoch: 0, seed: cfg.seed, config: cfg.clone() };
    if cfg.epochs == 0 {
        return Ok((model.clone(), report));
    }
    if dataset.len() < cfg.batch_size {
        return Err(ForecastError::TooFewWindows { got: dataset.len(), need: cfg.batch_size });
    }
    if dataset.channels != model.channels() {
        return Err(ForecastError::Shape(format!(
            "dataset has {} channels, model expects {}",
            dataset.channels,
            model.channels()
        )));
    }
    let (train_set, mut val_set) = dataset.split_chronological(1.0 - cfg.validation_fraction);
    if val_set.is_empty() {
        val_set = train_set.clone();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    let mut params = current.flat();
    let mut adam = Adam::new(params.len());
    let mut best = model.clone();
    let mut best_val = dataset_mse(model, &val_set)?.as_f64();
    if !best_val.is_finite() {
        return Err(ForecastError::Diverged { epoch: 0 });
    }
    let blow_up = DIVERGENCE_RATIO * best_val.max(1e-3);
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[T], &[T])> = chunk.iter().map(|&i| (train_set.window(i), train_set.target(i))).collect();
            let (loss, grads) = loss_and_grads(&current, &batch)?;
            if !loss.is_finite() || loss.as_f64() > blow_up {
                return Err(ForecastError::Diverged { epoch });
            }
            weighted += loss.as_f64() * chunk.len() as f64;
            adam.update(&mut params, &grads.flat(), cfg);
            current.set_flat(&params)?;
        }
        if !current.is_finite() {
            return Err(ForecastError::Diverged { epoch });
        }
        let val = dataset_mse(&current, &val_set)?.as_f64();
        if !val.is_finite() || val > blow_up {
            return Err(ForecastError::Diverged { epoch });
        }
        if val < best_val {
            best_val = val;
            best = current.clone();
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        report.epochs.push(EpochRecord {
            epoch,
            train_mse: weighted / train_set.len() as f64,
            validation_mse: val,
            best_validation_mse: best_val,
        });
        report.final_epoch = epoch;
        if stale >= cfg.patience.max(1) {
            break;
        }
    }
    Ok((best, report))
}
