//! Model-agnostic Shapley attribution.
//!
//! The value of a coalition `S` is interventional: features in `S` keep the
//! explained instance's values, the rest are taken from each background
//! item in turn, and the black-box output is averaged over the background.
//! [`exact_shapley`] enumerates every coalition; [`kernel_shap`] fits the
//! kernel-weighted linear regression over sampled coalitions.

mod exact;
mod explain;
mod kernel;

pub use exact::exact_shapley;
pub use explain::{explain_instance, ExplainConfig, ScoreFunction};
pub use kernel::{kernel_shap, kernel_weight};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyError;
use crate::telemetry::WindowedDataset;
use crate::Scalar;

/// Largest feature count [`exact_shapley`] accepts.
pub const MAX_EXACT_FEATURES: usize = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ShapleyError {
    #[error("{got} features exceeds the limit of {max}")]
    TooManyFeatures { got: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("background item does not match the explained instance's shape")]
    ShapeMismatch,
    #[error("need at least {need} coalition samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("kernel regression system is singular")]
    DegenerateSystem,
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
}

/// Set of feature indices as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(m: usize) -> Self {
        if m >= 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << m) - 1)
        }
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | 1 << i)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self, m: usize) -> Self {
        Coalition(!self.0 & Self::full(m).0)
    }
}

/// Something whose features can be swapped in from a reference item.
pub trait Features: Clone + Send + Sync {
    fn feature_count(&self) -> usize;

    /// Overwrites `out` with `self` on the coalition's features and with
    /// `other` everywhere else.
    fn blend_into(&self, other: &Self, coalition: Coalition, out: &mut Self);

    fn shape_matches(&self, other: &Self) -> bool {
        self.feature_count() == other.feature_count()
    }
}

impl<T: Scalar> Features for Vec<T> {
    fn feature_count(&self) -> usize {
        self.len()
    }

    fn blend_into(&self, other: &Self, coalition: Coalition, out: &mut Self) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = if coalition.contains(i) { self[i] } else { other[i] };
        }
    }
}

/// A forecast query: the input window and the observed next row. One
/// feature per channel covers the whole window column plus the target entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    /// `rows × channels`, row-major.
    pub window: Vec<T>,
    pub target: Vec<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(window: Vec<T>, target: Vec<T>) -> Self {
        Self { window, target }
    }

    pub fn from_dataset(data: &WindowedDataset<T>, i: usize) -> Self {
        Self { window: data.window(i).to_vec(), target: data.target(i).to_vec() }
    }

    pub fn channels(&self) -> usize {
        self.target.len()
    }

    pub fn rows(&self) -> usize {
        self.window.len() / self.channels().max(1)
    }

    /// Keeps only the last `rows` window rows.
    pub fn tail(&self, rows: usize) -> Self {
        let d = self.channels();
        let keep = rows.min(self.rows());
        Self { window: self.window[(self.rows() - keep) * d..].to_vec(), target: self.target.clone() }
    }

    /// Mean of each channel's window column.
    pub fn column_means(&self) -> Vec<T> {
        let d = self.channels();
        let mut m = vec![T::zero(); d];
        for row in self.window.chunks(d) {
            for (a, &v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = T::of_usize(self.rows().max(1));
        m.into_iter().map(|v| v / n).collect()
    }
}

impl<T: Scalar> Features for Instance<T> {
    fn feature_count(&self) -> usize {
        self.channels()
    }

    fn blend_into(&self, other: &Self, coalition: Coalition, out: &mut Self) {
        let d = self.channels();
        let pick: Vec<bool> = (0..d).map(|c| coalition.contains(c)).collect();
        for ((o, (&a, &b)), k) in out.window.iter_mut().zip(self.window.iter().zip(&other.window)).zip(0..) {
            *o = if pick[k % d] { a } else { b };
        }
        for (c, o) in out.target.iter_mut().enumerate() {
            *o = if pick[c] { self.target[c] } else { other.target[c] };
        }
    }

    fn shape_matches(&self, other: &Self) -> bool {
        self.window.len() == other.window.len() && self.target.len() == other.target.len()
    }
}

/// Reference items that masked features are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Background<I> {
    pub items: Vec<I>,
}

impl<I> Background<I> {
    pub fn new(items: Vec<I>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

impl<T: Scalar> Background<Instance<T>> {
    /// Draws `size` windows uniformly without replacement (all of them if
    /// the dataset is smaller), deterministically in `seed`.
    pub fn sample(data: &WindowedDataset<T>, size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let take = size.min(data.len());
        let mut picks = index::sample(&mut rng, data.len(), take).into_vec();
        picks.sort_unstable();
        Self { items: picks.into_iter().map(|i| Instance::from_dataset(data, i)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Exact,
    Kernel,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Exact => "exact",
            Estimator::Kernel => "kernel",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation<T> {
    /// Mean output over the background.
    pub base: T,
    pub phi: Vec<T>,
    /// Output on the unmasked instance.
    pub fx: T,
    /// One display value per feature (channel window mean, raw units).
    /// Zero unless the caller fills it in.
    pub feature_summaries: Vec<T>,
    pub estimator: Estimator,
    /// Coalitions evaluated.
    pub samples: usize,
}

impl<T: Scalar> Explanation<T> {
    /// `|b + Σφ − f(x)|`.
    pub fn efficiency_gap(&self) -> T {
        (self.base + self.phi.iter().copied().sum::<T>() - self.fx).abs()
    }

    /// Efficiency tolerance: 1e-6 for exact, `0.02·max(1, |fx − b|)` for kernel.
    pub fn efficiency_tolerance(&self) -> T {
        match self.estimator {
            Estimator::Exact => T::of(1e-6),
            Estimator::Kernel => T::of(0.02) * (self.fx - self.base).abs().max(T::one()),
        }
    }

    pub fn is_efficient(&self) -> bool {
        self.efficiency_gap() < self.efficiency_tolerance()
    }

    pub fn to_document(&self, names: &[String]) -> ExplanationDoc {
        ExplanationDoc {
            base: self.base.as_f64(),
            fx: self.fx.as_f64(),
            estimator: self.estimator,
            samples: self.samples,
            features: names
                .iter()
                .enumerate()
                .map(|(i, n)| FeatureAttribution {
                    name: n.clone(),
                    phi: self.phi[i].as_f64(),
                    summary_value: self.feature_summaries.get(i).map_or(0.0, |v| v.as_f64()),
                })
                .collect(),
        }
    }
}

/// Serialized explanation; field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    pub base: f64,
    pub fx: f64,
    pub estimator: Estimator,
    pub samples: usize,
    pub features: Vec<FeatureAttribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub name: String,
    pub phi: f64,
    pub summary_value: f64,
}

impl ExplanationDoc {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn to_explanation(&self) -> Explanation<f64> {
        Explanation {
            base: self.base,
            phi: self.features.iter().map(|f| f.phi).collect(),
            fx: self.fx,
            feature_summaries: self.features.iter().map(|f| f.summary_value).collect(),
            estimator: self.estimator,
            samples: self.samples,
        }
    }
}

fn check_background<I: Features>(x: &I, bg: &Background<I>) -> Result<(), ShapleyError> {
    if bg.is_empty() {
        return Err(ShapleyError::EmptyBackground);
    }
    if bg.items.iter().any(|b| !x.shape_matches(b)) {
        return Err(ShapleyError::ShapeMismatch);
    }
    Ok(())
}

/// `v(S)` with a caller-provided scratch item.
fn value_with<I, T, F>(f: &F, x: &I, coalition: Coalition, bg: &Background<I>, scratch: &mut I) -> T
where
    I: Features,
    T: Scalar,
    F: Fn(&I) -> T,
{
    let m = x.feature_count();
    if coalition == Coalition::full(m) {
        return f(x);
    }
    let mut acc = T::zero();
    for b in &bg.items {
        x.blend_into(b, coalition, scratch);
        acc += f(scratch);
    }
    acc / T::of_usize(bg.len())
}

/// Interventional coalition value: the mean of `f` over composites that
/// keep `x` on `coalition` and take each background item elsewhere.
/// The full coalition returns `f(x)` exactly.
pub fn coalition_value<I, T, F>(f: &F, x: &I, coalition: Coalition, bg: &Background<I>) -> Result<T, ShapleyError>
where
    I: Features,
    T: Scalar,
    F: Fn(&I) -> T,
{
    check_background(x, bg)?;
    let mut scratch = x.clone();
    Ok(value_with(f, x, coalition, bg, &mut scratch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalition_bits() {
        let c = Coalition::EMPTY.with(0).with(3);
        assert!(c.contains(3) && !c.contains(1));
        assert_eq!(c.len(), 2);
        assert_eq!(c.complement(4), Coalition(0b0110));
        assert_eq!(Coalition::full(3), Coalition(0b111));
    }

    #[test]
    fn instance_blend_swaps_whole_channels() {
        let x = Instance::new(vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0]);
        let b = Instance::new(vec![-1.0, -2.0, -3.0, -4.0], vec![-5.0, -6.0]);
        let mut out = x.clone();
        x.blend_into(&b, Coalition(0b01), &mut out);
        assert_eq!(out.window, vec![1.0, -2.0, 3.0, -4.0]);
        assert_eq!(out.target, vec![5.0, -6.0]);
        assert_eq!(x.column_means(), vec![2.0, 3.0]);
        assert_eq!(x.tail(1).window, vec![3.0, 4.0]);
    }

    #[test]
    fn value_function_endpoints() {
        let f = |v: &Vec<f64>| v[0] * v[1] + v[2];
        let x = vec![1.0, 2.0, 3.0];
        let bg = Background::new(vec![vec![0.5, 0.5, 0.5]]);
        assert_eq!(coalition_value(&f, &x, Coalition::full(3), &bg).unwrap(), 5.0);
        assert_eq!(coalition_value(&f, &x, Coalition::EMPTY, &bg).unwrap(), 0.75);
        assert_eq!(
            coalition_value(&f, &x, Coalition::EMPTY, &Background::new(vec![])),
            Err(ShapleyError::EmptyBackground)
        );
    }

    #[test]
    fn value_of_additive_function_splits_by_coalition() {
        let g = [|v: f64| v * v, |v: f64| 3.0 * v, |v: f64| v.sin()];
        let f = |x: &Vec<f64>| (0..3).map(|i| g[i](x[i])).sum::<f64>();
        let x = vec![1.5, -0.5, 2.0];
        let bg = Background::new(vec![vec![0.1, 0.2, 0.3], vec![-1.0, 1.0, 0.0], vec![2.0, 0.0, -2.0]]);
        for mask in 0..8u64 {
            let s = Coalition(mask);
            let expect: f64 = (0..3)
                .map(|i| {
                    if s.contains(i) {
                        g[i](x[i])
                    } else {
                        bg.items.iter().map(|b| g[i](b[i])).sum::<f64>() / 3.0
                    }
                })
                .sum();
            let got = coalition_value(&f, &x, s, &bg).unwrap();
            assert!((got - expect).abs() < 1e-12, "{mask}: {got} vs {expect}");
        }
    }
}
