//! Plot datasets built from a set of explanations.
//!
//! Everything here works in `f64`: these are display values, and an
//! [`ExplanationSet`] converts generic explanations on construction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::shapley::{Estimator, Explanation, ExplanationDoc};
use crate::Scalar;

/// Phi bins spanning the set-wide phi range, used for beeswarm stacking.
pub const BEESWARM_BINS: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("explanation set is empty")]
    EmptySet,
    #[error("need at least {need} explanations, got {got}")]
    TooFewExplanations { got: usize, need: usize },
    #[error("explanation {index} has {got} features, expected {expected}")]
    FeatureCount { index: usize, expected: usize, got: usize },
    #[error("explanation {index} lists features in a different order")]
    FeatureOrder { index: usize },
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
}

/// Explanations sharing one feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationSet {
    names: Vec<String>,
    explanations: Vec<Explanation<f64>>,
}

impl ExplanationSet {
    pub fn new<T: Scalar>(names: Vec<String>, explanations: &[Explanation<T>]) -> Result<Self, AggregateError> {
        let mut sorted = names.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(AggregateError::DuplicateFeature(w[0].clone()));
        }
        let m = names.len();
        let mut out = Vec::with_capacity(explanations.len());
        for (index, e) in explanations.iter().enumerate() {
            if e.phi.len() != m || e.feature_summaries.len() != m {
                let got = if e.phi.len() != m { e.phi.len() } else { e.feature_summaries.len() };
                return Err(AggregateError::FeatureCount { index, expected: m, got });
            }
            out.push(Explanation {
                base: e.base.as_f64(),
                phi: e.phi.iter().map(|p| p.as_f64()).collect(),
                fx: e.fx.as_f64(),
                feature_summaries: e.feature_summaries.iter().map(|p| p.as_f64()).collect(),
                estimator: e.estimator,
                samples: e.samples,
            });
        }
        Ok(Self { names, explanations: out })
    }

    /// Builds a set from exported documents, which must agree on feature order.
    pub fn from_documents(docs: &[ExplanationDoc]) -> Result<Self, AggregateError> {
        let first = docs.first().ok_or(AggregateError::EmptySet)?;
        let names = first.names();
        for (index, d) in docs.iter().enumerate() {
            if d.features.len() != names.len() {
                return Err(AggregateError::FeatureCount { index, expected: names.len(), got: d.features.len() });
            }
            if d.features.iter().zip(&names).any(|(f, n)| &f.name != n) {
                return Err(AggregateError::FeatureOrder { index });
            }
        }
        let ex: Vec<_> = docs.iter().map(ExplanationDoc::to_explanation).collect();
        Self::new(names, &ex)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn explanations(&self) -> &[Explanation<f64>] {
        &self.explanations
    }

    pub fn len(&self) -> usize {
        self.explanations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explanations.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, need: usize) -> Result<(), AggregateError> {
        match self.len() {
            0 => Err(AggregateError::EmptySet),
            got if got < need => Err(AggregateError::TooFewExplanations { got, need }),
            _ => Ok(()),
        }
    }

    fn phi_column(&self, i: usize) -> Vec<f64> {
        self.explanations.iter().map(|e| e.phi[i]).collect()
    }

    fn summary_column(&self, i: usize) -> Vec<f64> {
        self.explanations.iter().map(|e| e.feature_summaries[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub name: String,
    pub mean_abs_phi: f64,
}

/// Mean `|φ|` per feature, largest first, ties by name.
pub fn global_importance(set: &ExplanationSet) -> Result<Vec<Importance>, AggregateError> {
    set.require(1)?;
    let n = set.len() as f64;
    let mut out: Vec<Importance> = (0..set.feature_count())
        .map(|i| Importance {
            name: set.names[i].clone(),
            mean_abs_phi: set.explanations.iter().map(|e| e.phi[i].abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi).then_with(|| a.name.cmp(&b.name)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub phi: f64,
    /// Feature summary min-max normalized over the set; 0.5 when constant.
    pub color: f64,
    /// Stacking offset in point units, centred on 0 within its bin.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub name: String,
    pub points: Vec<BeeswarmPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmData {
    pub phi_min: f64,
    pub phi_max: f64,
    pub rows: Vec<BeeswarmRow>,
}

/// Min-max normalization onto `[0, 1]`, 0.5 for a constant column.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; values.len()]
    }
}

/// One row per feature in importance order, one point per explanation.
///
/// Points are binned by phi over the set-wide range; the `n` points of a bin,
/// ordered by (phi, explanation index), get offsets `r − (n − 1)/2`.
pub fn beeswarm_data(set: &ExplanationSet) -> Result<BeeswarmData, AggregateError> {
    let ranking = global_importance(set)?;
    let all = set.explanations.iter().flat_map(|e| e.phi.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    let span = hi - lo;
    let bin_of = |p: f64| -> usize {
        if span > 0.0 {
            (((p - lo) / span * BEESWARM_BINS as f64) as usize).min(BEESWARM_BINS - 1)
        } else {
            0
        }
    };
    let rows = ranking
        .iter()
        .map(|imp| {
            let i = set.index_of(&imp.name).expect("ranking names come from the set");
            let phis = set.phi_column(i);
            let colors = normalize(&set.summary_column(i));
            let mut jitter = vec![0.0; phis.len()];
            let mut bins: Vec<Vec<usize>> = vec![Vec::new(); BEESWARM_BINS];
            for (k, &p) in phis.iter().enumerate() {
                bins[bin_of(p)].push(k);
            }
            for members in &mut bins {
                members.sort_by(|&a, &b| phis[a].total_cmp(&phis[b]).then(a.cmp(&b)));
                let centre = (members.len() as f64 - 1.0) / 2.0;
                for (r, &k) in members.iter().enumerate() {
                    jitter[k] = r as f64 - centre;
                }
            }
            BeeswarmRow {
                name: imp.name.clone(),
                points: (0..phis.len())
                    .map(|k| BeeswarmPoint { phi: phis[k], color: colors[k], jitter: jitter[k] })
                    .collect(),
            }
        })
        .collect();
    Ok(BeeswarmData { phi_min: lo, phi_max: hi, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    /// Raw summary value of the plotted feature.
    pub x: f64,
    pub phi: f64,
    /// Raw summary value of the interaction feature.
    pub interaction_value: f64,
    /// `interaction_value` normalized over the set.
    pub color: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceData {
    pub feature: String,
    pub interaction: String,
    /// Set when `φ_i` is constant: no correlation exists and `interaction`
    /// is the lexicographically first other feature.
    pub undefined_correlation: bool,
    pub points: Vec<DependencePoint>,
}

/// Pearson correlation, `None` when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Scatter of feature `name` against its phi, colored by the other feature
/// whose summary correlates most strongly (in absolute value) with that phi.
pub fn dependence_data(set: &ExplanationSet, name: &str) -> Result<DependenceData, AggregateError> {
    set.require(3)?;
    let i = set.index_of(name).ok_or_else(|| AggregateError::UnknownFeature(name.to_string()))?;
    let phi = set.phi_column(i);
    let mut candidates: Vec<usize> = (0..set.feature_count()).filter(|&j| j != i).collect();
    candidates.sort_by(|&a, &b| set.names[a].cmp(&set.names[b]));
    let first = *candidates.first().ok_or(AggregateError::TooFewExplanations { got: 1, need: 2 })?;
    let phi_constant = phi.iter().all(|&p| p == phi[0]);
    let j = if phi_constant {
        first
    } else {
        let mut best = (first, f64::NEG_INFINITY);
        for &j in &candidates {
            let r = pearson(&set.summary_column(j), &phi).map_or(0.0, f64::abs);
            if r > best.1 {
                best = (j, r);
            }
        }
        best.0
    };
    let xs = set.summary_column(i);
    let cv = set.summary_column(j);
    let colors = normalize(&cv);
    Ok(DependenceData {
        feature: set.names[i].clone(),
        interaction: set.names[j].clone(),
        undefined_correlation: phi_constant,
        points: (0..set.len())
            .map(|k| DependencePoint { x: xs[k], phi: phi[k], interaction_value: cv[k], color: colors[k] })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub phi: f64,
    pub summary_value: f64,
}

/// Signed pushes from the base value to the explained output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSegments {
    pub base: f64,
    pub fx: f64,
    pub estimator: Estimator,
    /// `φ > 0`, largest first.
    pub positive: Vec<Segment>,
    /// `φ < 0`, largest magnitude first.
    pub negative: Vec<Segment>,
}

impl ForceSegments {
    pub fn total_positive(&self) -> f64 {
        self.positive.iter().map(|s| s.phi).sum()
    }

    pub fn total_negative(&self) -> f64 {
        self.negative.iter().map(|s| s.phi).sum()
    }

    /// The segment with the largest `|φ|`, positive winning exact ties.
    pub fn largest(&self) -> Option<&Segment> {
        match (self.positive.first(), self.negative.first()) {
            (Some(p), Some(n)) if n.phi.abs() > p.phi => Some(n),
            (Some(p), _) => Some(p),
            (None, n) => n,
        }
    }
}

/// Splits `φ` by sign; zero attributions are dropped.
pub fn force_data<T: Scalar>(e: &Explanation<T>, names: &[String]) -> ForceSegments {
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let phi = e.phi[i].as_f64();
        let seg = Segment {
            name: name.clone(),
            phi,
            summary_value: e.feature_summaries.get(i).map_or(0.0, |v| v.as_f64()),
        };
        match phi.partial_cmp(&0.0) {
            Some(Ordering::Greater) => positive.push(seg),
            Some(Ordering::Less) => negative.push(seg),
            _ => {}
        }
    }
    let by_magnitude = |a: &Segment, b: &Segment| b.phi.abs().total_cmp(&a.phi.abs()).then_with(|| a.name.cmp(&b.name));
    positive.sort_by(by_magnitude);
    negative.sort_by(by_magnitude);
    ForceSegments { base: e.base.as_f64(), fx: e.fx.as_f64(), estimator: e.estimator, positive, negative }
}
