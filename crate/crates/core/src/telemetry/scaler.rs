use serde::{Deserialize, Serialize};

use super::{TelemetryError, TelemetryFrame};

/// Per-channel min-max scaling fitted on training rows.
///
/// A channel whose max equals its min is constant and maps to 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub channels: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    /// Fits min and max per channel over every row of `frame`.
    pub fn fit(frame: &TelemetryFrame) -> Self {
        let d = frame.channels();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for i in 0..frame.rows() {
            for (c, &v) in frame.row(i).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Self { channels: frame.schema.names(), min, max }
    }

    pub fn is_constant(&self, c: usize) -> bool {
        self.max[c] == self.min[c]
    }

    pub fn scale_value(&self, c: usize, x: f64) -> f64 {
        if self.is_constant(c) {
            0.5
        } else {
            (x - self.min[c]) / (self.max[c] - self.min[c])
        }
    }

    pub fn unscale_value(&self, c: usize, s: f64) -> f64 {
        if self.is_constant(c) {
            self.min[c]
        } else {
            self.min[c] + s * (self.max[c] - self.min[c])
        }
    }

    pub fn check_schema(&self, frame: &TelemetryFrame) -> Result<(), TelemetryError> {
        let names = frame.schema.names();
        if names != self.channels {
            return Err(TelemetryError::SchemaMismatch(format!(
                "scaler fitted on {:?}, frame has {:?}",
                self.channels, names
            )));
        }
        Ok(())
    }

    /// Scales every value; extrapolation outside `[0, 1]` is kept.
    pub fn apply(&self, frame: &TelemetryFrame) -> Result<TelemetryFrame, TelemetryError> {
        self.map(frame, Self::scale_value)
    }

    pub fn invert(&self, frame: &TelemetryFrame) -> Result<TelemetryFrame, TelemetryError> {
        self.map(frame, Self::unscale_value)
    }

    fn map(&self, frame: &TelemetryFrame, f: fn(&Self, usize, f64) -> f64) -> Result<TelemetryFrame, TelemetryError> {
        self.check_schema(frame)?;
        let d = frame.channels();
        let mut out = frame.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v = f(self, k % d, *v);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Channel, ChannelSchema, Fwg};
    use proptest::prelude::*;

    fn frame(cols: &[&[f64]]) -> TelemetryFrame {
        let schema = ChannelSchema::new(
            (0..cols.len())
                .map(|i| Channel { name: format!("c{i}"), unit: "".into(), fwg: Fwg::Engine })
                .collect(),
            "t",
        )
        .unwrap();
        let n = cols[0].len();
        let values = (0..n).flat_map(|r| cols.iter().map(move |c| c[r])).collect();
        TelemetryFrame::new(schema, (0..n).map(|i| i as f64).collect(), values, None).unwrap()
    }

    #[test]
    fn fits_min_max_and_flags_constants() {
        let p = ScalerParams::fit(&frame(&[&[0.0, 50.0, 100.0], &[7.0, 7.0, 7.0]]));
        assert_eq!((p.min[0], p.max[0]), (0.0, 100.0));
        assert_eq!((p.min[1], p.max[1]), (7.0, 7.0));
        assert!(!p.is_constant(0));
        assert!(p.is_constant(1));
        assert_eq!(p.scale_value(0, 50.0), 0.5);
        assert_eq!(p.scale_value(0, 120.0), 1.2);
        assert_eq!(p.scale_value(1, 123.0), 0.5);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let p = ScalerParams::fit(&frame(&[&[0.0, 1.0]]));
        let other = frame(&[&[0.0, 1.0], &[2.0, 3.0]]);
        assert!(matches!(p.apply(&other), Err(TelemetryError::SchemaMismatch(_))));
    }

    proptest! {
        #[test]
        fn apply_then_invert_is_identity(
            a in proptest::collection::vec(-1e3f64..1e3, 3..40),
            shift in -50.0f64..50.0,
        ) {
            let b: Vec<f64> = a.iter().map(|v| v * 0.3 + shift).collect();
            let f = frame(&[&a, &b]);
            let p = ScalerParams::fit(&f);
            let back = p.invert(&p.apply(&f).unwrap()).unwrap();
            for c in 0..2 {
                if p.is_constant(c) { continue; }
                for r in 0..f.rows() {
                    prop_assert!((back.row(r)[c] - f.row(r)[c]).abs() < 1e-9);
                }
            }
        }
    }
}
