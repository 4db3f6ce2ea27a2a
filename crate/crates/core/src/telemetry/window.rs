use crate::Scalar;

use super::TelemetryFrame;

/// Sliding `(window, next row)` pairs cut from a frame.
///
/// `inputs` holds `N` windows of `window_length × channels` values, each
/// row-major; `targets[i]` is the row right after window `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset<T> {
    pub window_length: usize,
    pub stride: usize,
    pub channels: usize,
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
    pub origin_indices: Vec<usize>,
}

/// Number of windows a frame of `rows` yields.
pub fn window_count(rows: usize, window_length: usize, stride: usize) -> usize {
    if rows < window_length + 1 {
        0
    } else {
        (rows - window_length - 1) / stride + 1
    }
}

/// Cuts windows starting at rows `0, stride, 2·stride, ...`.
///
/// Panics if `window_length` or `stride` is zero.
pub fn make_windows<T: Scalar>(frame: &TelemetryFrame, window_length: usize, stride: usize) -> WindowedDataset<T> {
    assert!(window_length >= 1 && stride >= 1, "window length and stride must be positive");
    let d = frame.channels();
    let n = window_count(frame.rows(), window_length, stride);
    let mut inputs = Vec::with_capacity(n * window_length * d);
    let mut targets = Vec::with_capacity(n * d);
    let mut origin_indices = Vec::with_capacity(n);
    for i in 0..n {
        let o = i * stride;
        origin_indices.push(o);
        inputs.extend(frame.values[o * d..(o + window_length) * d].iter().map(|&v| T::of(v)));
        targets.extend(frame.row(o + window_length).iter().map(|&v| T::of(v)));
    }
    WindowedDataset { window_length, stride, channels: d, inputs, targets, origin_indices }
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn len(&self) -> usize {
        self.origin_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin_indices.is_empty()
    }

    pub fn window(&self, i: usize) -> &[T] {
        let s = self.window_length * self.channels;
        &self.inputs[i * s..(i + 1) * s]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.channels..(i + 1) * self.channels]
    }

    /// Row index (in the source frame) of target `i`.
    pub fn target_index(&self, i: usize) -> usize {
        self.origin_indices[i] + self.window_length
    }

    /// Windows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> WindowedDataset<T> {
        let mut out = WindowedDataset {
            window_length: self.window_length,
            stride: self.stride,
            channels: self.channels,
            inputs: Vec::with_capacity(indices.len() * self.window_length * self.channels),
            targets: Vec::with_capacity(indices.len() * self.channels),
            origin_indices: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.inputs.extend_from_slice(self.window(i));
            out.targets.extend_from_slice(self.target(i));
            out.origin_indices.push(self.origin_indices[i]);
        }
        out
    }

    /// Chronological split into the first `fraction` of windows and the rest.
    pub fn split_chronological(&self, fraction: f64) -> (WindowedDataset<T>, WindowedDataset<T>) {
        let cut = ((self.len() as f64 * fraction).floor() as usize).min(self.len());
        let head: Vec<usize> = (0..cut).collect();
        let tail: Vec<usize> = (cut..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Channel, ChannelSchema, Fwg};
    use proptest::prelude::*;

    fn ramp(rows: usize) -> TelemetryFrame {
        let schema = ChannelSchema::new(
            vec![
                Channel { name: "a".into(), unit: "".into(), fwg: Fwg::Engine },
                Channel { name: "b".into(), unit: "".into(), fwg: Fwg::Engine },
            ],
            "t",
        )
        .unwrap();
        let values = (0..rows).flat_map(|r| [r as f64, -(r as f64)]).collect();
        TelemetryFrame::new(schema, (0..rows).map(|r| r as f64).collect(), values, None).unwrap()
    }

    #[test]
    fn counts_match_examples() {
        assert_eq!(make_windows::<f64>(&ramp(100), 10, 1).len(), 90);
        assert_eq!(make_windows::<f64>(&ramp(10), 10, 1).len(), 0);
        let ds = make_windows::<f64>(&ramp(101), 10, 10);
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.origin_indices, (0..10).map(|i| i * 10).collect::<Vec<_>>());
    }

    #[test]
    fn windows_and_targets_index_the_frame() {
        let ds = make_windows::<f64>(&ramp(30), 5, 3);
        for i in 0..ds.len() {
            let o = ds.origin_indices[i];
            assert_eq!(ds.window(i)[0], o as f64);
            assert_eq!(ds.window(i)[2 * 4], (o + 4) as f64);
            assert_eq!(ds.target(i), &[(o + 5) as f64, -((o + 5) as f64)]);
            assert_eq!(ds.target_index(i), o + 5);
        }
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(rows in 1usize..200, w in 1usize..40, stride in 1usize..20) {
            let mut naive = 0;
            let mut o = 0;
            while o + w < rows {
                naive += 1;
                o += stride;
            }
            prop_assert_eq!(window_count(rows, w, stride), naive);
            prop_assert_eq!(make_windows::<f32>(&ramp(rows), w, stride).len(), naive);
        }
    }
}
