use std::io::Write;
use std::path::Path;

use super::{ChannelSchema, TelemetryError, LABEL_COLUMN};

/// Timestamped multichannel sensor table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryFrame {
    pub schema: ChannelSchema,
    /// Seconds since epoch.
    pub timestamps: Vec<f64>,
    /// `rows × channels`, row-major.
    pub values: Vec<f64>,
    /// Per-row anomaly flags; only synthetic data carries them.
    pub labels: Option<Vec<bool>>,
}

/// Result of [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub frame: TelemetryFrame,
    /// Rows excluded for missing or unparseable cells.
    pub dropped_count: usize,
    /// Rows collapsed because their timestamp was already seen.
    pub duplicate_count: usize,
}

impl TelemetryFrame {
    pub fn new(
        schema: ChannelSchema,
        timestamps: Vec<f64>,
        values: Vec<f64>,
        labels: Option<Vec<bool>>,
    ) -> Result<Self, TelemetryError> {
        schema.validate()?;
        let d = schema.len();
        if values.len() != timestamps.len() * d {
            return Err(TelemetryError::SchemaMismatch(format!(
                "{} values for {} rows of {} channels",
                values.len(),
                timestamps.len(),
                d
            )));
        }
        if let Some(l) = &labels {
            if l.len() != timestamps.len() {
                return Err(TelemetryError::SchemaMismatch("label count differs from row count".into()));
            }
        }
        Ok(Self { schema, timestamps, values, labels })
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn channels(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.channels();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.row(i)[c]).collect()
    }

    pub fn is_anomalous(&self, i: usize) -> bool {
        self.labels.as_ref().is_some_and(|l| l[i])
    }

    /// Rows `[start, end)` as a new frame.
    pub fn slice(&self, start: usize, end: usize) -> TelemetryFrame {
        let d = self.channels();
        TelemetryFrame {
            schema: self.schema.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values[start * d..end * d].to_vec(),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        }
    }

    /// Chronological split: the first `fraction` of rows and the rest.
    pub fn split_chronological(&self, fraction: f64) -> (TelemetryFrame, TelemetryFrame) {
        let cut = ((self.rows() as f64) * fraction).floor() as usize;
        let cut = cut.min(self.rows());
        (self.slice(0, cut), self.slice(cut, self.rows()))
    }

    fn keep_rows(&self, keep: &[bool]) -> TelemetryFrame {
        let d = self.channels();
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        let mut labels = self.labels.as_ref().map(|_| Vec::new());
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            timestamps.push(self.timestamps[i]);
            values.extend_from_slice(&self.values[i * d..(i + 1) * d]);
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        TelemetryFrame { schema: self.schema.clone(), timestamps, values, labels }
    }

    /// Removes repeated timestamps (keeping the first) and rows holding any
    /// non-finite value. The result has strictly increasing timestamps.
    pub fn clean(&self) -> Result<TelemetryFrame, TelemetryError> {
        let mut keep = vec![false; self.rows()];
        let mut last: Option<f64> = None;
        for (i, k) in keep.iter_mut().enumerate() {
            let t = self.timestamps[i];
            if !t.is_finite() || !self.row(i).iter().all(|v| v.is_finite()) {
                continue;
            }
            if last.is_some_and(|prev| t <= prev) {
                continue;
            }
            last = Some(t);
            *k = true;
        }
        let out = self.keep_rows(&keep);
        if out.rows() == 0 {
            return Err(TelemetryError::AllRowsDropped);
        }
        Ok(out)
    }

    /// Writes the frame as CSV; the label column is appended when present
    /// and `with_labels` is set.
    pub fn write_csv<W: Write>(&self, writer: W, with_labels: bool) -> Result<(), TelemetryError> {
        let mut w = csv::Writer::from_writer(writer);
        let with_labels = with_labels && self.labels.is_some();
        let mut header: Vec<&str> = vec![self.schema.time_column.as_str()];
        header.extend(self.schema.channels.iter().map(|c| c.name.as_str()));
        if with_labels {
            header.push(LABEL_COLUMN);
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.rows() {
            record.clear();
            record.push(format_time(self.timestamps[i]));
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            if with_labels {
                record.push(if self.is_anomalous(i) { "1".into() } else { "0".into() });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 9.0e15 {
        format!("{}", t as i64)
    } else {
        t.to_string()
    }
}

/// Reads a telemetry CSV. Rows with missing or unparseable cells are
/// dropped and counted; rows are returned in timestamp order with repeated
/// timestamps collapsed to their first occurrence.
pub fn load_csv(path: impl AsRef<Path>, schema: &ChannelSchema) -> Result<CsvLoad, TelemetryError> {
    let path = path.as_ref();
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(TelemetryError::EmptyFile(path.to_path_buf()));
    }
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let time_idx = find(&schema.time_column)
        .ok_or_else(|| TelemetryError::MissingColumn(schema.time_column.clone()))?;
    let chan_idx = schema
        .channels
        .iter()
        .map(|c| find(&c.name).ok_or_else(|| TelemetryError::MissingColumn(c.name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let label_idx = find(LABEL_COLUMN);

    let d = schema.len();
    let mut rows: Vec<(f64, Vec<f64>, bool)> = Vec::new();
    let mut dropped = 0usize;
    let mut seen_any = false;
    for record in reader.records() {
        seen_any = true;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        let cell = |i: usize| record.get(i).map(str::trim).filter(|s| !s.is_empty());
        let parsed = (|| {
            let t: f64 = cell(time_idx)?.parse().ok()?;
            let mut vals = Vec::with_capacity(d);
            for &ci in &chan_idx {
                vals.push(cell(ci)?.parse::<f64>().ok()?);
            }
            let label = match label_idx {
                Some(li) => match cell(li)? {
                    "0" => false,
                    "1" => true,
                    _ => return None,
                },
                None => false,
            };
            Some((t, vals, label))
        })();
        match parsed {
            Some(row) => rows.push(row),
            None => dropped += 1,
        }
    }
    if !seen_any || rows.is_empty() {
        return Err(TelemetryError::EmptyFile(path.to_path_buf()));
    }

    let out_of_order = rows.windows(2).filter(|p| p[1].0 < p[0].0).count();
    if rows.len() > 1 && out_of_order * 2 > rows.len() - 1 {
        return Err(TelemetryError::NonMonotoneTime { out_of_order, rows: rows.len() });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let before = rows.len();
    rows.dedup_by(|later, earlier| later.0 == earlier.0);
    let duplicate_count = before - rows.len();

    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for (t, v, l) in rows {
        timestamps.push(t);
        values.extend(v);
        labels.push(l);
    }
    let frame = TelemetryFrame::new(schema.clone(), timestamps, values, label_idx.map(|_| labels))?;
    Ok(CsvLoad { frame, dropped_count: dropped, duplicate_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Channel, Fwg};

    fn header(schema: &ChannelSchema, skip: Option<&str>) -> String {
        let mut cols = vec![schema.time_column.clone()];
        cols.extend(schema.names().into_iter().filter(|n| Some(n.as_str()) != skip));
        cols.join(",")
    }

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("t.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    fn clean_rows(n: usize, d: usize) -> String {
        (0..n)
            .map(|i| {
                let mut r = vec![format!("{}", 1_600_000_000 + i)];
                r.extend((0..d).map(|c| format!("{}.5", i + c)));
                r.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn loads_hundred_clean_rows() {
        let dir = tempfile::tempdir().unwrap();
        let s = ChannelSchema::default();
        let p = write(&dir, &format!("{}\n{}\n", header(&s, None), clean_rows(100, 15)));
        let load = load_csv(&p, &s).unwrap();
        assert_eq!(load.frame.rows(), 100);
        assert_eq!(load.frame.channels(), 15);
        assert_eq!(load.dropped_count, 0);
        assert!(load.frame.labels.is_none());
    }

    #[test]
    fn drops_rows_with_empty_fuel_rate() {
        let dir = tempfile::tempdir().unwrap();
        let s = ChannelSchema::default();
        let fuel = s.index_of("FuelRate").unwrap() + 1;
        let rows: Vec<String> = clean_rows(10, 15)
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 3 || i == 7 {
                    let mut cells: Vec<&str> = l.split(',').collect();
                    cells[fuel] = "";
                    cells.join(",")
                } else {
                    l.to_string()
                }
            })
            .collect();
        let p = write(&dir, &format!("{}\n{}\n", header(&s, None), rows.join("\n")));
        let load = load_csv(&p, &s).unwrap();
        assert_eq!(load.frame.rows(), 8);
        assert_eq!(load.dropped_count, 2);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let s = ChannelSchema::default();
        let p = write(&dir, &format!("{}\n", header(&s, Some("BrakeSwitch"))));
        match load_csv(&p, &s) {
            Err(TelemetryError::MissingColumn(c)) => assert_eq!(c, "BrakeSwitch"),
            other => panic!("{other:?}"),
        }
    }

    fn tiny_schema() -> ChannelSchema {
        ChannelSchema::new(vec![Channel { name: "a".into(), unit: "".into(), fwg: Fwg::Fuel }], "t").unwrap()
    }

    #[test]
    fn empty_and_scrambled_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_schema();
        assert!(matches!(load_csv(write(&dir, ""), &s), Err(TelemetryError::EmptyFile(_))));
        assert!(matches!(load_csv(write(&dir, "t,a\n"), &s), Err(TelemetryError::EmptyFile(_))));
        let p = write(&dir, "t,a\n5,1\n4,1\n3,1\n2,1\n1,1\n");
        assert!(matches!(load_csv(&p, &s), Err(TelemetryError::NonMonotoneTime { .. })));
    }

    #[test]
    fn sorts_and_collapses_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let s = tiny_schema();
        let p = write(&dir, "t,a,anomaly\n1,10,0\n2,20,1\n2,99,0\n4,40,0\n3,30,0\n");
        let load = load_csv(&p, &s).unwrap();
        assert_eq!(load.frame.timestamps, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(load.frame.values, vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(load.duplicate_count, 1);
        assert_eq!(load.frame.labels, Some(vec![false, true, false, false]));
    }

    #[test]
    fn clean_dedups_and_drops_non_finite() {
        let s = tiny_schema();
        let f = TelemetryFrame::new(s.clone(), vec![1.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, f64::NAN, 4.0], None).unwrap();
        let c = f.clean().unwrap();
        assert_eq!(c.timestamps, vec![1.0, 3.0]);
        assert_eq!(c.values, vec![1.0, 4.0]);
        assert_eq!(c.clean().unwrap(), c);
        let nan = TelemetryFrame::new(s, vec![1.0, 2.0], vec![f64::NAN, f64::INFINITY], None).unwrap();
        assert!(matches!(nan.clean(), Err(TelemetryError::AllRowsDropped)));
    }

    #[test]
    fn csv_round_trip_with_labels() {
        let s = tiny_schema();
        let f = TelemetryFrame::new(s.clone(), vec![0.0, 1.0, 2.5], vec![0.1, -3.25, 1e-7], Some(vec![false, true, false]))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        f.write_csv(std::fs::File::create(&p).unwrap(), true).unwrap();
        let back = load_csv(&p, &s).unwrap().frame;
        assert_eq!(back, f);
    }
}
