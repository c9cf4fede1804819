//! Result tables and their CSV / JSON serialisation.
//!
//! Floats are written with 17 significant digits so every value re-parses
//! to the identical `f64`.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Number, Value};
use tmt_core::bench::EnsembleStats;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) => format_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Num(v) if v.is_finite() => {
                Value::Number(format_f64(*v).parse::<Number>().expect("finite float"))
            }
            Cell::Num(_) => Value::Null,
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    /// `{"manifest": .., "columns": [..], "records": [{..}, ..]}`.
    pub fn to_json<M: Serialize>(&self, manifest: &M) -> Result<Vec<u8>> {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("manifest".into(), serde_json::to_value(manifest)?);
        doc.insert("columns".into(), Value::from(self.columns.clone()));
        doc.insert("records".into(), Value::Array(records));
        let mut buf = serde_json::to_vec_pretty(&Value::Object(doc))?;
        buf.push(b'\n');
        Ok(buf)
    }
}

pub const STATS_COLUMNS: [&str; 10] = [
    "point",
    "time",
    "truth",
    "sample_mean",
    "mse",
    "bias_sq",
    "variance",
    "mse_se",
    "bias_sq_se",
    "variance_se",
];

/// One record per detection point plus a fringe-averaged `mean` record,
/// each prefixed by `prefix`.
pub fn stats_records(stats: &EnsembleStats, prefix: &[Cell]) -> Vec<Vec<Cell>> {
    let mut out: Vec<Vec<Cell>> = stats
        .per_point
        .iter()
        .enumerate()
        .map(|(q, p)| {
            let mut row = prefix.to_vec();
            row.extend([
                Cell::from(q.to_string().as_str()),
                p.time.into(),
                p.truth.into(),
                p.sample_mean.into(),
                p.mse.into(),
                (p.bias * p.bias).into(),
                p.variance.into(),
                p.mse_se.into(),
                p.bias_sq_se.into(),
                p.variance_se.into(),
            ]);
            row
        })
        .collect();
    let mut row = prefix.to_vec();
    row.extend([
        Cell::from("mean"),
        f64::NAN.into(),
        f64::NAN.into(),
        f64::NAN.into(),
        stats.fringe_averaged_mse.into(),
        stats.fringe_averaged_bias_sq.into(),
        stats.fringe_averaged_variance.into(),
        stats.fringe_averaged_mse_se.into(),
        stats.fringe_averaged_bias_sq_se.into(),
        stats.fringe_averaged_variance_se.into(),
    ]);
    out.push(row);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tmt_core::bench::{stats_from_samples, DetectionPointSet};

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            6.02214076e23,
            -2.5e-300,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        let t = {
            let mut t = Table::new(&["x"]);
            t.push(vec![0.1.into()]);
            t
        };
        let doc: Value = serde_json::from_slice(&t.to_json(&()).unwrap()).unwrap();
        assert_eq!(
            doc["records"][0]["x"].as_f64().unwrap().to_bits(),
            0.1f64.to_bits()
        );
    }

    #[test]
    fn empty_table() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n");
        let doc: Value = serde_json::from_slice(&t.to_json(&()).unwrap()).unwrap();
        assert_eq!(doc["records"], Value::Array(vec![]));
    }

    #[test]
    fn three_points_give_four_records() {
        let points = DetectionPointSet {
            indices: vec![0, 1, 2],
            times: vec![0.0, 1.0, 2.0],
            truths: vec![0.0; 3],
        };
        let s =
            stats_from_samples(&[vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]], &points, None).unwrap();
        let mut t = Table::new(&STATS_COLUMNS);
        for r in stats_records(&s, &[]) {
            t.push(r);
        }
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().last().unwrap().starts_with("mean,"));
    }
}
