use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fsutil;

/// Metric whose value may legitimately be `+inf` (identical images).
pub const PSNR: &str = "psnr";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub pair_id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Number of finite values summarised.
    pub n: usize,
    pub n_infinite: usize,
}

/// Per-pair metric table with a parameter echo.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub metrics: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub params: BTreeMap<String, Value>,
    pub provenance: BTreeMap<String, String>,
}

/// JSON encoding of a metric value: numbers as-is, infinities as strings.
pub fn value_to_json(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::from("inf")
    } else if v == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        json!(v)
    }
}

pub fn value_from_json(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_value(s),
        _ => None,
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v}")
}

pub fn parse_value(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        t => t.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

impl MetricReport {
    pub fn new<S: Into<String>>(metrics: impl IntoIterator<Item = S>) -> Self {
        Self {
            metrics: metrics.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metrics.iter().position(|m| m == name)
    }

    pub fn push_row(&mut self, pair_id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let pair_id = pair_id.into();
        if values.len() != self.metrics.len() {
            return Err(Error::dims(format!(
                "row {pair_id} has {} values for {} metrics",
                values.len(),
                self.metrics.len()
            )));
        }
        for (m, &v) in self.metrics.iter().zip(&values) {
            let allowed = v.is_finite() || (v == f64::INFINITY && m.eq_ignore_ascii_case(PSNR));
            if !allowed {
                return Err(Error::input(format!(
                    "row {pair_id}: {m} = {v} is not allowed"
                )));
            }
        }
        self.rows.push(ReportRow { pair_id, values });
        Ok(())
    }

    /// Orders rows by pair id so reports do not depend on evaluation order.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.metric_index(name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn summary(&self) -> BTreeMap<String, MetricSummary> {
        self.metrics
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let finite: Vec<f64> = self
                    .rows
                    .iter()
                    .map(|r| r.values[i])
                    .filter(|v| v.is_finite())
                    .collect();
                let n = finite.len();
                let mean = if n > 0 {
                    finite.iter().sum::<f64>() / n as f64
                } else {
                    f64::NAN
                };
                let std = if n > 0 {
                    (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
                } else {
                    f64::NAN
                };
                (
                    m.clone(),
                    MetricSummary {
                        mean,
                        std,
                        n,
                        n_infinite: self.rows.len() - n,
                    },
                )
            })
            .collect()
    }

    /// Pairs whose FSIM exceeds 1 (adapted image has more contrast than its source).
    pub fn fsim_above_one(&self) -> Vec<String> {
        match self.metric_index("fsim") {
            Some(i) => self
                .rows
                .iter()
                .filter(|r| r.values[i] > 1.0)
                .map(|r| r.pair_id.clone())
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::input(format!("csv: {e}"));
        let mut header = vec!["pair_id".to_string()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.pair_id.clone()];
            rec.extend(row.values.iter().map(|&v| format_value(v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::input(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let csv_err = |e: csv::Error| Error::input(format!("csv: {e}"));
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("pair_id") || header.len() < 2 {
            return Err(Error::input(
                "report header must be pair_id followed by metric names",
            ));
        }
        let mut report = MetricReport::new(header.iter().skip(1));
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let pair = rec.get(0).unwrap_or_default().to_string();
            let values = rec
                .iter()
                .skip(1)
                .map(|s| {
                    parse_value(s).ok_or_else(|| {
                        Error::input(format!("row {pair}: cannot parse value {s:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            report.push_row(pair, values)?;
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = serde_json::Map::new();
                obj.insert("pair_id".into(), Value::from(r.pair_id.clone()));
                for (m, &v) in self.metrics.iter().zip(&r.values) {
                    obj.insert(m.clone(), value_to_json(v));
                }
                Value::Object(obj)
            })
            .collect();
        let summary: serde_json::Map<String, Value> = self
            .summary()
            .into_iter()
            .map(|(m, s)| {
                (
                    m,
                    json!({
                        "mean": value_to_json(s.mean),
                        "std": value_to_json(s.std),
                        "n": s.n,
                        "n_infinite": s.n_infinite,
                    }),
                )
            })
            .collect();
        json!({
            "metrics": self.metrics,
            "params": self.params,
            "provenance": self.provenance,
            "rows": rows,
            "summary": summary,
            "flags": { "fsim_above_one": self.fsim_above_one() },
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::input(format!("report json: {m}"));
        let metrics: Vec<String> = v
            .get("metrics")
            .and_then(|m| serde_json::from_value(m.clone()).ok())
            .ok_or_else(|| bad("missing metrics"))?;
        let mut report = MetricReport::new(metrics.clone());
        if let Some(p) = v.get("params").and_then(Value::as_object) {
            report.params = p.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        }
        if let Some(p) = v.get("provenance") {
            report.provenance =
                serde_json::from_value(p.clone()).map_err(|e| bad(&e.to_string()))?;
        }
        for row in v
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing rows"))?
        {
            let pair = row
                .get("pair_id")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("row without pair_id"))?;
            let values = metrics
                .iter()
                .map(|m| {
                    row.get(m)
                        .and_then(value_from_json)
                        .ok_or_else(|| bad(&format!("row {pair} missing {m}")))
                })
                .collect::<Result<Vec<_>>>()?;
            report.push_row(pair, values)?;
        }
        Ok(report)
    }

    /// Loads a report from `.json` or `.csv` by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
            Self::from_json(&v)
        } else {
            Self::from_csv(&text)
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fsutil::atomic_write(path, self.to_csv()?.as_bytes())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fsutil::atomic_write_json(path, &self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricReport {
        let mut r = MetricReport::new(["ssim", "psnr", "fsim"]);
        r.push_row("b", vec![0.9, 30.5, 1.02]).unwrap();
        r.push_row("a", vec![1.0, f64::INFINITY, 1.0]).unwrap();
        r.push_row("c", vec![0.5, 12.25, 0.8]).unwrap();
        r.params.insert("ssim.window".into(), json!(11));
        r
    }

    #[test]
    fn csv_round_trip_with_inf() {
        let r = sample();
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("pair_id,ssim,psnr,fsim\n"));
        assert!(csv.contains("a,1,inf,1\n"));
        let back = MetricReport::from_csv(&csv).unwrap();
        assert_eq!(back.rows, r.rows);
    }

    #[test]
    fn json_round_trip_and_flags() {
        let r = sample();
        let v = r.to_json();
        assert_eq!(v["rows"][1]["psnr"], json!("inf"));
        assert_eq!(v["flags"]["fsim_above_one"], json!(["b"]));
        assert_eq!(v["summary"]["psnr"]["n_infinite"], json!(1));
        let back = MetricReport::from_json(&v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn invalid_rows_rejected() {
        let mut r = MetricReport::new(["ssim", "psnr"]);
        assert!(r.push_row("x", vec![1.0]).is_err());
        assert!(r.push_row("x", vec![f64::INFINITY, 1.0]).is_err());
        assert!(r.push_row("x", vec![f64::NAN, 1.0]).is_err());
        assert!(r.push_row("x", vec![1.0, f64::INFINITY]).is_ok());
    }

    #[test]
    fn summary_skips_infinite() {
        let s = sample().summary();
        assert_eq!(s["psnr"].n, 2);
        assert!((s["psnr"].mean - (30.5 + 12.25) / 2.0).abs() < 1e-12);
        assert!((s["ssim"].std - (0.0466666666666667f64).sqrt()).abs() < 1e-9);
    }
}
