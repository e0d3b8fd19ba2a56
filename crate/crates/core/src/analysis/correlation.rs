use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{format_value, MetricReport};
use crate::error::{Error, Result};
use crate::fsutil;

/// 1-based ranks with ties assigned their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1) + (j+1)) / 2
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::dims(format!("{} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::input(format!(
            "spearman needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::input("spearman inputs must be finite"));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| Error::input("correlation undefined for a constant input"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Rows used for each pair after dropping non-finite values.
    pub used_rows: Vec<Vec<usize>>,
    pub dropped_rows: Vec<Vec<usize>>,
}

/// Pairwise Spearman over report rows. Rows where either metric is
/// non-finite (infinite PSNR) are dropped for that pair only.
pub fn correlation_matrix(r: &MetricReport) -> Result<CorrelationMatrix> {
    let k = r.metrics.len();
    if k < 2 {
        return Err(Error::input("correlation needs at least two metrics"));
    }
    let columns: Vec<Vec<f64>> = (0..k)
        .map(|i| r.rows.iter().map(|row| row.values[i]).collect())
        .collect();
    let mut values = vec![vec![1.0; k]; k];
    let mut used = vec![vec![0; k]; k];
    let mut dropped = vec![vec![0; k]; k];
    for i in 0..k {
        let own = columns[i].iter().filter(|v| v.is_finite()).count();
        used[i][i] = own;
        dropped[i][i] = r.rows.len() - own;
        for j in i + 1..k {
            let (xs, ys): (Vec<f64>, Vec<f64>) = columns[i]
                .iter()
                .zip(&columns[j])
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (*a, *b))
                .unzip();
            if xs.len() < 3 {
                return Err(Error::input(format!(
                    "{} vs {}: only {} usable rows after dropping non-finite values",
                    r.metrics[i],
                    r.metrics[j],
                    xs.len()
                )));
            }
            let rho = spearman(&xs, &ys)
                .map_err(|e| Error::input(format!("{} vs {}: {e}", r.metrics[i], r.metrics[j])))?;
            values[i][j] = rho;
            values[j][i] = rho;
            used[i][j] = xs.len();
            used[j][i] = xs.len();
            dropped[i][j] = r.rows.len() - xs.len();
            dropped[j][i] = r.rows.len() - xs.len();
        }
    }
    Ok(CorrelationMatrix {
        metrics: r.metrics.clone(),
        values,
        used_rows: used,
        dropped_rows: dropped,
    })
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == a)?;
        let j = self.metrics.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }

    /// Matrix with the metric names as header row and first column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::input(format!("csv: {e}"));
        let mut header = vec![String::new()];
        header.extend(self.metrics.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (m, row) in self.metrics.iter().zip(&self.values) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|&v| format_value(v)));
            w.write_record(&rec).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::input(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fsutil::atomic_write(path, self.to_csv()?.as_bytes())
    }
}

/// `pair_id,m1,m2` rows for external plotting. A leading `#` comment notes
/// how many rows carry infinite values.
pub fn scatter_csv(r: &MetricReport, m1: &str, m2: &str) -> Result<String> {
    let i = r
        .metric_index(m1)
        .ok_or_else(|| Error::input(format!("unknown metric {m1:?}")))?;
    let j = r
        .metric_index(m2)
        .ok_or_else(|| Error::input(format!("unknown metric {m2:?}")))?;
    let n_inf = r
        .rows
        .iter()
        .filter(|row| !row.values[i].is_finite() || !row.values[j].is_finite())
        .count();
    let mut out = String::new();
    if n_inf > 0 {
        out.push_str(&format!(
            "# {n_inf} row(s) contain infinite values, written as inf\n"
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::input(format!("csv: {e}"));
    w.write_record(["pair_id", m1, m2]).map_err(csv_err)?;
    for row in &r.rows {
        w.write_record([
            row.pair_id.clone(),
            format_value(row.values[i]),
            format_value(row.values[j]),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::input(format!("csv: {e}")))?;
    out.push_str(std::str::from_utf8(&bytes).expect("utf-8"));
    Ok(out)
}

pub fn scatter_export(r: &MetricReport, m1: &str, m2: &str, path: &Path) -> Result<()> {
    fsutil::atomic_write(path, scatter_csv(r, m1, m2)?.as_bytes())
}
