//! Run records: per-seed metric rows, seed aggregates, and the flat CSV /
//! JSON emission shared by all five experiments.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// One sweep point × seed worth of metrics. `values` is ordered to match the
/// experiment's column list.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// Mean/stddev/extrema of one metric across seeds at a fixed sweep point.
/// The stddev is the sample estimate (n−1 denominator), 0 for a single seed.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Aggregate {
    pub depth: usize,
    pub width: usize,
    pub metric: String,
    pub seeds: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

/// A sweep point that failed, with the stage that broke.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub stage: String,
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub message: String,
}

/// Pooled degree-law fit across all seeds of one sweep point (experiment 4).
#[derive(Debug, Clone, Serialize)]
pub struct PooledDegreeFit {
    pub depth: usize,
    pub width: usize,
    pub n_bits: usize,
    pub mean_degree: f64,
    pub p_hat: f64,
    pub tv_distance: f64,
}

/// Everything one experiment run produced.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_degree_fit: Option<Vec<PooledDegreeFit>>,
    pub duration_seconds: f64,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig, columns: &[&str]) -> Self {
        RunRecord {
            experiment: config.experiment.short_name().to_string(),
            config: config.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            aggregates: Vec::new(),
            failures: Vec::new(),
            pooled_degree_fit: None,
            duration_seconds: 0.0,
        }
    }

    pub fn push_row(&mut self, seed: u64, depth: usize, width: usize, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(MetricRow {
            seed,
            depth,
            width,
            values,
        });
    }

    pub fn push_failure(&mut self, stage: &str, seed: u64, depth: usize, width: usize, message: String) {
        self.failures.push(Failure {
            stage: stage.to_string(),
            seed,
            depth,
            width,
            message,
        });
    }

    /// Recomputes `aggregates` from the rows, grouped by (depth, width) in
    /// first-appearance order.
    pub fn finalize_aggregates(&mut self) {
        self.aggregates = compute_aggregates(&self.columns, &self.rows);
    }

    /// Serializes the record as CSV: a fixed header, then one row per sweep
    /// point per seed in run order. Floats use shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,seed,depth,width");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}",
                self.experiment, row.seed, row.depth, row.width
            ));
            for v in &row.values {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<experiment>.csv` and `record.json` into `dir`, creating it if
    /// needed. Timestamps go to `meta.json` so the CSV stays byte-identical
    /// across reruns.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let mut csv = std::fs::File::create(&csv_path)?;
        csv.write_all(self.to_csv().as_bytes())?;

        let json_path = dir.join("record.json");
        let json = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Config {
            message: format!("serializing record: {e}"),
        })?;
        std::fs::write(&json_path, json)?;
        Ok(())
    }
}

/// Writes wall-clock metadata next to the record; kept out of the CSV and
/// queried by nothing, so reruns can diff the data files directly.
pub fn write_meta(dir: &Path, started_unix: u64, duration_seconds: f64) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Meta {
        started_unix: u64,
        duration_seconds: f64,
    }
    let meta = Meta {
        started_unix,
        duration_seconds,
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    Ok(())
}

pub fn compute_aggregates(columns: &[String], rows: &[MetricRow]) -> Vec<Aggregate> {
    let mut order: Vec<(usize, usize)> = Vec::new();
    for row in rows {
        if !order.contains(&(row.depth, row.width)) {
            order.push((row.depth, row.width));
        }
    }
    let mut out = Vec::new();
    for (depth, width) in order {
        let group: Vec<&MetricRow> = rows
            .iter()
            .filter(|r| r.depth == depth && r.width == width)
            .collect();
        for (ci, metric) in columns.iter().enumerate() {
            let vals: Vec<f64> = group.iter().map(|r| r.values[ci]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let stddev = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.push(Aggregate {
                depth,
                width,
                metric: metric.clone(),
                seeds: vals.len(),
                mean,
                stddev,
                min,
                max,
            });
        }
    }
    out
}

/// Shortest decimal that round-trips to the same f64 (`Display` for f64).
fn format_float(v: f64) -> String {
    format!("{v}")
}
