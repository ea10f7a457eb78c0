//! Forecast evaluation metrics: MAE, MAPE (percent, zero targets excluded),
//! RMSE, and the per-horizon-step report emitted by the CLI.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn check_shapes(y: &[f64], y_pred: &[f64]) -> Result<()> {
    if y.len() != y_pred.len() {
        return Err(Error::usage(format!(
            "metric inputs differ in length: {} vs {}",
            y.len(),
            y_pred.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::usage("metric inputs are empty".to_string()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_shapes(y, y_pred)?;
    let sum: f64 = y.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_shapes(y, y_pred)?;
    let sum: f64 = y.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / y.len() as f64).sqrt())
}

/// Mean absolute percentage error in percent, computed only over targets
/// with `|y| > 0`; returns the value and the number of included elements.
/// All-zero targets leave the metric undefined.
pub fn mape_with_count(y: &[f64], y_pred: &[f64]) -> Result<(f64, usize)> {
    check_shapes(y, y_pred)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in y.iter().zip(y_pred) {
        if a.abs() > 0.0 {
            sum += ((a - b) / a).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "MAPE undefined: all targets are zero".to_string(),
        ));
    }
    Ok((100.0 * sum / count as f64, count))
}

pub fn mape(y: &[f64], y_pred: &[f64]) -> Result<f64> {
    mape_with_count(y, y_pred).map(|(v, _)| v)
}

/// One metrics row: a horizon step or the aggregate.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub label: String,
    pub mae: f64,
    /// `None` when every target in the row is zero.
    pub mape: Option<f64>,
    pub rmse: f64,
    /// Number of elements in the row.
    pub n: usize,
    /// Elements included in the MAPE (nonzero targets).
    pub mape_included: usize,
}

/// Per-horizon-step and aggregate metrics.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub runtime_seconds: f64,
}

impl MetricReport {
    /// Build from per-horizon-step target/prediction pairs (raw scale).
    /// `per_step[h]` holds the flattened targets and predictions of horizon
    /// step `h` over all evaluated samples and sensors.
    pub fn from_per_step(per_step: &[(Vec<f64>, Vec<f64>)], runtime_seconds: f64) -> Result<MetricReport> {
        if per_step.is_empty() {
            return Err(Error::usage("no horizon steps to report".to_string()));
        }
        let mut rows = Vec::with_capacity(per_step.len() + 1);
        let mut all_y = Vec::new();
        let mut all_p = Vec::new();
        for (h, (y, p)) in per_step.iter().enumerate() {
            rows.push(Self::row(format!("step_{}", h + 1), y, p)?);
            all_y.extend_from_slice(y);
            all_p.extend_from_slice(p);
        }
        rows.push(Self::row("aggregate".to_string(), &all_y, &all_p)?);
        Ok(MetricReport { rows, runtime_seconds })
    }

    fn row(label: String, y: &[f64], p: &[f64]) -> Result<MetricRow> {
        let mae_v = mae(y, p)?;
        let rmse_v = rmse(y, p)?;
        // MAE <= RMSE by the power-mean inequality; a violation would mean
        // a broken accumulation, so refuse to report it.
        if mae_v > rmse_v + 1e-9 * rmse_v.max(1.0) {
            return Err(Error::numerical(format!(
                "metric invariant violated in {label}: MAE {mae_v} > RMSE {rmse_v}"
            )));
        }
        let (mape_v, included) = match mape_with_count(y, p) {
            Ok((v, c)) => (Some(v), c),
            Err(Error::UndefinedMetric(_)) => (None, 0),
            Err(e) => return Err(e),
        };
        Ok(MetricRow {
            label,
            mae: mae_v,
            mape: mape_v,
            rmse: rmse_v,
            n: y.len(),
            mape_included: included,
        })
    }

    pub fn aggregate(&self) -> &MetricRow {
        self.rows.last().expect("report always has an aggregate row")
    }

    /// CSV form: `label,mae,mape,rmse,n,mape_included`; undefined MAPE is an
    /// empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,mae,mape,rmse,n,mape_included\n");
        for r in &self.rows {
            let mape = r.mape.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", r.label, r.mae, mape, r.rmse, r.n, r.mape_included);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}
