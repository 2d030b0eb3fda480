//! File formats: the hourly time-series CSV (`hour,attr@node,...`, 0-based
//! hour column) and JSON for instances, aggregations, and reports.
//!
//! The CSV header does not carry attribute kinds; on load the kind is
//! inferred from the attribute name — names starting with `demand` are
//! demands, everything else is a capacity factor. Both case generation and
//! the CLI follow this convention.

use std::path::Path;

use storax_core::timeseries::{AttributeKind, AttributeSeries, FullTimeSeries, TimeSeriesError};

use crate::esom::ModelInstance;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed header cell {0:?}: expected name@node")]
    BadHeader(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error(transparent)]
    Validation(#[from] TimeSeriesError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn save_timeseries(series: &FullTimeSeries, path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["hour".to_string()];
    header.extend(series.attributes().iter().map(|a| a.key()));
    w.write_record(&header)?;
    for t in 0..series.horizon() {
        let mut record = vec![t.to_string()];
        record.extend(series.attributes().iter().map(|a| format!("{}", a.values[t])));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_timeseries(path: &Path) -> Result<FullTimeSeries, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let mut columns: Vec<(String, String)> = Vec::new();
    for cell in header.iter().skip(1) {
        let (name, node) = cell
            .split_once('@')
            .ok_or_else(|| IoError::BadHeader(cell.to_string()))?;
        columns.push((name.to_string(), node.to_string()));
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (rownum, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != columns.len() + 1 {
            return Err(IoError::BadRow {
                row: rownum + 1,
                message: format!("expected {} fields, got {}", columns.len() + 1, record.len()),
            });
        }
        for (k, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| IoError::BadRow {
                row: rownum + 1,
                message: format!("bad number {cell:?}"),
            })?;
            values[k].push(v);
        }
    }
    let attributes = columns
        .into_iter()
        .zip(values)
        .map(|((name, node), vals)| {
            let kind = if name.starts_with("demand") {
                AttributeKind::Demand
            } else {
                AttributeKind::CapacityFactor
            };
            AttributeSeries { name, node, kind, values: vals }
        })
        .collect();
    Ok(FullTimeSeries::new(attributes)?)
}

pub fn save_instance(instance: &ModelInstance, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(instance)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<ModelInstance, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}
