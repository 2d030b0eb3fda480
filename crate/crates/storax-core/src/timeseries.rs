//! Validated hourly input time series and min-max normalization.
//!
//! Normalization is performed per column, i.e. per `attribute@node` pair.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Hours per day, fixed by the representative-day convention.
pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TimeSeriesError {
    #[error("time series has no attributes")]
    Empty,
    #[error("attribute `{key}` has length {len}, expected horizon {horizon}")]
    LengthMismatch { key: String, len: usize, horizon: usize },
    #[error("attribute `{key}` has a non-finite value at hour {hour}")]
    NonFinite { key: String, hour: usize },
    #[error("capacity factor `{key}` is {value} at hour {hour}, outside [0, 1]")]
    FactorOutOfRange { key: String, hour: usize, value: f64 },
    #[error("demand `{key}` is negative ({value}) at hour {hour}")]
    NegativeDemand { key: String, hour: usize, value: f64 },
    #[error("horizon {horizon} is not divisible by 24")]
    NotDayDivisible { horizon: usize },
}

/// What an hourly attribute measures. Determines the validation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    /// Demand in MW; must be non-negative.
    Demand,
    /// Dimensionless capacity factor in [0, 1].
    CapacityFactor,
    /// Dimensionless conversion factor; only finiteness is required.
    ConversionFactor,
}

/// One hourly series for a single (attribute, node) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSeries {
    pub name: String,
    pub node: String,
    pub kind: AttributeKind,
    pub values: Vec<f64>,
}

impl AttributeSeries {
    /// Column key used in CSV headers and attribute lookups: `name@node`.
    pub fn key(&self) -> String {
        format!("{}@{}", self.name, self.node)
    }

    fn validate(&self) -> Result<(), TimeSeriesError> {
        for (hour, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TimeSeriesError::NonFinite { key: self.key(), hour });
            }
            match self.kind {
                AttributeKind::CapacityFactor if !(0.0..=1.0).contains(&v) => {
                    return Err(TimeSeriesError::FactorOutOfRange {
                        key: self.key(),
                        hour,
                        value: v,
                    });
                }
                AttributeKind::Demand if v < 0.0 => {
                    return Err(TimeSeriesError::NegativeDemand {
                        key: self.key(),
                        hour,
                        value: v,
                    });
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A full year (or multiple of days) of hourly input data.
///
/// Immutable after construction; all attributes share the same horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullTimeSeries {
    attributes: Vec<AttributeSeries>,
    horizon: usize,
}

impl FullTimeSeries {
    pub fn new(attributes: Vec<AttributeSeries>) -> Result<Self, TimeSeriesError> {
        let horizon = attributes.first().ok_or(TimeSeriesError::Empty)?.values.len();
        for attr in &attributes {
            if attr.values.len() != horizon {
                return Err(TimeSeriesError::LengthMismatch {
                    key: attr.key(),
                    len: attr.values.len(),
                    horizon,
                });
            }
            attr.validate()?;
        }
        Ok(Self { attributes, horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn attributes(&self) -> &[AttributeSeries] {
        &self.attributes
    }

    /// Look up a series by its `name@node` key.
    pub fn attribute(&self, key: &str) -> Option<&AttributeSeries> {
        self.attributes.iter().find(|a| a.key() == key)
    }

    /// Number of days; errors unless the horizon is a multiple of 24.
    pub fn day_count(&self) -> Result<usize, TimeSeriesError> {
        if self.horizon % HOURS_PER_DAY != 0 {
            return Err(TimeSeriesError::NotDayDivisible { horizon: self.horizon });
        }
        Ok(self.horizon / HOURS_PER_DAY)
    }

    /// Min-max scale every attribute to [0, 1].
    ///
    /// Constant attributes map to all-zero with unit scale and the constant
    /// recorded as offset, so the original is always recoverable.
    pub fn normalize(&self) -> (FullTimeSeries, Normalization) {
        let mut scaled = Vec::with_capacity(self.attributes.len());
        let mut records = Vec::with_capacity(self.attributes.len());
        for attr in &self.attributes {
            let min = attr.values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = attr.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scale = if max > min { max - min } else { 1.0 };
            let values = attr.values.iter().map(|v| (v - min) / scale).collect();
            records.push(ScaleOffset { scale, offset: min });
            scaled.push(AttributeSeries {
                name: attr.name.clone(),
                node: attr.node.clone(),
                // validation ranges no longer apply to scaled data
                kind: AttributeKind::ConversionFactor,
                values,
            });
        }
        (
            FullTimeSeries { attributes: scaled, horizon: self.horizon },
            Normalization { records },
        )
    }

    /// Inverse of [`FullTimeSeries::normalize`].
    pub fn denormalize(&self, norm: &Normalization) -> FullTimeSeries {
        let attributes = self
            .attributes
            .iter()
            .zip(&norm.records)
            .map(|(attr, so)| AttributeSeries {
                name: attr.name.clone(),
                node: attr.node.clone(),
                kind: attr.kind,
                values: attr.values.iter().map(|v| v * so.scale + so.offset).collect(),
            })
            .collect();
        FullTimeSeries { attributes, horizon: self.horizon }
    }
}

/// Per-attribute scale and offset recorded by normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleOffset {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub records: Vec<ScaleOffset>,
}
