//! Chronology of storage-level time steps.
//!
//! A new storage-level time step starts whenever the representative time step
//! changes between adjacent hours. The resulting sequence `rho: T -> J`, the
//! unique mapping `theta: J -> I`, and the per-step durations `d_j` are the
//! backbone of the reduced storage representation. No merging happens across
//! the year boundary: `j = 1` and `j = J` stay distinct even if
//! `sigma(T) == sigma(1)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregation, AggregationMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SequenceError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("sequence decreases at hour {hour}, not chronological")]
    NotChronological { hour: usize },
}

/// Storage-level time step structure derived from a sequence `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageMap {
    /// `rho(t)` per hour, 1-based, non-decreasing, increments by at most 1.
    pub rho: Vec<usize>,
    /// `theta(j)`: the representative step shared by all hours in `j`.
    pub theta: Vec<usize>,
    /// Hours spanned by each storage step.
    pub durations: Vec<usize>,
}

impl StorageMap {
    /// Number of storage-level time steps `J`.
    pub fn step_count(&self) -> usize {
        self.theta.len()
    }

    pub fn horizon(&self) -> usize {
        self.rho.len()
    }

    /// True when `J == I'` and `theta` is the identity, i.e. the map came
    /// from a chronological aggregation.
    pub fn is_chronological(&self) -> bool {
        self.theta.iter().enumerate().all(|(idx, &i)| i == idx + 1)
    }
}

/// Build the storage map from a representative-step sequence.
pub fn build_storage_map(sequence: &[usize]) -> Result<StorageMap, SequenceError> {
    if sequence.is_empty() {
        return Err(SequenceError::EmptySequence);
    }
    let mut rho = Vec::with_capacity(sequence.len());
    let mut theta = Vec::new();
    let mut durations = Vec::new();
    let mut j = 0usize;
    for (t, &i) in sequence.iter().enumerate() {
        if t == 0 || i != sequence[t - 1] {
            j += 1;
            theta.push(i);
            durations.push(0);
        }
        durations[j - 1] += 1;
        rho.push(j);
    }
    Ok(StorageMap { rho, theta, durations })
}

/// Storage map for a chronological (CRH) aggregation: `rho == sigma`,
/// `J == I`, and `theta` is the identity. Errors if the sequence decreases.
pub fn build_storage_map_chrono(agg: &Aggregation) -> Result<StorageMap, SequenceError> {
    debug_assert!(matches!(agg.mode, AggregationMode::Crh | AggregationMode::Full));
    if let Some(hour) = agg.sequence.windows(2).position(|w| w[1] < w[0]) {
        return Err(SequenceError::NotChronological { hour: hour + 1 });
    }
    let map = build_storage_map(&agg.sequence)?;
    debug_assert_eq!(map.step_count(), agg.step_count);
    debug_assert!(map.is_chronological());
    Ok(map)
}

/// `J` without materializing the map.
pub fn count_storage_steps(agg: &Aggregation) -> usize {
    1 + agg.sequence.windows(2).filter(|w| w[1] != w[0]).count()
}
