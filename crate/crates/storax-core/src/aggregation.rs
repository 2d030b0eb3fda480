//! Time series aggregation to representative days (RD), representative hours
//! (RH), and chronological representative hours (CRH).
//!
//! All modes return an [`Aggregation`]: representative values per attribute,
//! the sequence `sigma` mapping each original hour to a representative step
//! (1-based), and the occurrence weights `w_i`.
//!
//! RH and RD use greedy agglomerative clustering with the Ward criterion,
//! evaluated in centroid form `|A||B|/(|A|+|B|) * ||c_A - c_B||^2`, over
//! per-column normalized data. Ties are broken by the lowest cluster index,
//! so results are deterministic. CRH merges only adjacent segments, with the
//! same merge cost. Note that greedy hierarchical clustering is a heuristic:
//! the property RMSE(RH) <= RMSE(RD) holds for optimal clusterings and is
//! asserted only on the seeded test corpus.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::timeseries::{FullTimeSeries, HOURS_PER_DAY};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AggregationError {
    #[error("representative step count {requested} outside [1, {max}]")]
    InvalidCount { requested: usize, max: usize },
    #[error("horizon {horizon} is not divisible by 24, RD aggregation impossible")]
    NotDayDivisible { horizon: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    Rd,
    Rh,
    Crh,
    Full,
}

/// Day-level bookkeeping kept for RD aggregations: the number of
/// representative days `P` and the day sequence `psi: D -> P` (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySchedule {
    pub day_count: usize,
    pub day_sequence: Vec<usize>,
}

/// Output of any aggregation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub mode: AggregationMode,
    /// Number of representative steps `I`.
    #[serde(rename = "I")]
    pub step_count: usize,
    /// `sigma(t)` for each original hour, 1-based values in `[1, I]`.
    pub sequence: Vec<usize>,
    /// Occurrence count of each representative step in `sequence`.
    pub weights: Vec<usize>,
    /// Representative values, indexed `[attribute][step]`.
    pub rep_values: Vec<Vec<f64>>,
    /// Column keys (`name@node`) matching the outer index of `rep_values`.
    pub attribute_keys: Vec<String>,
    /// Present for RD aggregations only.
    pub day_schedule: Option<DaySchedule>,
}

impl Aggregation {
    pub fn horizon(&self) -> usize {
        self.sequence.len()
    }

    /// Representative values for one attribute by column key.
    pub fn rep_values_for(&self, key: &str) -> Option<&[f64]> {
        self.attribute_keys
            .iter()
            .position(|k| k == key)
            .map(|idx| self.rep_values[idx].as_slice())
    }
}

/// Identity aggregation: `I = T`, `sigma` is the identity, all weights 1.
pub fn full_resolution(series: &FullTimeSeries) -> Aggregation {
    let t = series.horizon();
    Aggregation {
        mode: AggregationMode::Full,
        step_count: t,
        sequence: (1..=t).collect(),
        weights: vec![1; t],
        rep_values: series.attributes().iter().map(|a| a.values.clone()).collect(),
        attribute_keys: series.attributes().iter().map(|a| a.key()).collect(),
        day_schedule: None,
    }
}

/// Cluster individual hours into `i_count` representative hours.
pub fn aggregate_rh(series: &FullTimeSeries, i_count: usize) -> Result<Aggregation, AggregationError> {
    let t = series.horizon();
    check_count(i_count, t)?;
    if i_count == t {
        let mut agg = full_resolution(series);
        agg.mode = AggregationMode::Rh;
        return Ok(agg);
    }
    let points = hour_points(series);
    let assignment = ward::cluster(&points, i_count);
    let sequence: Vec<usize> = assignment.iter().map(|&c| c + 1).collect();
    Ok(finish(series, AggregationMode::Rh, i_count, sequence, None))
}

/// Cluster whole days into `day_count` representative days.
pub fn aggregate_rd(series: &FullTimeSeries, day_count: usize) -> Result<Aggregation, AggregationError> {
    let days = series
        .day_count()
        .map_err(|_| AggregationError::NotDayDivisible { horizon: series.horizon() })?;
    check_count(day_count, days)?;
    let day_assignment = if day_count == days {
        (0..days).collect()
    } else {
        ward::cluster(&day_points(series), day_count)
    };
    let psi: Vec<usize> = day_assignment.iter().map(|&p| p + 1).collect();
    // expand day-wise, preserving intra-day chronology:
    // sigma(24(d-1)+h) = 24(psi(d)-1)+h
    let mut sequence = Vec::with_capacity(series.horizon());
    for &p in &psi {
        for h in 1..=HOURS_PER_DAY {
            sequence.push((p - 1) * HOURS_PER_DAY + h);
        }
    }
    let i_count = day_count * HOURS_PER_DAY;
    let schedule = DaySchedule { day_count, day_sequence: psi };
    Ok(finish(series, AggregationMode::Rd, i_count, sequence, Some(schedule)))
}

/// Merge adjacent hours into `i_count` chronological segments.
pub fn aggregate_crh(series: &FullTimeSeries, i_count: usize) -> Result<Aggregation, AggregationError> {
    let t = series.horizon();
    check_count(i_count, t)?;
    let sequence = if i_count == t {
        (1..=t).collect()
    } else {
        segment_adjacent(&hour_points(series), i_count)
    };
    Ok(finish(series, AggregationMode::Crh, i_count, sequence, None))
}

/// Root-mean-square error per attribute between the original series and its
/// reconstruction through `sigma`.
pub fn aggregation_error(series: &FullTimeSeries, agg: &Aggregation) -> Vec<f64> {
    let t = series.horizon();
    assert_eq!(t, agg.horizon(), "aggregation horizon mismatch");
    series
        .attributes()
        .iter()
        .enumerate()
        .map(|(a, attr)| {
            let sq_sum: f64 = attr
                .values
                .iter()
                .zip(&agg.sequence)
                .map(|(&x, &i)| {
                    let d = x - agg.rep_values[a][i - 1];
                    d * d
                })
                .sum();
            libm::sqrt(sq_sum / t as f64)
        })
        .collect()
}

fn check_count(requested: usize, max: usize) -> Result<(), AggregationError> {
    if requested < 1 || requested > max {
        return Err(AggregationError::InvalidCount { requested, max });
    }
    Ok(())
}

/// Normalized feature vector per hour.
fn hour_points(series: &FullTimeSeries) -> Vec<Vec<f64>> {
    let (norm, _) = series.normalize();
    let t = series.horizon();
    (0..t)
        .map(|hour| norm.attributes().iter().map(|a| a.values[hour]).collect())
        .collect()
}

/// Normalized feature vector per day (24 * A dimensions).
fn day_points(series: &FullTimeSeries) -> Vec<Vec<f64>> {
    let (norm, _) = series.normalize();
    let days = series.horizon() / HOURS_PER_DAY;
    (0..days)
        .map(|d| {
            let mut v = Vec::with_capacity(HOURS_PER_DAY * norm.attributes().len());
            for h in 0..HOURS_PER_DAY {
                for a in norm.attributes() {
                    v.push(a.values[d * HOURS_PER_DAY + h]);
                }
            }
            v
        })
        .collect()
}

/// Compute weights and representative values (mean of raw members) from a
/// finished sequence.
fn finish(
    series: &FullTimeSeries,
    mode: AggregationMode,
    i_count: usize,
    sequence: Vec<usize>,
    day_schedule: Option<DaySchedule>,
) -> Aggregation {
    let mut weights = vec![0usize; i_count];
    for &i in &sequence {
        weights[i - 1] += 1;
    }
    debug_assert!(weights.iter().all(|&w| w > 0), "unused representative step");
    let rep_values = series
        .attributes()
        .iter()
        .map(|attr| {
            let mut sums = vec![0.0f64; i_count];
            for (&i, &v) in sequence.iter().zip(&attr.values) {
                sums[i - 1] += v;
            }
            sums.iter().zip(&weights).map(|(s, &w)| s / w as f64).collect()
        })
        .collect();
    Aggregation {
        mode,
        step_count: i_count,
        sequence,
        weights,
        rep_values,
        attribute_keys: series.attributes().iter().map(|a| a.key()).collect(),
        day_schedule,
    }
}

mod ward {
    //! Greedy agglomerative clustering with the Ward criterion in centroid
    //! form, using cached nearest neighbors. No distance matrix is stored,
    //! so T = 8760 points stay cheap on memory.

    use alloc::vec;
    use alloc::vec::Vec;

    pub(super) fn cluster(points: &[Vec<f64>], k: usize) -> Vec<usize> {
        let n = points.len();
        assert!(k >= 1 && k <= n);
        let dim = points[0].len();

        let mut centroid: Vec<Vec<f64>> = points.to_vec();
        let mut size = vec![1.0f64; n];
        let mut alive = vec![true; n];
        // merge target per dead slot, for final path lookup
        let mut merged_into = vec![usize::MAX; n];

        let ward = |ca: &[f64], cb: &[f64], sa: f64, sb: f64| -> f64 {
            let mut sq = 0.0;
            for d in 0..dim {
                let diff = ca[d] - cb[d];
                sq += diff * diff;
            }
            sa * sb / (sa + sb) * sq
        };

        // nn[i] = (cost, j): cheapest merge partner of alive cluster i
        let mut nn: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n];
        let full_scan = |i: usize,
                         centroid: &[Vec<f64>],
                         size: &[f64],
                         alive: &[bool]|
         -> (f64, usize) {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..centroid.len() {
                if j == i || !alive[j] {
                    continue;
                }
                let c = ward(&centroid[i], &centroid[j], size[i], size[j]);
                if c < best.0 {
                    best = (c, j);
                }
            }
            best
        };
        if k < n {
            for i in 0..n {
                nn[i] = full_scan(i, &centroid, &size, &alive);
            }
        }

        let mut remaining = n;
        while remaining > k {
            // global cheapest merge; lowest index wins ties
            let mut best = (f64::INFINITY, usize::MAX);
            for i in 0..n {
                if alive[i] && nn[i].0 < best.0 {
                    best = (nn[i].0, i);
                }
            }
            let i = best.1;
            let j = nn[i].1;
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };

            // weighted centroid of the union, stored in the lower slot
            let s = size[lo] + size[hi];
            for d in 0..dim {
                centroid[lo][d] = (centroid[lo][d] * size[lo] + centroid[hi][d] * size[hi]) / s;
            }
            size[lo] = s;
            alive[hi] = false;
            merged_into[hi] = lo;
            remaining -= 1;
            if remaining == k {
                break;
            }

            nn[lo] = full_scan(lo, &centroid, &size, &alive);
            for x in 0..n {
                if !alive[x] || x == lo {
                    continue;
                }
                if nn[x].1 == lo || nn[x].1 == hi {
                    nn[x] = full_scan(x, &centroid, &size, &alive);
                } else {
                    // the new cluster may have become x's cheapest partner
                    let c = ward(&centroid[x], &centroid[lo], size[x], size[lo]);
                    if c < nn[x].0 {
                        nn[x] = (c, lo);
                    }
                }
            }
        }

        // resolve each point to its surviving slot, then relabel clusters by
        // first occurrence so the sequence is deterministic
        let mut label_of_slot = vec![usize::MAX; n];
        let mut next_label = 0;
        let mut assignment = Vec::with_capacity(n);
        for p in 0..n {
            let mut slot = p;
            while !alive[slot] {
                slot = merged_into[slot];
            }
            if label_of_slot[slot] == usize::MAX {
                label_of_slot[slot] = next_label;
                next_label += 1;
            }
            assignment.push(label_of_slot[slot]);
        }
        debug_assert_eq!(next_label, k);
        assignment
    }
}

/// Heap entry for adjacency-constrained merging; ordered so the cheapest
/// cost pops first, ties by lowest left-segment start.
#[derive(Debug, PartialEq)]
struct MergeCandidate {
    cost: f64,
    left: usize,
    left_version: u32,
    right_version: u32,
}

impl Eq for MergeCandidate {}

impl Ord for MergeCandidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.left.cmp(&self.left))
    }
}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Repeatedly merge the neighboring segment pair with the smallest increase
/// in within-segment squared error until `target` segments remain. Returns a
/// non-decreasing 1-based sequence.
fn segment_adjacent(points: &[Vec<f64>], target: usize) -> Vec<usize> {
    let n = points.len();
    let dim = points[0].len();

    // segment state indexed by start position
    let mut sum: Vec<Vec<f64>> = points.to_vec();
    let mut count = vec![1.0f64; n];
    let mut next: Vec<usize> = (0..n).map(|i| i + 1).collect(); // n = sentinel
    let mut prev: Vec<usize> = (0..n).map(|i| i.wrapping_sub(1)).collect();
    let mut version = vec![0u32; n];
    let mut alive = vec![true; n];

    let merge_cost = |sum_a: &[f64], na: f64, sum_b: &[f64], nb: f64| -> f64 {
        // SSE increase of merging contiguous segments with the given sums
        let mut sq = 0.0;
        for d in 0..dim {
            let diff = sum_a[d] / na - sum_b[d] / nb;
            sq += diff * diff;
        }
        na * nb / (na + nb) * sq
    };

    let mut heap = BinaryHeap::new();
    for i in 0..n.saturating_sub(1) {
        heap.push(MergeCandidate {
            cost: merge_cost(&sum[i], count[i], &sum[i + 1], count[i + 1]),
            left: i,
            left_version: 0,
            right_version: 0,
        });
    }

    let mut segments = n;
    while segments > target {
        let cand = heap.pop().expect("heap exhausted before reaching target");
        let l = cand.left;
        if !alive[l] || version[l] != cand.left_version {
            continue;
        }
        let r = next[l];
        if r >= n || version[r] != cand.right_version {
            continue;
        }
        // merge r into l
        for d in 0..dim {
            sum[l][d] += sum[r][d];
        }
        count[l] += count[r];
        alive[r] = false;
        next[l] = next[r];
        if next[l] < n {
            prev[next[l]] = l;
        }
        version[l] += 1;
        segments -= 1;

        if prev[l] < n {
            let p = prev[l];
            heap.push(MergeCandidate {
                cost: merge_cost(&sum[p], count[p], &sum[l], count[l]),
                left: p,
                left_version: version[p],
                right_version: version[l],
            });
        }
        if next[l] < n {
            let q = next[l];
            heap.push(MergeCandidate {
                cost: merge_cost(&sum[l], count[l], &sum[q], count[q]),
                left: l,
                left_version: version[l],
                right_version: version[q],
            });
        }
    }

    let mut sequence = Vec::with_capacity(n);
    let mut label = 0;
    for i in 0..n {
        if alive[i] && i > 0 {
            label += 1;
        }
        sequence.push(label + 1);
    }
    sequence
}
