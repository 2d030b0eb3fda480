//! Hourly reconstruction of storage levels from an aggregated solution, plus
//! the feasibility audit applied to every solved benchmark cell.
//!
//! Reconstruction expands the representative flows back to the original
//! horizon through `sigma` and replays the hourly balance
//! `L(t) = (1-phi) L(t-1) + eta_c Hc(sigma(t)) - Hd(sigma(t)) / eta_d`.
//! It is deliberately independent of any constraint formulation so it can
//! serve as the ground truth all methods are checked against.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::formulation::StorageTech;
use crate::sequence::StorageMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructError {
    #[error("flow vectors have length {actual}, expected {expected} representative steps")]
    FlowLength { expected: usize, actual: usize },
    #[error("sequence is empty")]
    EmptySequence,
}

/// Per-hour storage levels replayed from representative flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyLevels {
    /// Level at the end of hour `t` (1-based), length `T`.
    pub levels: Vec<f64>,
    /// Level before hour 1, i.e. the end-of-horizon level under periodicity.
    pub start_level: f64,
}

impl HourlyLevels {
    /// Level at the end of storage step `j` for a given map.
    pub fn boundary_levels(&self, map: &StorageMap) -> Vec<f64> {
        let mut out = Vec::with_capacity(map.step_count());
        for (t, window) in map.rho.windows(2).enumerate() {
            if window[1] != window[0] {
                out.push(self.levels[t]);
            }
        }
        out.push(*self.levels.last().expect("non-empty horizon"));
        out
    }
}

/// Replay the hourly balance over the original horizon. `charge` and
/// `discharge` are indexed by representative step (0-based slice for 1-based
/// steps); `sigma[t]` maps each original hour to its representative step.
pub fn reconstruct_hourly(
    sigma: &[usize],
    charge: &[f64],
    discharge: &[f64],
    tech: &StorageTech,
    start_level: f64,
) -> Result<HourlyLevels, ReconstructError> {
    if sigma.is_empty() {
        return Err(ReconstructError::EmptySequence);
    }
    let i_count = sigma.iter().copied().max().unwrap_or(0);
    if charge.len() < i_count || discharge.len() < i_count {
        return Err(ReconstructError::FlowLength {
            expected: i_count,
            actual: charge.len().min(discharge.len()),
        });
    }
    let keep = 1.0 - tech.phi;
    let mut levels = Vec::with_capacity(sigma.len());
    let mut level = start_level;
    for &i in sigma {
        level = keep * level + tech.eta_charge * charge[i - 1] - discharge[i - 1] / tech.eta_discharge;
        levels.push(level);
    }
    Ok(HourlyLevels { levels, start_level })
}

/// Outcome of the hourly feasibility audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    /// Worst excursion outside `[0, E]`, in energy units.
    pub bound_violation: f64,
    /// Worst non-monotone move within a single storage step.
    pub monotonicity_violation: f64,
    /// `|L(T) - L(0)|` under the periodic boundary.
    pub periodicity_gap: f64,
}

/// Check reconstructed levels against capacity bounds (tolerance
/// `1e-6 * max(E, 1)`), within-step monotonicity (`1e-9` absolute, scaled by
/// the level magnitude), and periodicity.
pub fn audit(levels: &HourlyLevels, map: &StorageMap, energy_cap: f64) -> AuditReport {
    let tol = 1e-6 * energy_cap.max(1.0);
    let mut bound_violation: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for &l in &levels.levels {
        bound_violation = bound_violation.max(-l).max(l - energy_cap);
        scale = scale.max(l.abs());
    }

    // within a storage step the net flow is constant, so the level must move
    // monotonically toward the fixed point of the hourly balance
    let mut monotonicity_violation: f64 = 0.0;
    let move_at = |t: usize| {
        levels.levels[t] - if t == 0 { levels.start_level } else { levels.levels[t - 1] }
    };
    for t in 1..levels.levels.len() {
        if map.rho[t] == map.rho[t - 1] {
            let d_now = move_at(t);
            let d_prev = move_at(t - 1);
            if d_now * d_prev < 0.0 {
                monotonicity_violation = monotonicity_violation.max(d_now.abs().min(d_prev.abs()));
            }
        }
    }

    let periodicity_gap = (levels.levels[levels.levels.len() - 1] - levels.start_level).abs();
    AuditReport {
        passed: bound_violation <= tol
            && monotonicity_violation <= 1e-9 * scale.max(1.0)
            && periodicity_gap <= tol,
        bound_violation,
        monotonicity_violation,
        periodicity_gap,
    }
}

/// Full-horizon equivalent cycles: energy withdrawn from the store over the
/// year divided by the energy capacity. `weights[i]` is the number of
/// original hours mapped to representative step `i`.
pub fn storage_cycles(
    weights: &[usize],
    discharge: &[f64],
    tech: &StorageTech,
    energy_cap: f64,
) -> f64 {
    if energy_cap <= 0.0 {
        return 0.0;
    }
    let withdrawn: f64 = weights
        .iter()
        .zip(discharge)
        .map(|(&w, &hd)| w as f64 * hd / tech.eta_discharge)
        .sum();
    withdrawn / energy_cap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::build_storage_map;
    use alloc::string::ToString;
    use alloc::vec;

    fn tech(phi: f64, eta_c: f64, eta_d: f64) -> StorageTech {
        StorageTech {
            name: "s".to_string(),
            phi,
            eta_charge: eta_c,
            eta_discharge: eta_d,
            cost_energy: 0.0,
            cost_power: 0.0,
        }
    }

    #[test]
    fn replay_matches_hand_recursion() {
        // sigma = [1,2,2], charge at step 1, discharge at step 2
        let t = tech(0.1, 0.9, 0.8);
        let hl = reconstruct_hourly(&[1, 2, 2], &[2.0, 0.0], &[0.0, 0.4], &t, 1.0).unwrap();
        let l1 = 0.9 * 1.0 + 0.9 * 2.0;
        let l2 = 0.9 * l1 - 0.4 / 0.8;
        let l3 = 0.9 * l2 - 0.4 / 0.8;
        assert!((hl.levels[0] - l1).abs() < 1e-15);
        assert!((hl.levels[1] - l2).abs() < 1e-15);
        assert!((hl.levels[2] - l3).abs() < 1e-15);
    }

    #[test]
    fn boundary_levels_follow_storage_steps() {
        let map = build_storage_map(&[1, 2, 2, 3, 4, 4, 2, 5, 5, 5]).unwrap();
        let t = tech(0.0, 1.0, 1.0);
        let charge = vec![1.0, 0.5, 0.0, 0.0, 0.0];
        let discharge = vec![0.0, 0.0, 0.2, 0.3, 0.1];
        let sigma: Vec<usize> = map.rho.iter().map(|&j| map.theta[j - 1]).collect();
        let hl = reconstruct_hourly(&sigma, &charge, &discharge, &t, 0.5).unwrap();
        let b = hl.boundary_levels(&map);
        assert_eq!(b.len(), 6);
        // step ends at hours 1, 3, 4, 6, 7, 10
        for (j, &end_hour) in [1usize, 3, 4, 6, 7, 10].iter().enumerate() {
            assert_eq!(b[j], hl.levels[end_hour - 1]);
        }
    }

    #[test]
    fn audit_passes_clean_cycle() {
        // lossless battery: charge 2h, discharge 2h, periodic
        let map = build_storage_map(&[1, 1, 2, 2]).unwrap();
        let t = tech(0.0, 1.0, 1.0);
        let hl = reconstruct_hourly(&[1, 1, 2, 2], &[1.0, 0.0], &[0.0, 1.0], &t, 0.0).unwrap();
        let report = audit(&hl, &map, 2.0);
        assert!(report.passed, "{report:?}");
        assert_eq!(report.bound_violation, 0.0);
        assert_eq!(report.periodicity_gap, 0.0);
    }

    #[test]
    fn audit_flags_overflow_and_broken_periodicity() {
        let map = build_storage_map(&[1, 1, 2, 2]).unwrap();
        let t = tech(0.0, 1.0, 1.0);
        let hl = reconstruct_hourly(&[1, 1, 2, 2], &[1.0, 0.0], &[0.0, 0.5], &t, 0.0).unwrap();
        let report = audit(&hl, &map, 1.5);
        assert!(!report.passed);
        assert!((report.bound_violation - 0.5).abs() < 1e-12);
        assert!((report.periodicity_gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycles_count_discharged_energy() {
        let t = tech(0.0, 1.0, 0.8);
        // 4+6 hours of discharge at 0.4 delivered -> 10 * 0.4 / 0.8 = 5 withdrawn
        let c = storage_cycles(&[4, 6], &[0.4, 0.4], &t, 2.5);
        assert!((c - 2.0).abs() < 1e-12);
        assert_eq!(storage_cycles(&[4], &[1.0], &t, 0.0), 0.0);
    }

    #[test]
    fn flow_length_checked() {
        let t = tech(0.0, 1.0, 1.0);
        assert!(matches!(
            reconstruct_hourly(&[1, 2, 3], &[0.0, 0.0], &[0.0, 0.0], &t, 0.0),
            Err(ReconstructError::FlowLength { expected: 3, .. })
        ));
        assert!(matches!(
            reconstruct_hourly(&[], &[], &[], &t, 0.0),
            Err(ReconstructError::EmptySequence)
        ));
    }
}
