//! Post-solve reconstruction and audit of every storage unit in a solved
//! model: expands the solved flows to hourly levels, checks bounds,
//! within-step monotonicity and periodicity, cross-checks the inter/intra
//! decomposition for the representative-day methods, and counts annual
//! cycles.

use serde::{Deserialize, Serialize};

use storax_core::aggregation::Aggregation;
use storax_core::formulation::Method;
use storax_core::reconstruct::{audit, reconstruct_hourly, storage_cycles, AuditReport};
use storax_core::sequence::build_storage_map;

use crate::esom::{ModelInstance, Solution, SolveStatus};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("solution status is not optimal")]
    NonOptimalInput,
    #[error("solution lacks variable {0}")]
    MissingVariable(String),
    #[error(transparent)]
    Reconstruct(#[from] storax_core::reconstruct::ReconstructError),
    #[error(transparent)]
    Sequence(#[from] storax_core::sequence::SequenceError),
}

/// Audit outcome for one (technology, node) storage unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitReport {
    pub key: String,
    pub energy_cap: f64,
    pub power_cap: f64,
    pub audit: AuditReport,
    /// Annual cycles; `None` when the unit's energy capacity is below 0.01%
    /// of the largest store in the solution.
    pub cycles: Option<f64>,
    /// Worst gap between the hourly replay and the solved inter/intra
    /// decomposition (representative-day methods only; 0 otherwise).
    pub decomposition_gap: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub units: Vec<UnitReport>,
    pub passed: bool,
}

/// Reconstruct and audit all storage units of a solved model.
/// `keep_levels` retains the full hourly trajectories in the report.
pub fn reconstruct_report(
    solution: &Solution,
    instance: &ModelInstance,
    agg: &Aggregation,
    method: Method,
    keep_levels: bool,
) -> Result<ReconstructionReport, ReportError> {
    if solution.status != SolveStatus::Optimal {
        return Err(ReportError::NonOptimalInput);
    }
    // the audit map mirrors the level index the method actually solved:
    // hourly for the fully resolved levels, merged steps otherwise
    let map = if method == Method::FullResolution {
        let identity: Vec<usize> = (1..=agg.horizon()).collect();
        build_storage_map(&identity)?
    } else {
        build_storage_map(&agg.sequence)?
    };
    let i_count = agg.step_count;
    let max_ecap = instance
        .storages
        .iter()
        .map(|s| solution.value(&format!("ecap({})", s.key())))
        .fold(0.0_f64, f64::max);

    let mut units = Vec::with_capacity(instance.storages.len());
    for s in &instance.storages {
        let key = s.key();
        let energy_cap = solution.value(&format!("ecap({key})"));
        let power_cap = solution.value(&format!("pcap({key})"));
        let charge: Vec<f64> =
            (1..=i_count).map(|i| solution.value(&format!("chg({key},{i})"))).collect();
        let discharge: Vec<f64> =
            (1..=i_count).map(|i| solution.value(&format!("dis({key},{i})"))).collect();

        // the hourly replay starts from the end-of-horizon level, which the
        // periodicity constraint makes the level before hour 1
        let start_name = match method {
            Method::Superposition | Method::MinMax => format!("{key}.Linter[1]"),
            _ => format!("{key}.L[{}]", map.step_count()),
        };
        let start_level = *solution
            .primal
            .get(&start_name)
            .ok_or_else(|| ReportError::MissingVariable(start_name))?;
        let hourly = reconstruct_hourly(&agg.sequence, &charge, &discharge, &s.tech, start_level)?;

        let decomposition_gap = match (method, agg.day_schedule.as_ref()) {
            (Method::Superposition | Method::MinMax, Some(schedule)) => {
                // combined level at end of hour h of day d:
                // Linter[d] * (1-phi)^h + Lintra[psi(d), h]
                let h_count = storax_core::timeseries::HOURS_PER_DAY;
                let mut worst = 0.0_f64;
                for (d0, &p) in schedule.day_sequence.iter().enumerate() {
                    let inter = solution.value(&format!("{key}.Linter[{}]", d0 + 1));
                    let mut decay = 1.0;
                    for h in 1..=h_count {
                        decay *= 1.0 - s.tech.phi;
                        let intra = solution.value(&format!("{key}.Lintra[{p},{h}]"));
                        let combined = inter * decay + intra;
                        worst = worst.max((combined - hourly.levels[d0 * h_count + h - 1]).abs());
                    }
                }
                worst
            }
            _ => 0.0,
        };

        let report = audit(&hourly, &map, energy_cap);
        let cycles = if max_ecap > 0.0 && energy_cap < 1e-4 * max_ecap {
            None
        } else {
            Some(storage_cycles(&agg.weights, &discharge, &s.tech, energy_cap))
        };
        units.push(UnitReport {
            key,
            energy_cap,
            power_cap,
            audit: report,
            cycles,
            decomposition_gap,
            levels: if keep_levels { hourly.levels } else { Vec::new() },
        });
    }
    let passed = units
        .iter()
        .all(|u| u.audit.passed && u.decomposition_gap <= 1e-6 * u.energy_cap.max(1.0));
    Ok(ReconstructionReport { units, passed })
}
