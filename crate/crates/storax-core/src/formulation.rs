//! Storage-level variables and constraints for the five benchmarked methods,
//! as abstract linear constraint sets plus closed-form size predictions.
//!
//! All builders are pure and emit one block per storage technology and node;
//! the caller instantiates the block per (technology, node) pair. Flow
//! variables ([`Var::Charge`], [`Var::Discharge`]) and the capacity variables
//! ([`Var::EnergyCap`], [`Var::PowerCap`]) are shared with the surrounding
//! model and are not declared here.
//!
//! Net charging is never a separate variable: every coupling row expands
//! `dH = eta_c * charge - discharge / eta_d` inline. Both sides of the level
//! bound `0 <= L <= E` are emitted as rows (the upper side must be, since `E`
//! is a variable), which matches the `3J`-per-block constraint accounting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::aggregation::{Aggregation, AggregationMode};
use crate::sequence::{count_storage_steps, StorageMap};
use crate::timeseries::HOURS_PER_DAY;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormulationError {
    #[error("self-discharge rate {phi} outside [0, 1) or duration {duration} < 1")]
    Domain { phi: f64, duration: usize },
    #[error("method {method:?} requires aggregation mode {expected:?}, got {actual:?}")]
    WrongMode { method: Method, expected: AggregationMode, actual: AggregationMode },
    #[error("storage map is not chronological (J = {j}, I = {i})")]
    NotChronological { j: usize, i: usize },
}

/// The five benchmarked storage representation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Proposed,
    Superposition,
    MinMax,
    FullResolution,
    Chrono,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::Superposition,
        Method::MinMax,
        Method::FullResolution,
        Method::Chrono,
    ];

    /// Aggregation mode the method is defined for.
    pub fn aggregation_mode(&self) -> AggregationMode {
        match self {
            Method::Proposed | Method::FullResolution => AggregationMode::Rh,
            Method::Superposition | Method::MinMax => AggregationMode::Rd,
            Method::Chrono => AggregationMode::Crh,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Superposition => "superposition",
            Method::MinMax => "minmax",
            Method::FullResolution => "full_resolution",
            Method::Chrono => "chrono",
        }
    }
}

/// A storage technology's loss and cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTech {
    pub name: String,
    /// Self-discharge rate per hour, in [0, 1).
    pub phi: f64,
    /// Charging efficiency, in (0, 1].
    pub eta_charge: f64,
    /// Discharging efficiency, in (0, 1].
    pub eta_discharge: f64,
    /// Annualized cost per MWh of energy capacity.
    pub cost_energy: f64,
    /// Annualized cost per MW of power capacity.
    pub cost_power: f64,
}

/// Geometric self-discharge coefficients over a storage step of duration `d`:
/// `decay = (1-phi)^d` and `accum = sum_{k=0}^{d-1} (1-phi)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomFactor {
    pub decay: f64,
    pub accum: f64,
}

/// Exact decay and accumulation coefficients. Direct summation for d <= 64,
/// closed form `(1 - (1-phi)^d) / phi` otherwise. If `(1-phi)^d` underflows,
/// decay clamps to 0 and accum to `1/phi`, the limit of the series.
pub fn geom_factor(phi: f64, duration: usize) -> Result<GeomFactor, FormulationError> {
    if !(0.0..1.0).contains(&phi) || duration < 1 {
        return Err(FormulationError::Domain { phi, duration });
    }
    let base = 1.0 - phi;
    let decay = pow_int(base, duration);
    let accum = if phi == 0.0 {
        duration as f64
    } else if duration <= 64 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for _ in 0..duration {
            sum += term;
            term *= base;
        }
        sum
    } else {
        // (1 - (1-phi)^d) / phi, written to avoid cancellation for small phi
        -libm::expm1(duration as f64 * libm::log1p(-phi)) / phi
    };
    Ok(GeomFactor { decay, accum })
}

/// Binary exponentiation; exact repeated multiplication semantics.
fn pow_int(base: f64, mut exp: usize) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            result *= b;
        }
        b *= b;
        exp >>= 1;
    }
    result
}

/// Variables referenced by storage constraint rows. `Level`, `InterLevel`,
/// `IntraLevel`, `IntraMax`, and `IntraMin` are local to one storage block;
/// the rest are shared model variables. All indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    /// Storage level at the end of storage step `j`.
    Level(usize),
    /// Inter-day level at the start of day `d`.
    InterLevel(usize),
    /// Intra-day level at the end of hour `h` of representative day `p`,
    /// starting from zero at the beginning of each representative day.
    IntraLevel(usize, usize),
    IntraMax(usize),
    IntraMin(usize),
    /// Charge flow at representative step `i` (shared).
    Charge(usize),
    /// Discharge flow at representative step `i` (shared).
    Discharge(usize),
    /// Energy capacity `E` (shared).
    EnergyCap,
    /// Power capacity `C` (shared).
    PowerCap,
}

impl Var {
    pub fn is_local(&self) -> bool {
        matches!(
            self,
            Var::Level(_) | Var::InterLevel(_) | Var::IntraLevel(..) | Var::IntraMax(_) | Var::IntraMin(_)
        )
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Level(j) => write!(f, "L[{j}]"),
            Var::InterLevel(d) => write!(f, "Linter[{d}]"),
            Var::IntraLevel(p, h) => write!(f, "Lintra[{p},{h}]"),
            Var::IntraMax(p) => write!(f, "Lmax[{p}]"),
            Var::IntraMin(p) => write!(f, "Lmin[{p}]"),
            Var::Charge(i) => write!(f, "Hc[{i}]"),
            Var::Discharge(i) => write!(f, "Hd[{i}]"),
            Var::EnergyCap => write!(f, "E"),
            Var::PowerCap => write!(f, "C"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var: Var,
    pub coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        })
    }
}

/// Row category, used for the size accounting. `Limit` and `Envelope` rows
/// together form the "storage level limit" count compared across methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Coupling,
    Limit,
    Envelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub terms: Vec<Term>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    /// Human-readable `lhs relop rhs` with canonical term ordering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (idx, term) in self.terms.iter().enumerate() {
            if idx == 0 {
                if term.coeff < 0.0 {
                    s.push_str("- ");
                }
            } else if term.coeff < 0.0 {
                s.push_str(" - ");
            } else {
                s.push_str(" + ");
            }
            let mag = term.coeff.abs();
            if mag == 1.0 {
                s.push_str(&format!("{}", term.var));
            } else {
                s.push_str(&format!("{} {}", mag, term.var));
            }
        }
        s.push_str(&format!(" {} {}", self.relation, self.rhs));
        s
    }
}

/// Declaration of one storage-local variable with bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub var: Var,
    pub lower: f64,
    pub upper: f64,
}

impl VarDecl {
    fn free(var: Var) -> Self {
        VarDecl { var, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }
}

/// Closed-form size prediction per (technology, node) block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizePrediction {
    pub variables: usize,
    pub constraints: usize,
    /// Rows of kind `Limit` or `Envelope` only.
    pub limit_constraints: usize,
}

/// The storage-level block of one (technology, node) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageFormulation {
    pub method: Method,
    pub variables: Vec<VarDecl>,
    pub rows: Vec<Row>,
    pub predicted: SizePrediction,
}

impl StorageFormulation {
    pub fn emitted_sizes(&self) -> SizePrediction {
        SizePrediction {
            variables: self.variables.len(),
            constraints: self.rows.len(),
            limit_constraints: self
                .rows
                .iter()
                .filter(|r| matches!(r.kind, RowKind::Limit | RowKind::Envelope))
                .count(),
        }
    }

    /// Emitted size must equal the prediction and every row must reference
    /// only declared local variables and in-range shared flows.
    pub fn validate(&self, i_count: usize) -> Result<(), String> {
        if self.emitted_sizes() != self.predicted {
            return Err(format!(
                "emitted sizes {:?} differ from predicted {:?}",
                self.emitted_sizes(),
                self.predicted
            ));
        }
        for row in &self.rows {
            if row.terms.is_empty() {
                return Err(format!("row {} is empty", row.name));
            }
            for term in &row.terms {
                let known = match term.var {
                    Var::Charge(i) | Var::Discharge(i) => i >= 1 && i <= i_count,
                    Var::EnergyCap | Var::PowerCap => true,
                    local => self.variables.iter().any(|v| v.var == local),
                };
                if !known {
                    return Err(format!("row {} references undeclared {}", row.name, term.var));
                }
            }
        }
        Ok(())
    }

    /// Debug dump, one constraint per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&row.render());
            out.push('\n');
        }
        out
    }
}

/// Canonicalize: sort by variable, combine duplicates, drop exact zeros.
fn canonical(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| a.var.cmp(&b.var));
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.var == t.var => last.coeff += t.coeff,
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

fn row(name: String, kind: RowKind, terms: Vec<Term>, relation: Relation, rhs: f64) -> Row {
    Row { name, kind, terms: canonical(terms), relation, rhs }
}

/// Net-charging terms `coeff * dH_i` expanded to flow variables.
fn net_charging(i: usize, coeff: f64, tech: &StorageTech) -> [Term; 2] {
    [
        Term { var: Var::Charge(i), coeff: coeff * tech.eta_charge },
        Term { var: Var::Discharge(i), coeff: -coeff / tech.eta_discharge },
    ]
}

/// Reduced representative-hour storage representation: one level variable per
/// storage step `j`, coupled with geometric self-discharge over `d_j`, with
/// periodicity from `j = J` back to `j = 1`.
pub fn build_proposed(map: &StorageMap, tech: &StorageTech) -> StorageFormulation {
    build_reduced(map, tech, Method::Proposed)
}

fn build_reduced(map: &StorageMap, tech: &StorageTech, method: Method) -> StorageFormulation {
    let j_count = map.step_count();
    let variables: Vec<VarDecl> = (1..=j_count).map(|j| VarDecl::free(Var::Level(j))).collect();
    let mut rows = Vec::with_capacity(3 * j_count);
    for j in 1..=j_count {
        let prev = if j == 1 { j_count } else { j - 1 };
        let g = geom_factor(tech.phi, map.durations[j - 1]).expect("valid storage map and phi");
        let mut terms = vec![
            Term { var: Var::Level(j), coeff: 1.0 },
            Term { var: Var::Level(prev), coeff: -g.decay },
        ];
        terms.extend(net_charging(map.theta[j - 1], -g.accum, tech));
        rows.push(row(format!("couple[{j}]"), RowKind::Coupling, terms, Relation::Eq, 0.0));
    }
    for j in 1..=j_count {
        rows.push(row(
            format!("lvl_lo[{j}]"),
            RowKind::Limit,
            vec![Term { var: Var::Level(j), coeff: 1.0 }],
            Relation::Ge,
            0.0,
        ));
        rows.push(row(
            format!("lvl_hi[{j}]"),
            RowKind::Limit,
            vec![
                Term { var: Var::Level(j), coeff: 1.0 },
                Term { var: Var::EnergyCap, coeff: -1.0 },
            ],
            Relation::Le,
            0.0,
        ));
    }
    StorageFormulation {
        method,
        variables,
        rows,
        predicted: SizePrediction {
            variables: j_count,
            constraints: 3 * j_count,
            limit_constraints: 2 * j_count,
        },
    }
}

/// Fully resolved storage level: `J = T` hourly level variables coupled
/// through `sigma`, regardless of the aggregation strength.
pub fn build_full_resolution(agg: &Aggregation, tech: &StorageTech) -> StorageFormulation {
    let t = agg.horizon();
    let map = StorageMap {
        rho: (1..=t).collect(),
        theta: agg.sequence.clone(),
        durations: vec![1; t],
    };
    build_reduced(&map, tech, Method::FullResolution)
}

/// Chronological storage representation: the special case `J = I` of the
/// reduced formulation, valid only for chronological maps.
pub fn build_chrono(map: &StorageMap, tech: &StorageTech) -> Result<StorageFormulation, FormulationError> {
    if !map.is_chronological() {
        return Err(FormulationError::NotChronological {
            j: map.step_count(),
            i: map.theta.iter().copied().max().unwrap_or(0),
        });
    }
    Ok(build_reduced(map, tech, Method::Chrono))
}

/// Storage level limit style for the superposition method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitVariant {
    /// Combined level bounded at every original hour.
    Hourly,
    /// Daily min/max envelope variables replace the hourly bounds.
    MinMax,
}

/// Exponent used on the inter-day level inside the hourly limit.
/// `Original` reproduces the known off-by-one `(1-phi)^H` error; it exists
/// only as a regression target and must not be used in production models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentRule {
    Corrected,
    Original,
}

/// Inter-/intra-day superposition for representative days, with the reduced
/// variable set (intra level at `H + 1` substituted away).
pub fn build_superposition(
    agg: &Aggregation,
    tech: &StorageTech,
    variant: LimitVariant,
    exponent: ExponentRule,
) -> Result<StorageFormulation, FormulationError> {
    let method = match variant {
        LimitVariant::Hourly => Method::Superposition,
        LimitVariant::MinMax => Method::MinMax,
    };
    let schedule = agg.day_schedule.as_ref().ok_or(FormulationError::WrongMode {
        method,
        expected: AggregationMode::Rd,
        actual: agg.mode,
    })?;
    let h_count = HOURS_PER_DAY;
    let p_count = schedule.day_count;
    let d_count = agg.horizon() / h_count;
    let psi = &schedule.day_sequence;
    let phi = tech.phi;
    let day_decay = pow_int(1.0 - phi, h_count);
    let rep_step = |p: usize, h: usize| (p - 1) * h_count + h;

    let mut variables: Vec<VarDecl> = Vec::new();
    for d in 1..=d_count {
        variables.push(VarDecl::free(Var::InterLevel(d)));
    }
    for p in 1..=p_count {
        for h in 1..=h_count {
            variables.push(VarDecl::free(Var::IntraLevel(p, h)));
        }
    }
    if variant == LimitVariant::MinMax {
        for p in 1..=p_count {
            variables.push(VarDecl::free(Var::IntraMax(p)));
            variables.push(VarDecl::free(Var::IntraMin(p)));
        }
    }

    let mut rows = Vec::new();
    // intra-day coupling from an implicit zero level at the start of each
    // representative day; the h = 1 row has no predecessor term
    for p in 1..=p_count {
        for h in 1..=h_count {
            let mut terms = vec![Term { var: Var::IntraLevel(p, h), coeff: 1.0 }];
            if h > 1 {
                terms.push(Term { var: Var::IntraLevel(p, h - 1), coeff: -(1.0 - phi) });
            }
            terms.extend(net_charging(rep_step(p, h), -1.0, tech));
            rows.push(row(
                format!("intra_couple[{p},{h}]"),
                RowKind::Coupling,
                terms,
                Relation::Eq,
                0.0,
            ));
        }
    }
    // inter-day coupling, wrapping the last day back to the first
    for d in 1..=d_count {
        let next = d % d_count + 1;
        let p = psi[d - 1];
        let terms = vec![
            Term { var: Var::InterLevel(next), coeff: 1.0 },
            Term { var: Var::InterLevel(d), coeff: -day_decay },
            Term { var: Var::IntraLevel(p, h_count), coeff: -1.0 },
        ];
        rows.push(row(format!("inter_couple[{d}]"), RowKind::Coupling, terms, Relation::Eq, 0.0));
    }
    match variant {
        LimitVariant::Hourly => {
            for d in 1..=d_count {
                let p = psi[d - 1];
                for h in 1..=h_count {
                    let decay_h = match exponent {
                        ExponentRule::Corrected => pow_int(1.0 - phi, h),
                        ExponentRule::Original => day_decay,
                    };
                    let combined = vec![
                        Term { var: Var::InterLevel(d), coeff: decay_h },
                        Term { var: Var::IntraLevel(p, h), coeff: 1.0 },
                    ];
                    rows.push(row(
                        format!("hour_lo[{d},{h}]"),
                        RowKind::Limit,
                        combined.clone(),
                        Relation::Ge,
                        0.0,
                    ));
                    let mut upper = combined;
                    upper.push(Term { var: Var::EnergyCap, coeff: -1.0 });
                    rows.push(row(
                        format!("hour_hi[{d},{h}]"),
                        RowKind::Limit,
                        upper,
                        Relation::Le,
                        0.0,
                    ));
                }
            }
        }
        LimitVariant::MinMax => {
            // Envelope variables in inter-level units: with inv_h =
            // (1-phi)^-h, the hourly limit decay_h*Inter + Intra(p,h) in
            // [0, E] is equivalent to Inter <= E - Lmax(psi(d)) and
            // Inter >= -Lmin(psi(d)) where
            //   Lmax(p) = max_h [ inv_h*Intra(p,h) - (inv_h - 1)*E ],
            //   Lmin(p) = min_h [ inv_h*Intra(p,h) ].
            // For phi = 0 this collapses to the plain min/max of the
            // intra-day level; for phi > 0 the rescaling keeps the envelope
            // exactly equivalent to the hourly limits, so the objective
            // stays a pure function of the aggregation.
            for p in 1..=p_count {
                for h in 1..=h_count {
                    let inv_h = 1.0 / pow_int(1.0 - phi, h);
                    rows.push(row(
                        format!("env_max[{p},{h}]"),
                        RowKind::Envelope,
                        vec![
                            Term { var: Var::IntraMax(p), coeff: 1.0 },
                            Term { var: Var::IntraLevel(p, h), coeff: -inv_h },
                            Term { var: Var::EnergyCap, coeff: inv_h - 1.0 },
                        ],
                        Relation::Ge,
                        0.0,
                    ));
                    rows.push(row(
                        format!("env_min[{p},{h}]"),
                        RowKind::Envelope,
                        vec![
                            Term { var: Var::IntraLevel(p, h), coeff: inv_h },
                            Term { var: Var::IntraMin(p), coeff: -1.0 },
                        ],
                        Relation::Ge,
                        0.0,
                    ));
                }
            }
            for d in 1..=d_count {
                let p = psi[d - 1];
                rows.push(row(
                    format!("day_hi[{d}]"),
                    RowKind::Limit,
                    vec![
                        Term { var: Var::InterLevel(d), coeff: 1.0 },
                        Term { var: Var::IntraMax(p), coeff: 1.0 },
                        Term { var: Var::EnergyCap, coeff: -1.0 },
                    ],
                    Relation::Le,
                    0.0,
                ));
                rows.push(row(
                    format!("day_lo[{d}]"),
                    RowKind::Limit,
                    vec![
                        Term { var: Var::InterLevel(d), coeff: 1.0 },
                        Term { var: Var::IntraMin(p), coeff: 1.0 },
                    ],
                    Relation::Ge,
                    0.0,
                ));
            }
        }
    }

    let predicted = predict_superposition(variant, p_count, d_count);
    Ok(StorageFormulation { method, variables, rows, predicted })
}

fn predict_superposition(variant: LimitVariant, p: usize, d: usize) -> SizePrediction {
    let h = HOURS_PER_DAY;
    match variant {
        // PH intra couplings (incl. the zero-start rows) + D inter couplings
        // + 2DH hourly limits = the reported 2DH + PH + D
        LimitVariant::Hourly => SizePrediction {
            variables: d + p * h,
            constraints: 2 * d * h + p * h + d,
            limit_constraints: 2 * d * h,
        },
        // the reported 3PH + 2D omits the D inter-day coupling rows; the
        // true emitted total is 3PH + 3D
        LimitVariant::MinMax => SizePrediction {
            variables: d + p * h + 2 * p,
            constraints: 3 * p * h + 3 * d,
            limit_constraints: 2 * p * h + 2 * d,
        },
    }
}

/// Closed-form block size per (technology, node) for a method on a given
/// aggregation, without building the formulation.
pub fn predict_sizes(method: Method, agg: &Aggregation) -> Result<SizePrediction, FormulationError> {
    let t = agg.horizon();
    match method {
        Method::FullResolution => Ok(SizePrediction {
            variables: t,
            constraints: 3 * t,
            limit_constraints: 2 * t,
        }),
        Method::Proposed => {
            let j = count_storage_steps(agg);
            Ok(SizePrediction { variables: j, constraints: 3 * j, limit_constraints: 2 * j })
        }
        Method::Chrono => {
            if agg.sequence.windows(2).any(|w| w[1] < w[0]) {
                return Err(FormulationError::WrongMode {
                    method,
                    expected: AggregationMode::Crh,
                    actual: agg.mode,
                });
            }
            let i = agg.step_count;
            Ok(SizePrediction { variables: i, constraints: 3 * i, limit_constraints: 2 * i })
        }
        Method::Superposition | Method::MinMax => {
            let schedule = agg.day_schedule.as_ref().ok_or(FormulationError::WrongMode {
                method,
                expected: AggregationMode::Rd,
                actual: agg.mode,
            })?;
            let variant = if method == Method::Superposition {
                LimitVariant::Hourly
            } else {
                LimitVariant::MinMax
            };
            Ok(predict_superposition(variant, schedule.day_count, t / HOURS_PER_DAY))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::build_storage_map;
    use alloc::string::ToString;

    fn tech(phi: f64, eta_c: f64, eta_d: f64) -> StorageTech {
        StorageTech {
            name: "bat".to_string(),
            phi,
            eta_charge: eta_c,
            eta_discharge: eta_d,
            cost_energy: 1.0,
            cost_power: 1.0,
        }
    }

    fn coeff(row: &Row, var: Var) -> f64 {
        row.terms.iter().find(|t| t.var == var).map(|t| t.coeff).unwrap_or(0.0)
    }

    #[test]
    fn geom_factor_examples() {
        let g = geom_factor(0.0, 5).unwrap();
        assert_eq!(g.decay, 1.0);
        assert_eq!(g.accum, 5.0);

        // hourly recursion oracle: 1 + 0.5 + 0.25
        let g = geom_factor(0.5, 3).unwrap();
        assert!((g.decay - 0.125).abs() < 1e-15);
        assert!((g.accum - 1.75).abs() < 1e-15);

        for phi in [0.0, 0.1, 0.9] {
            let g = geom_factor(phi, 1).unwrap();
            assert!((g.decay - (1.0 - phi)).abs() < 1e-15);
            assert_eq!(g.accum, 1.0);
        }

        assert!(geom_factor(1.0, 3).is_err());
        assert!(geom_factor(-0.1, 3).is_err());
        assert!(geom_factor(0.5, 0).is_err());
    }

    #[test]
    fn geom_factor_closed_form_matches_summation() {
        for phi in [1e-6, 1e-4, 0.05, 0.5, 0.999] {
            for d in [1usize, 2, 17, 64, 65, 100, 8760] {
                let g = geom_factor(phi, d).unwrap();
                let mut sum = 0.0;
                let mut term = 1.0;
                for _ in 0..d {
                    sum += term;
                    term *= 1.0 - phi;
                }
                assert!(
                    (g.accum - sum).abs() <= 1e-12 * sum.max(1.0),
                    "phi={phi} d={d}: {} vs {sum}",
                    g.accum
                );
                if phi > 0.0 && g.decay > 0.0 {
                    // recursion identity: accum * phi + decay = 1
                    assert!((g.accum * phi + g.decay - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn geom_factor_underflow_clamps_to_series_limit() {
        let g = geom_factor(0.9, 8760).unwrap();
        assert_eq!(g.decay, 0.0);
        assert!((g.accum - 1.0 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn proposed_coupling_row_hand_checked() {
        // hand-worked sigma: j = 6 spans hours 8..10 with
        // i = 5, so with phi = 0: L_6 = L_5 + 3 dH_5
        let map = build_storage_map(&[1, 2, 2, 3, 4, 4, 2, 5, 5, 5]).unwrap();
        let tech = tech(0.0, 0.9, 0.8);
        let f = build_proposed(&map, &tech);
        f.validate(5).unwrap();
        let r = &f.rows[5];
        assert_eq!(r.name, "couple[6]");
        assert_eq!(coeff(r, Var::Level(6)), 1.0);
        assert_eq!(coeff(r, Var::Level(5)), -1.0);
        assert_eq!(coeff(r, Var::Charge(5)), -3.0 * 0.9);
        assert_eq!(coeff(r, Var::Discharge(5)), 3.0 / 0.8);
    }

    #[test]
    fn proposed_periodicity_uses_first_duration() {
        let map = build_storage_map(&[1, 1, 1, 2, 2]).unwrap();
        let tech = tech(0.1, 1.0, 1.0);
        let f = build_proposed(&map, &tech);
        let g = geom_factor(0.1, 3).unwrap();
        let r = &f.rows[0];
        assert_eq!(r.name, "couple[1]");
        assert_eq!(coeff(r, Var::Level(1)), 1.0);
        assert!((coeff(r, Var::Level(2)) + g.decay).abs() < 1e-15);
        assert!((coeff(r, Var::Charge(1)) + g.accum).abs() < 1e-15);
    }

    #[test]
    fn proposed_single_step_self_coupling() {
        let map = build_storage_map(&[1, 1, 1, 1]).unwrap();
        let tech = tech(0.25, 1.0, 1.0);
        let f = build_proposed(&map, &tech);
        assert_eq!(f.rows.len(), 3);
        let g = geom_factor(0.25, 4).unwrap();
        let r = &f.rows[0];
        // combined coefficient 1 - decay on the single level variable
        assert!((coeff(r, Var::Level(1)) - (1.0 - g.decay)).abs() < 1e-15);
        assert!((coeff(r, Var::Charge(1)) + g.accum).abs() < 1e-15);
    }

    #[test]
    fn full_resolution_equals_proposed_on_identity() {
        use crate::aggregation::full_resolution;
        use crate::timeseries::{AttributeKind, AttributeSeries, FullTimeSeries};
        let series = FullTimeSeries::new(vec![AttributeSeries {
            name: "a".to_string(),
            node: "n".to_string(),
            kind: AttributeKind::Demand,
            values: (0..10).map(|v| v as f64).collect(),
        }])
        .unwrap();
        let agg = full_resolution(&series);
        let tech = tech(0.05, 0.9, 0.8);
        let full = build_full_resolution(&agg, &tech);
        let proposed = build_proposed(&build_storage_map(&agg.sequence).unwrap(), &tech);
        assert_eq!(full.rows, proposed.rows);
        assert_eq!(full.variables, proposed.variables);
        full.validate(10).unwrap();
    }

    #[test]
    fn chrono_requires_chronological_map() {
        let map = build_storage_map(&[1, 2, 1]).unwrap();
        assert!(matches!(
            build_chrono(&map, &tech(0.0, 1.0, 1.0)),
            Err(FormulationError::NotChronological { .. })
        ));

        // CRH sigma = [1,1,2,3,3,3], phi = 0: L_2 = L_1 + dH_2, L_3 = L_2 + 3 dH_3
        let map = build_storage_map(&[1, 1, 2, 3, 3, 3]).unwrap();
        let f = build_chrono(&map, &tech(0.0, 1.0, 1.0)).unwrap();
        f.validate(3).unwrap();
        assert_eq!(f.predicted, SizePrediction { variables: 3, constraints: 9, limit_constraints: 6 });
        let r2 = &f.rows[1];
        assert_eq!(coeff(r2, Var::Level(2)), 1.0);
        assert_eq!(coeff(r2, Var::Level(1)), -1.0);
        assert_eq!(coeff(r2, Var::Charge(2)), -1.0);
        let r3 = &f.rows[2];
        assert_eq!(coeff(r3, Var::Charge(3)), -3.0);
    }

    fn rd_aggregation(p_count: usize, d_count: usize) -> Aggregation {
        use crate::aggregation::DaySchedule;
        let h = HOURS_PER_DAY;
        let psi: Vec<usize> = (0..d_count).map(|d| d % p_count + 1).collect();
        let mut sequence = Vec::new();
        for &p in &psi {
            for hh in 1..=h {
                sequence.push((p - 1) * h + hh);
            }
        }
        let i_count = p_count * h;
        let mut weights = vec![0usize; i_count];
        for &i in &sequence {
            weights[i - 1] += 1;
        }
        Aggregation {
            mode: AggregationMode::Rd,
            step_count: i_count,
            sequence,
            weights,
            rep_values: vec![vec![0.0; i_count]],
            attribute_keys: vec!["a@n".to_string()],
            day_schedule: Some(DaySchedule { day_count: p_count, day_sequence: psi }),
        }
    }

    #[test]
    fn superposition_variable_counts_hand_checked() {
        let agg = rd_aggregation(1, 365);
        let t = tech(0.01, 0.95, 0.95);
        let hourly = build_superposition(&agg, &t, LimitVariant::Hourly, ExponentRule::Corrected).unwrap();
        assert_eq!(hourly.variables.len(), 365 + 24);
        hourly.validate(24).unwrap();
        let minmax = build_superposition(&agg, &t, LimitVariant::MinMax, ExponentRule::Corrected).unwrap();
        assert_eq!(minmax.variables.len(), 365 + 24 + 2);
        minmax.validate(24).unwrap();
    }

    #[test]
    fn superposition_emitted_equals_predicted() {
        for (p, d) in [(1usize, 3usize), (2, 5), (3, 3)] {
            let agg = rd_aggregation(p, d);
            let t = tech(0.02, 0.9, 0.9);
            for variant in [LimitVariant::Hourly, LimitVariant::MinMax] {
                let f = build_superposition(&agg, &t, variant, ExponentRule::Corrected).unwrap();
                assert_eq!(f.emitted_sizes(), f.predicted, "{variant:?} p={p} d={d}");
                f.validate(p * 24).unwrap();
            }
        }
    }

    #[test]
    fn superposition_rejects_non_rd() {
        let agg = Aggregation {
            mode: AggregationMode::Rh,
            step_count: 2,
            sequence: vec![1, 2, 1],
            weights: vec![2, 1],
            rep_values: vec![vec![0.0, 1.0]],
            attribute_keys: vec!["a@n".to_string()],
            day_schedule: None,
        };
        assert!(matches!(
            build_superposition(&agg, &tech(0.0, 1.0, 1.0), LimitVariant::Hourly, ExponentRule::Corrected),
            Err(FormulationError::WrongMode { .. })
        ));
    }

    #[test]
    fn hourly_limit_exponent_rules_differ() {
        let agg = rd_aggregation(1, 2);
        let t = tech(0.05, 1.0, 1.0);
        let corrected =
            build_superposition(&agg, &t, LimitVariant::Hourly, ExponentRule::Corrected).unwrap();
        let original =
            build_superposition(&agg, &t, LimitVariant::Hourly, ExponentRule::Original).unwrap();
        let find = |f: &StorageFormulation, name: &str| -> Row {
            f.rows.iter().find(|r| r.name == name).unwrap().clone()
        };
        let c = find(&corrected, "hour_hi[1,3]");
        assert!((coeff(&c, Var::InterLevel(1)) - pow_int(0.95, 3)).abs() < 1e-15);
        let o = find(&original, "hour_hi[1,3]");
        assert!((coeff(&o, Var::InterLevel(1)) - pow_int(0.95, 24)).abs() < 1e-15);
    }

    #[test]
    fn predict_sizes_full_resolution_and_chrono() {
        use crate::aggregation::{aggregate_crh, full_resolution};
        use crate::timeseries::{AttributeKind, AttributeSeries, FullTimeSeries};
        let series = FullTimeSeries::new(vec![AttributeSeries {
            name: "a".to_string(),
            node: "n".to_string(),
            kind: AttributeKind::Demand,
            values: (0..48).map(|v| ((v * 7) % 5) as f64).collect(),
        }])
        .unwrap();
        let full = full_resolution(&series);
        assert_eq!(
            predict_sizes(Method::FullResolution, &full).unwrap(),
            SizePrediction { variables: 48, constraints: 144, limit_constraints: 96 }
        );
        let crh = aggregate_crh(&series, 5).unwrap();
        assert_eq!(
            predict_sizes(Method::Chrono, &crh).unwrap(),
            SizePrediction { variables: 5, constraints: 15, limit_constraints: 10 }
        );
    }

    #[test]
    fn predict_matches_emitted_on_random_maps() {
        use crate::aggregation::aggregate_rh;
        use crate::timeseries::{AttributeKind, AttributeSeries, FullTimeSeries};
        let series = FullTimeSeries::new(vec![AttributeSeries {
            name: "a".to_string(),
            node: "n".to_string(),
            kind: AttributeKind::Demand,
            values: (0..120).map(|v| ((v * 37) % 11) as f64).collect(),
        }])
        .unwrap();
        let t = tech(0.01, 0.95, 0.9);
        for i in [2, 5, 11, 40] {
            let agg = aggregate_rh(&series, i).unwrap();
            let map = build_storage_map(&agg.sequence).unwrap();
            let f = build_proposed(&map, &t);
            assert_eq!(f.emitted_sizes(), predict_sizes(Method::Proposed, &agg).unwrap());
        }
    }

    #[test]
    fn render_is_canonical() {
        let map = build_storage_map(&[1, 1, 2]).unwrap();
        let f = build_proposed(&map, &tech(0.0, 1.0, 1.0));
        let text = f.render();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "L[1] - L[2] - 2 Hc[1] + 2 Hd[1] = 0");
    }
}
