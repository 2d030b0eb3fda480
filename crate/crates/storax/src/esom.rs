//! Generic linear capacity-expansion model: conversion, storage, transport,
//! and nodal demand balance assembled around any storage formulation, plus
//! LP-file emission and solver backends (embedded HiGHS or an external solver
//! process).
//!
//! Variable and constraint names are human-readable and deterministic; the
//! emitted files use positional names (`x0`, `c0`, ...) with the name maps
//! kept on the [`LinearProgram`], so any solver's solution file maps back
//! unambiguously.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Bound;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use storax_core::aggregation::Aggregation;
use storax_core::formulation::{
    build_chrono, build_full_resolution, build_proposed, build_superposition, ExponentRule,
    FormulationError, LimitVariant, Method, Relation, StorageTech, Var,
};
use storax_core::sequence::{build_storage_map, SequenceError};

#[derive(Debug, thiserror::Error)]
pub enum EsomError {
    #[error("attribute {0} not present in the aggregation")]
    UnknownAttribute(String),
    #[error("node {0} referenced but not declared")]
    UnknownNode(String),
    #[error("negative cost on {0}")]
    NegativeCost(String),
    #[error("transport loss {loss} on {line} outside [0, 1)")]
    InvalidLoss { line: String, loss: f64 },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("duplicate variable name {0}")]
    DuplicateVariable(String),
    #[error("constraint {0} has no terms")]
    EmptyRow(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver not found: {0}")]
    SolverNotFound(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One conversion technology at one node. `cf_attr` names the capacity-factor
/// attribute (`name@node` resolved against the node); `None` means fully
/// dispatchable (cf = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub node: String,
    /// Annualized cost per MW of capacity.
    pub cost_capacity: f64,
    /// Cost per MWh generated.
    pub cost_var: f64,
    pub cf_attr: Option<String>,
    pub max_capacity: Option<f64>,
}

/// One storage technology installed at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub tech: StorageTech,
    pub node: String,
}

impl StorageUnit {
    pub fn key(&self) -> String {
        format!("{}@{}", self.tech.name, self.node)
    }
}

/// Transshipment line with symmetric capacity; the loss applies to the
/// receiving end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportLine {
    pub from: String,
    pub to: String,
    pub cost_capacity: f64,
    pub loss: f64,
}

impl TransportLine {
    pub fn key(&self) -> String {
        format!("{}-{}", self.from, self.to)
    }
}

/// A complete case: topology, technology menu, and the name of the demand
/// attribute (resolved per node as `demand_attr@node`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub name: String,
    pub nodes: Vec<String>,
    pub generators: Vec<Generator>,
    pub storages: Vec<StorageUnit>,
    pub lines: Vec<TransportLine>,
    pub demand_attr: String,
}

impl ModelInstance {
    /// Structural checks plus resolution of every attribute reference against
    /// the aggregation.
    pub fn validate(&self, agg: &Aggregation) -> Result<(), EsomError> {
        for node in &self.nodes {
            let key = format!("{}@{}", self.demand_attr, node);
            if agg.rep_values_for(&key).is_none() {
                return Err(EsomError::UnknownAttribute(key));
            }
        }
        for g in &self.generators {
            if !self.nodes.contains(&g.node) {
                return Err(EsomError::UnknownNode(g.node.clone()));
            }
            if g.cost_capacity < 0.0 || g.cost_var < 0.0 {
                return Err(EsomError::NegativeCost(format!("{}@{}", g.name, g.node)));
            }
            if let Some(cf) = &g.cf_attr {
                let key = format!("{cf}@{}", g.node);
                if agg.rep_values_for(&key).is_none() {
                    return Err(EsomError::UnknownAttribute(key));
                }
            }
        }
        for s in &self.storages {
            if !self.nodes.contains(&s.node) {
                return Err(EsomError::UnknownNode(s.node.clone()));
            }
            if s.tech.cost_energy < 0.0 || s.tech.cost_power < 0.0 {
                return Err(EsomError::NegativeCost(s.key()));
            }
        }
        for l in &self.lines {
            if !self.nodes.contains(&l.from) {
                return Err(EsomError::UnknownNode(l.from.clone()));
            }
            if !self.nodes.contains(&l.to) {
                return Err(EsomError::UnknownNode(l.to.clone()));
            }
            if l.cost_capacity < 0.0 {
                return Err(EsomError::NegativeCost(l.key()));
            }
            if !(0.0..1.0).contains(&l.loss) {
                return Err(EsomError::InvalidLoss { line: l.key(), loss: l.loss });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpVariable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub name: String,
    /// (variable index, coefficient) pairs, sorted by index.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Sparse LP with named variables and rows; always a minimization.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub variables: Vec<LpVariable>,
    pub rows: Vec<LpRow>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: String,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> Result<usize, EsomError> {
        if self.index.contains_key(&name) {
            return Err(EsomError::DuplicateVariable(name));
        }
        let idx = self.variables.len();
        self.index.insert(name.clone(), idx);
        self.variables.push(LpVariable { name, lower, upper, objective });
        Ok(idx)
    }

    pub fn add_row(
        &mut self,
        name: String,
        mut terms: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, EsomError> {
        if terms.is_empty() {
            return Err(EsomError::EmptyRow(name));
        }
        terms.sort_by_key(|&(i, _)| i);
        let idx = self.rows.len();
        self.rows.push(LpRow { name, terms, relation, rhs });
        Ok(idx)
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Structural check: row term indices in range, rows non-empty, objective
    /// well-defined (finite coefficients).
    pub fn validate(&self) -> Result<(), EsomError> {
        for v in &self.variables {
            if !v.objective.is_finite() {
                return Err(EsomError::NegativeCost(v.name.clone()));
            }
        }
        for r in &self.rows {
            if r.terms.is_empty() {
                return Err(EsomError::EmptyRow(r.name.clone()));
            }
            if r.terms.iter().any(|&(i, _)| i >= self.variables.len()) {
                return Err(EsomError::EmptyRow(format!("{} (bad index)", r.name)));
            }
        }
        Ok(())
    }

    fn rebuild_index(&mut self) {
        self.index =
            self.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    }
}

/// Assemble the capacity-expansion LP for one instance, aggregation, and
/// storage method. `exponent` only affects the Superposition hourly limits
/// and must be `Corrected` outside the regression test.
pub fn build_model(
    instance: &ModelInstance,
    agg: &Aggregation,
    method: Method,
    exponent: ExponentRule,
) -> Result<LinearProgram, EsomError> {
    instance.validate(agg)?;
    let i_count = agg.step_count;
    let weights = &agg.weights;
    let mut lp = LinearProgram::new();

    // capacity and dispatch variables per generator
    for g in &instance.generators {
        let key = format!("{}@{}", g.name, g.node);
        lp.add_variable(
            format!("cap({key})"),
            0.0,
            g.max_capacity.unwrap_or(f64::INFINITY),
            g.cost_capacity,
        )?;
        for i in 1..=i_count {
            lp.add_variable(
                format!("gen({key},{i})"),
                0.0,
                f64::INFINITY,
                weights[i - 1] as f64 * g.cost_var,
            )?;
        }
    }
    // storage capacities and flows
    for s in &instance.storages {
        let key = s.key();
        lp.add_variable(format!("ecap({key})"), 0.0, f64::INFINITY, s.tech.cost_energy)?;
        lp.add_variable(format!("pcap({key})"), 0.0, f64::INFINITY, s.tech.cost_power)?;
        for i in 1..=i_count {
            lp.add_variable(format!("chg({key},{i})"), 0.0, f64::INFINITY, 0.0)?;
            lp.add_variable(format!("dis({key},{i})"), 0.0, f64::INFINITY, 0.0)?;
        }
    }
    // transport capacity and directed flows
    for l in &instance.lines {
        let key = l.key();
        lp.add_variable(format!("tcap({key})"), 0.0, f64::INFINITY, l.cost_capacity)?;
        for i in 1..=i_count {
            lp.add_variable(format!("fwd({key},{i})"), 0.0, f64::INFINITY, 0.0)?;
            lp.add_variable(format!("bwd({key},{i})"), 0.0, f64::INFINITY, 0.0)?;
        }
    }

    let col = |lp: &LinearProgram, name: &str| -> usize {
        lp.variable_index(name).expect("variable declared above")
    };

    // nodal balance per (node, representative step)
    for node in &instance.nodes {
        let demand = agg
            .rep_values_for(&format!("{}@{node}", instance.demand_attr))
            .expect("validated above");
        for i in 1..=i_count {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for g in instance.generators.iter().filter(|g| &g.node == node) {
                terms.push((col(&lp, &format!("gen({}@{},{i})", g.name, g.node)), 1.0));
            }
            for s in instance.storages.iter().filter(|s| &s.node == node) {
                terms.push((col(&lp, &format!("dis({},{i})", s.key())), 1.0));
                terms.push((col(&lp, &format!("chg({},{i})", s.key())), -1.0));
            }
            for l in &instance.lines {
                let key = l.key();
                if &l.to == node {
                    terms.push((col(&lp, &format!("fwd({key},{i})")), 1.0 - l.loss));
                    terms.push((col(&lp, &format!("bwd({key},{i})")), -1.0));
                }
                if &l.from == node {
                    terms.push((col(&lp, &format!("fwd({key},{i})")), -1.0));
                    terms.push((col(&lp, &format!("bwd({key},{i})")), 1.0 - l.loss));
                }
            }
            lp.add_row(format!("bal({node},{i})"), terms, Relation::Eq, demand[i - 1])?;
        }
    }

    // generation limited by capacity times capacity factor
    for g in &instance.generators {
        let key = format!("{}@{}", g.name, g.node);
        let cf = g
            .cf_attr
            .as_ref()
            .map(|a| agg.rep_values_for(&format!("{a}@{}", g.node)).expect("validated above"));
        let cap_col = col(&lp, &format!("cap({key})"));
        for i in 1..=i_count {
            let factor = cf.map_or(1.0, |v| v[i - 1]);
            lp.add_row(
                format!("genlim({key},{i})"),
                vec![(col(&lp, &format!("gen({key},{i})")), 1.0), (cap_col, -factor)],
                Relation::Le,
                0.0,
            )?;
        }
    }

    // combined charge/discharge power limit
    for s in &instance.storages {
        let key = s.key();
        let pcap_col = col(&lp, &format!("pcap({key})"));
        for i in 1..=i_count {
            lp.add_row(
                format!("plim({key},{i})"),
                vec![
                    (col(&lp, &format!("chg({key},{i})")), 1.0),
                    (col(&lp, &format!("dis({key},{i})")), 1.0),
                    (pcap_col, -1.0),
                ],
                Relation::Le,
                0.0,
            )?;
        }
    }

    // symmetric line capacity over both directions
    for l in &instance.lines {
        let key = l.key();
        let tcap_col = col(&lp, &format!("tcap({key})"));
        for i in 1..=i_count {
            lp.add_row(
                format!("flowlim({key},{i})"),
                vec![
                    (col(&lp, &format!("fwd({key},{i})")), 1.0),
                    (col(&lp, &format!("bwd({key},{i})")), 1.0),
                    (tcap_col, -1.0),
                ],
                Relation::Le,
                0.0,
            )?;
        }
    }

    // storage-level block per unit, from the chosen formulation
    for s in &instance.storages {
        let key = s.key();
        let block = match method {
            Method::Proposed => build_proposed(&build_storage_map(&agg.sequence)?, &s.tech),
            Method::FullResolution => build_full_resolution(agg, &s.tech),
            Method::Chrono => build_chrono(&build_storage_map(&agg.sequence)?, &s.tech)?,
            Method::Superposition => {
                build_superposition(agg, &s.tech, LimitVariant::Hourly, exponent)?
            }
            Method::MinMax => build_superposition(agg, &s.tech, LimitVariant::MinMax, exponent)?,
        };
        block.validate(i_count).map_err(EsomError::SolverFailure)?;
        for decl in &block.variables {
            lp.add_variable(format!("{key}.{}", decl.var), decl.lower, decl.upper, 0.0)?;
        }
        for brow in &block.rows {
            let terms = brow
                .terms
                .iter()
                .map(|t| {
                    let idx = match t.var {
                        Var::Charge(i) => col(&lp, &format!("chg({key},{i})")),
                        Var::Discharge(i) => col(&lp, &format!("dis({key},{i})")),
                        Var::EnergyCap => col(&lp, &format!("ecap({key})")),
                        Var::PowerCap => col(&lp, &format!("pcap({key})")),
                        local => col(&lp, &format!("{key}.{local}")),
                    };
                    (idx, t.coeff)
                })
                .collect();
            lp.add_row(format!("{key}.{}", brow.name), terms, brow.relation, brow.rhs)?;
        }
    }

    lp.validate()?;
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpFormat {
    LpFile,
    Mps,
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Serialize to CPLEX-LP or fixed MPS text with positional names (`x{i}`,
/// `c{j}`) in declaration order, so output is deterministic and solution
/// files map back by position.
pub fn emit_lp(lp: &LinearProgram, path: &Path, format: LpFormat) -> Result<(), EsomError> {
    let text = match format {
        LpFormat::LpFile => render_lp(lp),
        LpFormat::Mps => render_mps(lp),
    };
    std::fs::write(path, text)?;
    Ok(())
}

fn render_lp(lp: &LinearProgram) -> String {
    let mut out = String::from("\\ storax linear program\nMinimize\n obj:");
    let mut on_line = 0usize;
    for (i, v) in lp.variables.iter().enumerate() {
        if v.objective != 0.0 {
            if on_line == 8 {
                out.push_str("\n   ");
                on_line = 0;
            }
            let c = v.objective;
            if c < 0.0 {
                let _ = write!(out, " - {} x{i}", -c);
            } else {
                let _ = write!(out, " + {c} x{i}");
            }
            on_line += 1;
        }
    }
    out.push_str("\nSubject To\n");
    for (j, r) in lp.rows.iter().enumerate() {
        let _ = write!(out, " c{j}:");
        let mut on_line = 0usize;
        for &(i, c) in &r.terms {
            if on_line == 8 {
                out.push_str("\n   ");
                on_line = 0;
            }
            if c < 0.0 {
                let _ = write!(out, " - {} x{i}", -c);
            } else {
                let _ = write!(out, " + {c} x{i}");
            }
            on_line += 1;
        }
        let _ = writeln!(out, " {} {}", r.relation, r.rhs);
    }
    out.push_str("Bounds\n");
    for (i, v) in lp.variables.iter().enumerate() {
        if v.lower == 0.0 && v.upper == f64::INFINITY {
            continue;
        }
        let _ = writeln!(out, " {} <= x{i} <= {}", fmt_bound(v.lower), fmt_bound(v.upper));
    }
    out.push_str("End\n");
    out
}

fn render_mps(lp: &LinearProgram) -> String {
    let mut out = String::from("NAME          STORAX\nROWS\n N  COST\n");
    for (j, r) in lp.rows.iter().enumerate() {
        let tag = match r.relation {
            Relation::Eq => 'E',
            Relation::Le => 'L',
            Relation::Ge => 'G',
        };
        let _ = writeln!(out, " {tag}  c{j}");
    }
    // column-major entries: collect per variable
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.variables.len()];
    for (j, r) in lp.rows.iter().enumerate() {
        for &(i, c) in &r.terms {
            by_col[i].push((j, c));
        }
    }
    out.push_str("COLUMNS\n");
    for (i, v) in lp.variables.iter().enumerate() {
        let name = format!("x{i}");
        if v.objective != 0.0 {
            let _ = writeln!(out, "    {:<10}{:<10}{}", name, "COST", v.objective);
        }
        for &(j, c) in &by_col[i] {
            let _ = writeln!(out, "    {:<10}{:<10}{}", name, format!("c{j}"), c);
        }
    }
    out.push_str("RHS\n");
    for (j, r) in lp.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            let _ = writeln!(out, "    {:<10}{:<10}{}", "RHS", format!("c{j}"), r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for (i, v) in lp.variables.iter().enumerate() {
        let name = format!("x{i}");
        if v.lower == 0.0 && v.upper == f64::INFINITY {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " FR {:<10}{name}", "BND");
            continue;
        }
        if v.lower != 0.0 {
            if v.lower == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI {:<10}{name}", "BND");
            } else {
                let _ = writeln!(out, " LO {:<10}{:<10}{}", "BND", name, v.lower);
            }
        }
        if v.upper != f64::INFINITY {
            let _ = writeln!(out, " UP {:<10}{:<10}{}", "BND", name, v.upper);
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Parse the CPLEX-LP dialect produced by [`emit_lp`]. Variable and row
/// names are the positional ones from the file; bounds default to
/// `[0, +inf)`.
pub fn parse_lp(text: &str) -> Result<LinearProgram, EsomError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Rows,
        Bounds,
        Done,
    }
    let err = |line: usize, message: &str| EsomError::Parse { line, message: message.into() };

    // merge wrapped continuation lines into logical statements
    let mut section = Section::Preamble;
    let mut objective_text = String::new();
    let mut row_texts: Vec<String> = Vec::new();
    let mut bound_texts: Vec<(usize, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower == "minimize" || lower == "minimise" {
            section = Section::Objective;
            continue;
        }
        if lower == "subject to" || lower == "st" || lower == "s.t." {
            section = Section::Rows;
            continue;
        }
        if lower == "bounds" {
            section = Section::Bounds;
            continue;
        }
        if lower == "end" {
            section = Section::Done;
            continue;
        }
        let starts_statement = line.contains(':')
            && line.split(':').next().is_some_and(|n| !n.trim().contains(' '));
        match section {
            Section::Preamble | Section::Done => {
                return Err(err(lineno + 1, "content outside any section"))
            }
            Section::Objective => {
                objective_text.push(' ');
                objective_text.push_str(line);
            }
            Section::Rows => {
                if starts_statement {
                    row_texts.push(line.to_string());
                } else {
                    let last = row_texts
                        .last_mut()
                        .ok_or_else(|| err(lineno + 1, "continuation before any row"))?;
                    last.push(' ');
                    last.push_str(line);
                }
            }
            Section::Bounds => bound_texts.push((lineno + 1, line.to_string())),
        }
    }

    fn parse_terms(tokens: &[&str]) -> Result<Vec<(String, f64)>, String> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        let mut coeff: Option<f64> = None;
        for &tok in tokens {
            match tok {
                "+" => {}
                "-" => sign = -sign,
                _ => {
                    if let Ok(v) = tok.parse::<f64>() {
                        if coeff.is_some() {
                            return Err(format!("two coefficients before a variable: {tok}"));
                        }
                        coeff = Some(v);
                    } else {
                        terms.push((tok.to_string(), sign * coeff.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                }
            }
        }
        if coeff.is_some() {
            return Err("dangling coefficient".into());
        }
        Ok(terms)
    }

    let mut lp = LinearProgram::new();
    let var_of = |lp: &mut LinearProgram, name: &str| -> usize {
        match lp.variable_index(name) {
            Some(i) => i,
            None => lp
                .add_variable(name.to_string(), 0.0, f64::INFINITY, 0.0)
                .expect("fresh name"),
        }
    };

    let obj_body = objective_text.split_once(':').map(|(_, b)| b).unwrap_or(&objective_text);
    let tokens: Vec<&str> = obj_body.split_whitespace().collect();
    for (name, c) in parse_terms(&tokens).map_err(|m| err(0, &m))? {
        let i = var_of(&mut lp, &name);
        lp.variables[i].objective += c;
    }

    for (k, row_text) in row_texts.iter().enumerate() {
        let (name, body) = row_text.split_once(':').ok_or_else(|| err(0, "row without name"))?;
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let relpos = tokens
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "=" | "<" | ">"))
            .ok_or_else(|| err(0, &format!("row {k} lacks a relation")))?;
        let relation = match tokens[relpos] {
            "<=" | "<" => Relation::Le,
            ">=" | ">" => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs: f64 = tokens
            .get(relpos + 1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(0, &format!("row {k} lacks a numeric rhs")))?;
        let terms = parse_terms(&tokens[..relpos]).map_err(|m| err(0, &m))?;
        let terms = terms
            .into_iter()
            .map(|(n, c)| (var_of(&mut lp, &n), c))
            .collect();
        lp.add_row(name.trim().to_string(), terms, relation, rhs)?;
    }

    let parse_bound_value = |tok: &str| -> Option<f64> {
        match tok {
            "+inf" | "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            _ => tok.parse().ok(),
        }
    };
    for (lineno, btext) in bound_texts {
        let tokens: Vec<&str> = btext.split_whitespace().collect();
        match tokens.as_slice() {
            [name, "free"] => {
                let i = var_of(&mut lp, name);
                lp.variables[i].lower = f64::NEG_INFINITY;
                lp.variables[i].upper = f64::INFINITY;
            }
            [name, "<=", up] => {
                let i = var_of(&mut lp, name);
                lp.variables[i].upper =
                    parse_bound_value(up).ok_or_else(|| err(lineno, "bad bound"))?;
            }
            [lo, "<=", name, "<=", up] => {
                let i = var_of(&mut lp, name);
                lp.variables[i].lower =
                    parse_bound_value(lo).ok_or_else(|| err(lineno, "bad bound"))?;
                lp.variables[i].upper =
                    parse_bound_value(up).ok_or_else(|| err(lineno, "bad bound"))?;
            }
            _ => return Err(err(lineno, "unrecognized bounds line")),
        }
    }
    lp.rebuild_index();
    lp.validate()?;
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Error,
}

/// Solver result with primal values by variable name and duals by constraint
/// name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal: HashMap<String, f64>,
    pub duals: HashMap<String, f64>,
    pub solve_seconds: f64,
}

impl Solution {
    pub fn value(&self, name: &str) -> f64 {
        self.primal.get(name).copied().unwrap_or(0.0)
    }

    pub fn dual(&self, name: &str) -> f64 {
        self.duals.get(name).copied().unwrap_or(0.0)
    }
}

/// How to solve: in-process HiGHS, or an external solver invoked on an
/// emitted LP file. The external command is a whitespace-split template with
/// `{lp}` and `{sol}` placeholders, e.g.
/// `highs {lp} --solution_file {sol}`; the solution file must use the HiGHS
/// text format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverBackend {
    Embedded,
    External { command: String },
}

/// `STORAX_SOLVER` selects an external solver command template; unset means
/// the embedded solver.
pub fn backend_from_env() -> SolverBackend {
    match std::env::var("STORAX_SOLVER") {
        Ok(cmd) if !cmd.trim().is_empty() => SolverBackend::External { command: cmd },
        _ => SolverBackend::Embedded,
    }
}

pub fn solve(lp: &LinearProgram, backend: &SolverBackend) -> Result<Solution, EsomError> {
    match backend {
        SolverBackend::Embedded => solve_embedded(lp),
        SolverBackend::External { command } => solve_external(lp, command),
    }
}

fn solve_embedded(lp: &LinearProgram) -> Result<Solution, EsomError> {
    use highs::{HighsModelStatus, RowProblem, Sense};
    let mut problem = RowProblem::default();
    let cols: Vec<highs::Col> = lp
        .variables
        .iter()
        .map(|v| problem.add_column(v.objective, (Bound::Included(v.lower), Bound::Included(v.upper))))
        .collect();
    for r in &lp.rows {
        let terms: Vec<(highs::Col, f64)> =
            r.terms.iter().map(|&(i, c)| (cols[i], c)).collect();
        match r.relation {
            Relation::Eq => problem.add_row(r.rhs..=r.rhs, terms),
            Relation::Le => problem.add_row(..=r.rhs, terms),
            Relation::Ge => problem.add_row(r.rhs.., terms),
        };
    }
    let mut model = problem.optimise(Sense::Minimise);
    if std::env::var_os("STORAX_SOLVER_LOG").is_none() {
        model.make_quiet();
    }
    // Long storage-level chains degenerate badly under simplex; interior
    // point with crossover is far faster on the bigger instances.
    if lp.rows.len() >= 20_000 {
        model.set_option("solver", "ipm");
        // a basic (vertex) solution is required: the hourly audit replays
        // the level recursion, which amplifies interior-point residuals
        model.set_option("run_crossover", "on");
    }
    let start = Instant::now();
    let solved = model.solve();
    let solve_seconds = start.elapsed().as_secs_f64();
    let status = match solved.status() {
        HighsModelStatus::Optimal => SolveStatus::Optimal,
        HighsModelStatus::Infeasible => SolveStatus::Infeasible,
        HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
            SolveStatus::Unbounded
        }
        other => {
            return Err(EsomError::SolverFailure(format!("{other:?}")));
        }
    };
    if status != SolveStatus::Optimal {
        return Ok(Solution {
            status,
            objective: f64::NAN,
            primal: HashMap::new(),
            duals: HashMap::new(),
            solve_seconds,
        });
    }
    let sol = solved.get_solution();
    let primal = lp
        .variables
        .iter()
        .zip(sol.columns())
        .map(|(v, &x)| (v.name.clone(), x))
        .collect();
    let duals = lp
        .rows
        .iter()
        .zip(sol.dual_rows())
        .map(|(r, &y)| (r.name.clone(), y))
        .collect();
    Ok(Solution { status, objective: solved.objective_value(), primal, duals, solve_seconds })
}

fn solve_external(lp: &LinearProgram, command: &str) -> Result<Solution, EsomError> {
    let dir = std::env::temp_dir().join(format!("storax-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let lp_path = dir.join(format!("model-{:p}.lp", lp as *const _));
    let sol_path = dir.join(format!("model-{:p}.sol", lp as *const _));
    emit_lp(lp, &lp_path, LpFormat::LpFile)?;
    let parts: Vec<String> = command
        .split_whitespace()
        .map(|p| {
            p.replace("{lp}", &lp_path.to_string_lossy())
                .replace("{sol}", &sol_path.to_string_lossy())
        })
        .collect();
    let (prog, args) = parts.split_first().ok_or_else(|| {
        EsomError::SolverNotFound("empty solver command".into())
    })?;
    let start = Instant::now();
    let output = Command::new(prog).args(args).output().map_err(|e| {
        EsomError::SolverNotFound(format!("{prog}: {e}"))
    })?;
    let solve_seconds = start.elapsed().as_secs_f64();
    if !output.status.success() {
        return Err(EsomError::SolverFailure(format!(
            "{prog} exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    let text = std::fs::read_to_string(&sol_path)?;
    let _ = std::fs::remove_file(&lp_path);
    let _ = std::fs::remove_file(&sol_path);
    parse_highs_solution(lp, &text, solve_seconds)
}

/// Parse the HiGHS text solution-file format (`--solution_file` output),
/// mapping positional names back to the LP's internal names.
fn parse_highs_solution(
    lp: &LinearProgram,
    text: &str,
    solve_seconds: f64,
) -> Result<Solution, EsomError> {
    let mut status = SolveStatus::Error;
    let mut objective = f64::NAN;
    let mut primal = HashMap::new();
    let mut duals = HashMap::new();
    let mut in_dual = false;
    let mut reading: Option<(bool, usize)> = None; // (is_rows, remaining)
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("Model status:") {
            status = match rest.trim() {
                "Optimal" => SolveStatus::Optimal,
                "Infeasible" => SolveStatus::Infeasible,
                "Unbounded" => SolveStatus::Unbounded,
                _ => SolveStatus::Error,
            };
            continue;
        }
        if let Some(rest) = line.strip_prefix("Objective") {
            if let Ok(v) = rest.trim().parse() {
                objective = v;
            }
            continue;
        }
        if line.starts_with("# Dual solution values") {
            in_dual = true;
            continue;
        }
        if line.starts_with("# Basis") {
            break;
        }
        if let Some(rest) = line.strip_prefix("# Columns") {
            reading = rest.trim().parse().ok().map(|n| (false, n));
            continue;
        }
        if let Some(rest) = line.strip_prefix("# Rows") {
            reading = rest.trim().parse().ok().map(|n| (true, n));
            continue;
        }
        if let Some((is_rows, remaining)) = reading {
            if remaining == 0 {
                reading = None;
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(name), Some(value)) = (it.next(), it.next()) else {
                continue;
            };
            let Ok(value) = value.parse::<f64>() else { continue };
            let idx: Option<usize> = name
                .strip_prefix(if is_rows { 'c' } else { 'x' })
                .and_then(|s| s.parse().ok());
            match (is_rows, in_dual, idx) {
                (false, false, Some(i)) if i < lp.variables.len() => {
                    primal.insert(lp.variables[i].name.clone(), value);
                }
                (true, true, Some(j)) if j < lp.rows.len() => {
                    duals.insert(lp.rows[j].name.clone(), value);
                }
                _ => {}
            }
            reading = Some((is_rows, remaining - 1));
        }
    }
    if status == SolveStatus::Optimal && primal.is_empty() {
        return Err(EsomError::SolverFailure("solution file has no primal values".into()));
    }
    Ok(Solution { status, objective, primal, duals, solve_seconds })
}
