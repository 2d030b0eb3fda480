//! Benchmark sweep: aggregation levels × storage methods, with solve-time
//! statistics, objective and capacity errors against the full-resolution
//! reference, size accounting, hourly audits, and CSV/JSON/SVG reports.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use storax_core::aggregation::{
    aggregate_crh, aggregate_rd, aggregate_rh, full_resolution, Aggregation, AggregationMode,
};
use storax_core::formulation::{predict_sizes, ExponentRule, Method};
use storax_core::sequence::count_storage_steps;
use storax_core::timeseries::{FullTimeSeries, HOURS_PER_DAY};

use crate::esom::{
    build_model, solve, EsomError, LinearProgram, ModelInstance, Solution, SolveStatus,
    SolverBackend,
};
use crate::reconstruct::reconstruct_report;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Esom(#[from] EsomError),
    #[error(transparent)]
    Aggregation(#[from] storax_core::aggregation::AggregationError),
    #[error("reference solve failed with status {0:?}")]
    ReferenceFailed(SolveStatus),
    #[error("no reference capacities to compare against")]
    EmptyReference,
    #[error("solution carries no duals")]
    MissingDuals,
    #[error("no records to report")]
    EmptyRecords,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    /// Representative-hour counts, ascending. RD methods use `level / 24`
    /// representative days.
    pub levels: Vec<usize>,
    pub methods: Vec<Method>,
    /// Timing repetitions per cell.
    pub repetitions: usize,
    /// Run cells one at a time for clean timing measurements.
    pub sequential_timing: bool,
    /// Worker pool width; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            levels: vec![24, 48, 96, 192, 384, 768, 1536, 3072, 6144, 8760],
            methods: Method::ALL.to_vec(),
            repetitions: 5,
            sequential_timing: false,
            workers: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self, horizon: usize) -> Result<(), BenchError> {
        if self.levels.is_empty() || self.methods.is_empty() || self.repetitions == 0 {
            return Err(BenchError::InvalidSpec("empty levels/methods/repetitions".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::InvalidSpec("levels must be strictly ascending".into()));
        }
        if self.levels.iter().any(|&l| l < 1 || l > horizon) {
            return Err(BenchError::InvalidSpec(format!("levels must lie in [1, {horizon}]")));
        }
        let has_rd = self
            .methods
            .iter()
            .any(|m| m.aggregation_mode() == AggregationMode::Rd);
        if has_rd && self.levels.iter().any(|&l| l < 24 || l % HOURS_PER_DAY != 0) {
            return Err(BenchError::InvalidSpec(
                "representative-day methods need levels that are multiples of 24".into(),
            ));
        }
        Ok(())
    }
}

/// One benchmark cell (or the reference row).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub level: usize,
    pub status: String,
    pub objective: f64,
    /// (objective - reference) / reference.
    pub signed_error: f64,
    pub abs_error: f64,
    pub build_seconds: f64,
    pub solve_mean_s: f64,
    pub solve_ci95_s: f64,
    pub total_vars: usize,
    pub total_cons: usize,
    /// Storage-block sizes summed over all (technology, node) units.
    pub storage_vars: usize,
    pub storage_cons: usize,
    /// Storage steps J of the sequence at this level.
    pub storage_steps: usize,
    /// Representative steps I of the aggregation.
    pub rep_steps: usize,
    pub capacities: BTreeMap<String, f64>,
    pub weighted_cap_error: f64,
    pub audit_pass: bool,
    pub cycles: BTreeMap<String, f64>,
    /// Hourly shadow prices sorted descending (kept out of serialized
    /// output; used for the price-duration plot).
    #[serde(skip)]
    pub price_duration: Vec<f64>,
}

impl BenchRecord {
    pub fn ok(&self) -> bool {
        self.status == "optimal" && self.audit_pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub reference: BenchRecord,
    pub records: Vec<BenchRecord>,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.reference.ok() && self.records.iter().all(|r| r.ok())
    }
}

/// 97.5% Student-t quantile for small samples (df = n - 1).
fn t_quantile(df: usize) -> f64 {
    const TABLE: [f64; 10] =
        [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if df == 0 {
        0.0
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

fn mean_ci(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, t_quantile(samples.len() - 1) * (var / n).sqrt())
}

/// Capacity-weighted mean of absolute relative capacity errors over
/// generator technologies with positive reference capacity.
pub fn weighted_capacity_error(
    caps: &BTreeMap<String, f64>,
    reference: &BTreeMap<String, f64>,
) -> Result<f64, BenchError> {
    let mut weight = 0.0;
    let mut total = 0.0;
    for (tech, &cap_ref) in reference {
        if !tech.starts_with("gen:") || cap_ref <= 0.0 {
            continue;
        }
        let cap = caps.get(tech).copied().unwrap_or(0.0);
        weight += cap_ref;
        total += cap_ref * ((cap - cap_ref) / cap_ref).abs();
    }
    if weight == 0.0 {
        return Err(BenchError::EmptyReference);
    }
    Ok(total / weight)
}

/// Hourly shadow prices: balance dual / w_i, expanded through sigma to the
/// full horizon, averaged over nodes, sorted descending.
pub fn price_duration(
    solution: &Solution,
    instance: &ModelInstance,
    agg: &Aggregation,
) -> Result<Vec<f64>, BenchError> {
    if solution.duals.is_empty() {
        return Err(BenchError::MissingDuals);
    }
    let mut prices = vec![0.0_f64; agg.horizon()];
    for node in &instance.nodes {
        for (t, &i) in agg.sequence.iter().enumerate() {
            let dual = solution.dual(&format!("bal({node},{i})"));
            prices[t] += dual / agg.weights[i - 1] as f64;
        }
    }
    let n = instance.nodes.len() as f64;
    for p in &mut prices {
        *p /= n;
    }
    prices.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(prices)
}

fn capacities_of(solution: &Solution, instance: &ModelInstance) -> BTreeMap<String, f64> {
    let mut caps: BTreeMap<String, f64> = BTreeMap::new();
    for g in &instance.generators {
        *caps.entry(format!("gen:{}", g.name)).or_default() +=
            solution.value(&format!("cap({}@{})", g.name, g.node));
    }
    for s in &instance.storages {
        *caps.entry(format!("ecap:{}", s.tech.name)).or_default() +=
            solution.value(&format!("ecap({})", s.key()));
        *caps.entry(format!("pcap:{}", s.tech.name)).or_default() +=
            solution.value(&format!("pcap({})", s.key()));
    }
    caps
}

fn aggregation_for(
    series: &FullTimeSeries,
    mode: AggregationMode,
    level: usize,
) -> Result<Aggregation, BenchError> {
    Ok(match mode {
        AggregationMode::Rh => aggregate_rh(series, level)?,
        AggregationMode::Rd => aggregate_rd(series, level / HOURS_PER_DAY)?,
        AggregationMode::Crh => aggregate_crh(series, level)?,
        AggregationMode::Full => full_resolution(series),
    })
}

/// Build, solve (`repetitions` times for timing), audit, and measure one cell.
fn run_cell(
    instance: &ModelInstance,
    agg: &Aggregation,
    method: Method,
    method_label: &str,
    level: usize,
    repetitions: usize,
    backend: &SolverBackend,
) -> BenchRecord {
    let mut record = BenchRecord {
        method: method_label.to_string(),
        level,
        status: "error".into(),
        objective: f64::NAN,
        signed_error: f64::NAN,
        abs_error: f64::NAN,
        build_seconds: 0.0,
        solve_mean_s: f64::NAN,
        solve_ci95_s: f64::NAN,
        total_vars: 0,
        total_cons: 0,
        storage_vars: 0,
        storage_cons: 0,
        storage_steps: count_storage_steps(agg),
        rep_steps: agg.step_count,
        capacities: BTreeMap::new(),
        weighted_cap_error: f64::NAN,
        audit_pass: false,
        cycles: BTreeMap::new(),
        price_duration: Vec::new(),
    };
    let build_start = std::time::Instant::now();
    let lp: LinearProgram = match build_model(instance, agg, method, ExponentRule::Corrected) {
        Ok(lp) => lp,
        Err(e) => {
            record.status = format!("error: {e}");
            return record;
        }
    };
    record.build_seconds = build_start.elapsed().as_secs_f64();
    record.total_vars = lp.variables.len();
    record.total_cons = lp.rows.len();
    if let Ok(block) = predict_sizes(method, agg) {
        record.storage_vars = block.variables * instance.storages.len();
        record.storage_cons = block.constraints * instance.storages.len();
    }

    let mut times = Vec::with_capacity(repetitions);
    let mut solution: Option<Solution> = None;
    for _ in 0..repetitions {
        match solve(&lp, backend) {
            Ok(sol) => {
                times.push(sol.solve_seconds);
                if solution.is_none() {
                    solution = Some(sol);
                }
            }
            Err(e) => {
                record.status = format!("error: {e}");
                return record;
            }
        }
    }
    let (mean, ci) = mean_ci(&times);
    record.solve_mean_s = mean;
    record.solve_ci95_s = ci;
    let sol = solution.expect("repetitions >= 1");
    record.status = match sol.status {
        SolveStatus::Optimal => "optimal".into(),
        SolveStatus::Infeasible => "infeasible".into(),
        SolveStatus::Unbounded => "unbounded".into(),
        SolveStatus::Error => "error".into(),
    };
    if sol.status != SolveStatus::Optimal {
        return record;
    }
    record.objective = sol.objective;
    record.capacities = capacities_of(&sol, instance);
    if let Ok(report) = reconstruct_report(&sol, instance, agg, method, false) {
        record.audit_pass = report.passed;
        for unit in &report.units {
            if let Some(c) = unit.cycles {
                *record.cycles.entry(unit.key.clone()).or_default() += c;
            }
        }
    }
    if let Ok(prices) = price_duration(&sol, instance, agg) {
        record.price_duration = prices;
    }
    record
}

/// Run the reference once, then every (method, level) cell. Aggregations are
/// computed once per (mode, level) and shared, so method pairs of the same
/// mode see identical inputs. Failed cells are flagged, not fatal.
pub fn run_sweep(
    instance: &ModelInstance,
    series: &FullTimeSeries,
    spec: &SweepSpec,
    backend: &SolverBackend,
) -> Result<SweepResult, BenchError> {
    spec.validate(series.horizon())?;

    // full-resolution reference
    let full_agg = full_resolution(series);
    let mut reference = run_cell(
        instance,
        &full_agg,
        Method::FullResolution,
        "reference",
        series.horizon(),
        1,
        backend,
    );
    if reference.status != "optimal" {
        return Err(BenchError::ReferenceFailed(SolveStatus::Error));
    }
    reference.signed_error = 0.0;
    reference.abs_error = 0.0;
    reference.weighted_cap_error = 0.0;

    // shared aggregations per (mode, level)
    let mut aggregations: HashMap<(AggregationMode, usize), Aggregation> = HashMap::new();
    for &level in &spec.levels {
        for method in &spec.methods {
            let mode = method.aggregation_mode();
            if let std::collections::hash_map::Entry::Vacant(e) = aggregations.entry((mode, level))
            {
                e.insert(aggregation_for(series, mode, level)?);
            }
        }
    }

    let cells: Vec<(Method, usize)> = spec
        .levels
        .iter()
        .flat_map(|&l| spec.methods.iter().map(move |&m| (m, l)))
        .collect();
    let run = |&(method, level): &(Method, usize)| -> BenchRecord {
        let agg = &aggregations[&(method.aggregation_mode(), level)];
        run_cell(instance, agg, method, method.label(), level, spec.repetitions, backend)
    };
    let mut records: Vec<BenchRecord> = if spec.sequential_timing {
        cells.iter().map(run).collect()
    } else if let Some(workers) = spec.workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        pool.install(|| cells.par_iter().map(run).collect())
    } else {
        cells.par_iter().map(run).collect()
    };

    for record in &mut records {
        if record.status == "optimal" {
            record.signed_error = (record.objective - reference.objective) / reference.objective;
            record.abs_error = record.signed_error.abs();
            record.weighted_cap_error =
                weighted_capacity_error(&record.capacities, &reference.capacities)
                    .unwrap_or(f64::NAN);
        }
    }
    records.sort_by(|a, b| (a.level, &a.method).cmp(&(b.level, &b.method)));
    Ok(SweepResult { reference, records })
}

/// Write `records.csv`, `records.json`, and the SVG plots. Errors out before
/// writing anything if there are no records.
pub fn emit_report(result: &SweepResult, outdir: &Path) -> Result<(), BenchError> {
    if result.records.is_empty() {
        return Err(BenchError::EmptyRecords);
    }
    std::fs::create_dir_all(outdir)?;
    let all: Vec<&BenchRecord> =
        std::iter::once(&result.reference).chain(result.records.iter()).collect();

    // stable column set: fixed fields, then the union of map keys
    let mut cap_keys: Vec<String> = Vec::new();
    let mut cycle_keys: Vec<String> = Vec::new();
    for r in &all {
        for k in r.capacities.keys() {
            if !cap_keys.contains(k) {
                cap_keys.push(k.clone());
            }
        }
        for k in r.cycles.keys() {
            if !cycle_keys.contains(k) {
                cycle_keys.push(k.clone());
            }
        }
    }
    cap_keys.sort();
    cycle_keys.sort();
    let mut w = csv::Writer::from_path(outdir.join("records.csv"))?;
    let mut header = vec![
        "method".to_string(),
        "level".into(),
        "status".into(),
        "objective".into(),
        "signed_error".into(),
        "abs_error".into(),
        "build_seconds".into(),
        "solve_mean_s".into(),
        "solve_ci95_s".into(),
        "total_vars".into(),
        "total_cons".into(),
        "storage_vars".into(),
        "storage_cons".into(),
        "storage_steps".into(),
        "rep_steps".into(),
        "weighted_cap_error".into(),
        "audit_pass".into(),
    ];
    header.extend(cap_keys.iter().map(|k| format!("cap:{k}")));
    header.extend(cycle_keys.iter().map(|k| format!("cycles:{k}")));
    w.write_record(&header)?;
    for r in &all {
        let mut rec = vec![
            r.method.clone(),
            r.level.to_string(),
            r.status.clone(),
            format!("{}", r.objective),
            format!("{}", r.signed_error),
            format!("{}", r.abs_error),
            format!("{}", r.build_seconds),
            format!("{}", r.solve_mean_s),
            format!("{}", r.solve_ci95_s),
            r.total_vars.to_string(),
            r.total_cons.to_string(),
            r.storage_vars.to_string(),
            r.storage_cons.to_string(),
            r.storage_steps.to_string(),
            r.rep_steps.to_string(),
            format!("{}", r.weighted_cap_error),
            r.audit_pass.to_string(),
        ];
        rec.extend(
            cap_keys.iter().map(|k| format!("{}", r.capacities.get(k).copied().unwrap_or(f64::NAN))),
        );
        rec.extend(
            cycle_keys.iter().map(|k| format!("{}", r.cycles.get(k).copied().unwrap_or(f64::NAN))),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;

    let json = serde_json::to_string_pretty(result)?;
    std::fs::write(outdir.join("records.json"), json)?;

    emit_plots(result, outdir)?;
    Ok(())
}

fn emit_plots(result: &SweepResult, outdir: &Path) -> Result<(), BenchError> {
    let methods: Vec<String> = {
        let mut m: Vec<String> = result.records.iter().map(|r| r.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    let per_method = |f: &dyn Fn(&BenchRecord) -> Option<(f64, f64)>| -> Vec<(String, Vec<(f64, f64)>)> {
        methods
            .iter()
            .map(|m| {
                let mut pts: Vec<(f64, f64)> = result
                    .records
                    .iter()
                    .filter(|r| &r.method == m && r.status == "optimal")
                    .filter_map(f)
                    .collect();
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (m.clone(), pts)
            })
            .collect()
    };

    let scatter = per_method(&|r| {
        (r.solve_mean_s > 0.0).then(|| (r.solve_mean_s.log10(), r.abs_error))
    });
    svg_plot(
        &outdir.join("time_vs_error.svg"),
        "Solve time vs absolute relative objective error",
        "log10 solve time [s]",
        "abs objective error",
        &scatter,
        false,
    )?;

    let cap_err = per_method(&|r| Some((r.level as f64, r.weighted_cap_error)));
    svg_plot(
        &outdir.join("capacity_error.svg"),
        "Weighted-average absolute capacity error",
        "representative hours",
        "capacity error",
        &cap_err,
        true,
    )?;

    let counts = per_method(&|r| Some((r.level as f64, r.storage_cons as f64)));
    svg_plot(
        &outdir.join("counts.svg"),
        "Storage constraint counts",
        "representative hours",
        "constraints",
        &counts,
        true,
    )?;

    let mut price_series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    price_series.push((
        "reference".into(),
        duration_points(&result.reference.price_duration),
    ));
    for m in &methods {
        if let Some(r) = result
            .records
            .iter()
            .filter(|r| &r.method == m && !r.price_duration.is_empty())
            .max_by_key(|r| r.level)
        {
            price_series.push((format!("{m}@{}", r.level), duration_points(&r.price_duration)));
        }
    }
    svg_plot(
        &outdir.join("price_duration.svg"),
        "Price duration curves",
        "hour rank",
        "shadow price",
        &price_series,
        true,
    )?;
    Ok(())
}

fn duration_points(prices: &[f64]) -> Vec<(f64, f64)> {
    // thin to at most ~500 points to keep the SVG small
    let stride = (prices.len() / 500).max(1);
    prices
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, &p)| (i as f64, p))
        .collect()
}

const PALETTE: [&str; 8] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Minimal SVG 1.1 line/scatter plot: one polyline (or point set) per
/// series, a legend, and min/max axis labels.
fn svg_plot(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
    lines: bool,
) -> Result<(), BenchError> {
    let (width, height, ml, mr, mt, mb) = (720.0, 480.0, 70.0, 160.0, 40.0, 50.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let finite = |v: f64| v.is_finite();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).filter(|&v| finite(v)).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).filter(|&v| finite(v)).collect();
    let (x0, x1) = min_max(&xs);
    let (y0, y1) = min_max(&ys);
    let sx = |x: f64| ml + (x - x0) / (x1 - x0).max(1e-300) * (width - ml - mr);
    let sy = |y: f64| height - mb - (y - y0) / (y1 - y0).max(1e-300) * (height - mt - mb);

    let mut out = String::new();
    out.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        height - mb,
        width - mr
    ));
    out.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        height - mb
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        (ml + width - mr) / 2.0,
        height - 12.0,
        xml_escape(xlabel)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (mt + height - mb) / 2.0,
        xml_escape(ylabel)
    ));
    for (v, x, y, anchor) in [
        (x0, ml, height - mb + 16.0, "middle"),
        (x1, width - mr, height - mb + 16.0, "middle"),
        (y0, ml - 6.0, height - mb, "end"),
        (y1, ml - 6.0, mt + 4.0, "end"),
    ] {
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"{anchor}\">{v:.4}</text>\n"
        ));
    }
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let clean: Vec<(f64, f64)> =
            pts.iter().copied().filter(|&(x, y)| finite(x) && finite(y)).collect();
        if lines && clean.len() > 1 {
            let path_pts: Vec<String> =
                clean.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path_pts.join(" ")
            ));
        }
        for &(x, y) in &clean {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        let ly = mt + 16.0 * k as f64;
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{ly}\" r=\"4\" fill=\"{color}\"/>\n",
            width - mr + 12.0
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            width - mr + 22.0,
            ly + 4.0,
            xml_escape(label)
        ));
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_capacity_error_hand_values() {
        let reference: BTreeMap<String, f64> =
            [("gen:a".to_string(), 100.0), ("gen:b".to_string(), 300.0)].into();
        let caps: BTreeMap<String, f64> =
            [("gen:a".to_string(), 110.0), ("gen:b".to_string(), 240.0)].into();
        let e = weighted_capacity_error(&caps, &reference).unwrap();
        assert!((e - 0.175).abs() < 1e-12);
        assert_eq!(weighted_capacity_error(&reference.clone(), &reference).unwrap(), 0.0);
        let single: BTreeMap<String, f64> = [("gen:a".to_string(), 100.0)].into();
        let off: BTreeMap<String, f64> = [("gen:a".to_string(), 150.0)].into();
        assert!((weighted_capacity_error(&off, &single).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            weighted_capacity_error(&caps, &BTreeMap::new()),
            Err(BenchError::EmptyReference)
        ));
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::default();
        assert!(spec.validate(8760).is_ok());
        spec.levels = vec![96, 24];
        assert!(spec.validate(8760).is_err());
        spec.levels = vec![25];
        assert!(spec.validate(8760).is_err()); // RD methods present, not a multiple of 24
        spec.methods = vec![Method::Proposed];
        assert!(spec.validate(8760).is_ok());
        spec.repetitions = 0;
        assert!(spec.validate(8760).is_err());
    }

    #[test]
    fn ci_half_width_uses_student_t() {
        let (mean, ci) = mean_ci(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(mean, 3.0);
        // sd = sqrt(2.5), se = sd/sqrt(5), t(4) = 2.776
        let expected = 2.776 * (2.5_f64 / 5.0).sqrt();
        assert!((ci - expected).abs() < 1e-9);
        assert_eq!(mean_ci(&[7.0]).1, 0.0);
    }

    #[test]
    fn svg_is_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        svg_plot(
            &path,
            "t<&>",
            "x",
            "y",
            &[("a".into(), vec![(0.0, 0.0), (1.0, 2.0)])],
            true,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<?xml"));
        assert!(text.contains("&lt;&amp;&gt;"));
        // crude well-formedness: balanced element counts
        assert_eq!(text.matches("<svg").count(), 1);
        assert_eq!(text.matches("</svg>").count(), 1);
        assert_eq!(text.matches("<text").count(), text.matches("</text>").count());
    }
}
