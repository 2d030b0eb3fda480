//! Deterministic synthetic case studies with daily and seasonal structure,
//! tuned so that the cost-optimal solution uses both a short-cycling battery
//! and a seasonal hydrogen store.
//!
//! All randomness comes from a single xorshift64* stream defined by the
//! update equations
//!
//! ```text
//! x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27;
//! output = x * 2685821657736338717
//! ```
//!
//! so the fixtures are byte-identical across runs, platforms, and
//! re-implementations. Uniform doubles take the top 53 bits of the output.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use storax_core::formulation::StorageTech;
use storax_core::timeseries::{AttributeKind, AttributeSeries, FullTimeSeries, HOURS_PER_DAY};

use crate::esom::{Generator, ModelInstance, StorageUnit, TransportLine};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("at least one node required")]
    ZeroNodes,
    #[error("horizon {0} is not a positive multiple of 24")]
    BadHorizon(usize),
}

/// The benchmark case variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Standard,
    /// No lines between nodes.
    NoTransport,
    /// No dispatchable backstop generator (the flexible fallback removed).
    NoDispatchable,
    /// No winter demand amplification; purely diurnal demand structure.
    ElectricityOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Standard,
        Variant::NoTransport,
        Variant::NoDispatchable,
        Variant::ElectricityOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::NoTransport => "no_transport",
            Variant::NoDispatchable => "no_dispatchable",
            Variant::ElectricityOnly => "electricity_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseConfig {
    pub seed: u64,
    pub num_nodes: usize,
    pub horizon: usize,
    pub variant: Variant,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig { seed: 1, num_nodes: 3, horizon: 8760, variant: Variant::Standard }
    }
}

/// xorshift64* with the multiplier 2685821657736338717 (0x2545F4914F6CDD1D).
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        // the all-zero state is a fixed point; displace it deterministically
        Xorshift64Star { state: if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1), 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

const DAYS_PER_YEAR: f64 = 365.0;
/// Base demand per node, MW.
const BASE_DEMAND: f64 = 100.0;

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Generate the hourly series and the matching instance for a config.
pub fn generate(config: &CaseConfig) -> Result<(FullTimeSeries, ModelInstance), ConfigError> {
    if config.num_nodes == 0 {
        return Err(ConfigError::ZeroNodes);
    }
    if config.horizon == 0 || config.horizon % HOURS_PER_DAY != 0 {
        return Err(ConfigError::BadHorizon(config.horizon));
    }
    let mut rng = Xorshift64Star::new(config.seed);
    let t_count = config.horizon;
    let nodes: Vec<String> = (1..=config.num_nodes).map(|k| format!("n{k}")).collect();

    let mut attributes = Vec::new();
    for (k, node) in nodes.iter().enumerate() {
        let node_scale = 1.0 - 0.08 * k as f64;
        let mut solar = Vec::with_capacity(t_count);
        let mut wind = Vec::with_capacity(t_count);
        let mut demand = Vec::with_capacity(t_count);
        let mut wind_ar = 0.0;
        for t in 0..t_count {
            let d = (t / HOURS_PER_DAY) as f64;
            let h = (t % HOURS_PER_DAY) as f64;
            // solar: summer-peaked seasonal envelope times a diurnal bell
            let season = 0.55 + 0.45 * (TAU * (d - 172.0) / DAYS_PER_YEAR).cos();
            let bell = (core::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0);
            solar.push(clamp01(season * bell * (0.85 + 0.3 * rng.next_f64())));
            // wind: winter-peaked seasonal level plus multi-day AR(1) noise
            wind_ar = 0.96 * wind_ar + 0.08 * rng.next_signed();
            let wind_season = 0.38 + 0.22 * (TAU * (d - 15.0) / DAYS_PER_YEAR).cos();
            wind.push(clamp01(wind_season + 0.9 * wind_ar));
            // demand: diurnal profile, winter amplification, light noise
            let diurnal = 1.0 - 0.15 * (TAU * (h - 14.0) / 24.0).cos();
            let amp = if config.variant == Variant::ElectricityOnly {
                1.0
            } else {
                1.0 + 0.25 * (1.0 + (TAU * (d - 15.0) / DAYS_PER_YEAR).cos())
            };
            demand.push(BASE_DEMAND * node_scale * diurnal * amp * (0.98 + 0.04 * rng.next_f64()));
        }
        attributes.push(AttributeSeries {
            name: "demand".into(),
            node: node.clone(),
            kind: AttributeKind::Demand,
            values: demand,
        });
        attributes.push(AttributeSeries {
            name: "solar".into(),
            node: node.clone(),
            kind: AttributeKind::CapacityFactor,
            values: solar,
        });
        attributes.push(AttributeSeries {
            name: "wind".into(),
            node: node.clone(),
            kind: AttributeKind::CapacityFactor,
            values: wind,
        });
    }
    let series = FullTimeSeries::new(attributes).expect("generated series is valid");

    // annualized costs, currency per MW-year / MWh-year / MWh
    let mut generators = Vec::new();
    let mut storages = Vec::new();
    for node in &nodes {
        generators.push(Generator {
            name: "solar".into(),
            node: node.clone(),
            cost_capacity: 50_000.0,
            cost_var: 0.0,
            cf_attr: Some("solar".into()),
            max_capacity: None,
        });
        generators.push(Generator {
            name: "wind".into(),
            node: node.clone(),
            cost_capacity: 90_000.0,
            cost_var: 0.0,
            cf_attr: Some("wind".into()),
            max_capacity: None,
        });
        if config.variant != Variant::NoDispatchable {
            generators.push(Generator {
                name: "backstop".into(),
                node: node.clone(),
                cost_capacity: 30_000.0,
                cost_var: 400.0,
                cf_attr: None,
                max_capacity: None,
            });
        }
        // battery: expensive energy, cheap power, fast self-discharge
        storages.push(StorageUnit {
            tech: StorageTech {
                name: "battery".into(),
                phi: 1e-4,
                eta_charge: 0.95,
                eta_discharge: 0.95,
                cost_energy: 15_000.0,
                cost_power: 4_000.0,
            },
            node: node.clone(),
        });
        // hydrogen: cheap energy, expensive power, slow self-discharge
        storages.push(StorageUnit {
            tech: StorageTech {
                name: "hydrogen".into(),
                phi: 1e-5,
                eta_charge: 0.70,
                eta_discharge: 0.60,
                cost_energy: 300.0,
                cost_power: 50_000.0,
            },
            node: node.clone(),
        });
    }
    let lines = if config.variant == Variant::NoTransport {
        Vec::new()
    } else {
        nodes
            .windows(2)
            .map(|w| TransportLine {
                from: w[0].clone(),
                to: w[1].clone(),
                cost_capacity: 20_000.0,
                loss: 0.03,
            })
            .collect()
    };
    let instance = ModelInstance {
        name: format!("{}-seed{}", config.variant.label(), config.seed),
        nodes,
        generators,
        storages,
        lines,
        demand_attr: "demand".into(),
    };
    Ok((series, instance))
}
