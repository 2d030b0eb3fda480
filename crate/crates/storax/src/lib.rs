//! Standard-library companion to `storax-core`: synthetic case generation, a
//! generic capacity-expansion LP around the core storage formulations, solver
//! backends, hourly audits, and the benchmark sweep driver used by the CLI.

#![deny(unsafe_code)]

pub mod bench;
pub mod casegen;
pub mod esom;
pub mod io;
pub mod reconstruct;

pub use casegen::{generate, CaseConfig, Variant};
pub use esom::{
    build_model, emit_lp, parse_lp, solve, LinearProgram, LpFormat, ModelInstance, Solution,
    SolveStatus, SolverBackend,
};
