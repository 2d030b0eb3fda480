//! Core algorithms for representative-period time series aggregation and
//! storage-level modeling in linear capacity-expansion problems.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure computation:
//!
//! * [`timeseries`] — validated hourly input series and min-max normalization,
//! * [`aggregation`] — representative days (RD), representative hours (RH),
//!   and chronological representative hours (CRH) via agglomerative clustering,
//! * [`sequence`] — reconstruction of the storage-level time step chronology
//!   from the aggregation sequence,
//! * [`formulation`] — the five benchmarked storage-level constraint sets and
//!   their closed-form size predictions,
//! * [`reconstruct`] — ex-post hourly storage-level reconstruction and audit.
//!
//! File formats, model assembly, and solver bindings live in the companion
//! `storax` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod aggregation;
pub mod formulation;
pub mod reconstruct;
pub mod sequence;
pub mod timeseries;

pub use aggregation::{Aggregation, AggregationMode};
pub use formulation::{Method, StorageFormulation, StorageTech};
pub use sequence::StorageMap;
pub use timeseries::{AttributeKind, AttributeSeries, FullTimeSeries};
