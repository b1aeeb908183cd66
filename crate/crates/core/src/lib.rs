//! Simulation of district-heating markets with excess-heat producers:
//! a joint market-participation clearing against self-scheduling on a price
//! signal, with an own LP solver, CSV ingest and CSV/SVG reporting.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod clearing;
pub mod domain;
pub mod ingest;
pub mod lp;
pub mod models;
pub mod pricing;
pub mod report;
pub mod sim;
pub mod synth;
