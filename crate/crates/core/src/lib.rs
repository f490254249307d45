//! Toolkit for suspended Lamb-wave resonators: equivalent-circuit fitting,
//! plate dispersion, IDT design, mask layout and GDSII, Touchstone and
//! one-port calibration, wafer statistics, and process-flow checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod design;
pub mod dispersion;
pub mod layout;
pub mod process;
pub mod rf;
pub mod stats;
pub mod exec;

pub use exec::Execution;
