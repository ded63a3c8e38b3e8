//! Benchmark problems, interior-point search, trace emission, and command
//! implementations behind the `riptrm` binary.

pub mod commands;
pub mod config;
pub mod feasibility;
pub mod plot;
pub mod problems;
pub mod trace;
