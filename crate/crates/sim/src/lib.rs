//! Scenario runner for the light-propagation solvers in `eit-core`.
//!
//! Configs are TOML files with unit-bearing quantities. A run produces a
//! [`runner::RunRecord`] that [`output`] writes to disk.

// `!(x > 0.0)` guards are written that way so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod runner;
pub mod spectrum;
pub mod units;
pub mod scenarios;
