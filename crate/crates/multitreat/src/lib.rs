//! File formats, replication harness and commands on top of
//! `multitreat-core`.

pub mod coefficients;
pub mod commands;
pub mod config;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod scenarios;
pub mod tables;
