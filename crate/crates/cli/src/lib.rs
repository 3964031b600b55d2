//! Config-driven experiment runner on top of the simulation library.
//!
//! The split of responsibilities: `config` turns a `.cfg` file into a fully
//! validated plan, `experiment` runs the plan into a bundle of estimates and
//! pass/fail checks, and `output` writes the bundle to disk in a stable,
//! byte-deterministic format.

pub mod config;
pub mod experiment;
pub mod output;
