//! Configuration, orchestration and report emission for the radial
//! chemotaxis laboratory.

pub mod check;
pub mod config;
pub mod probes;
pub mod run;
pub mod scenario;
pub mod sweep;
