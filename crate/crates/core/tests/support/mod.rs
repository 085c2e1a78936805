//! Independent oracles shared by the integration tests and the CLI
//! acceptance suite.
#![allow(dead_code, unused_imports)]

mod metrics;
mod numstat;
mod retrieval;

pub use metrics::*;
pub use numstat::*;
pub use retrieval::*;
