//! Starvation analysis for streaming a chunked file over several parallel links.
// `!(x > 0.0)` guards are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod delays;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod policy;
pub mod prebuffer;
pub mod traces;

pub use error::{Error, Result};
pub use model::{ChunkSchedule, LinkRates, Regime, SimConfig, StarvationEstimate};
