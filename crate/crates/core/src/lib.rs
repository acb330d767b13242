//! Agent-based simulation of a metropolitan economy: households, firms, a
//! bank and municipalities interacting through goods, labor, housing and
//! credit markets, month by month.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod config;
pub mod demographics;
pub mod error;
pub mod finance;
pub mod firms;
pub mod goods;
pub mod govern;
pub mod housing;
pub mod ids;
pub mod labor;
pub mod ledger;
pub mod money;
pub mod params;
pub mod rng;
pub mod series;
pub mod sim;
pub mod snapshot;
pub mod state;
pub mod stats;
pub mod synthpop;

pub use config::Config;
pub use error::{ConfigError, Result, SimError};
pub use money::Money;
pub use params::{PolicyKind, SimParams};
pub use sim::{step_month, Simulation};
pub use state::World;
