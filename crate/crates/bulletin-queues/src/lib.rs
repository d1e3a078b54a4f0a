//! Two parallel FCFS queues serve remote tenants who never observe the live
//! queue state. Every `r` seconds the operator dispatches an information
//! bulletin — either the stationary service-rate law of each queue or the
//! mean time between queue-length changes — and tenants react to that
//! (possibly stale) information by staying, reneging to local processing, or
//! jockeying to the other queue.
//!
//! The crate provides the analytic layer (stationary models, impatience
//! probabilities and rates), a grid optimizer with KKT verification for the
//! service-rate pair, an adaptive dispatch policy, a deterministic
//! discrete-event simulator, and the experiment layer (config, sweeps,
//! summary tables, SVG charts).
//!
//! The examples directory is the guided tour; each file runs standalone:
//!
//! ```text
//! cargo run --example rate_chains         # service-rate chains, dominance, stationary laws
//! cargo run --example impatience_curves   # renege/jockey probabilities vs staleness
//! cargo run --example jockey_conformance  # closed-form vs numeric jockey probability
//! cargo run --example grid_optimize       # objective landscape, optimum, KKT report
//! cargo run --example adaptive_policy     # predictive model steering the rate pair
//! cargo run --example single_run          # one simulated replication, full metrics
//! cargo run --example sweep_and_charts    # small sweep -> CSV/JSON/SVG artifacts
//! ```
//!
//! The `bulletin-queues` binary wraps the same library entry points behind
//! `sweep`, `optimize`, `charts`, and `conformance` subcommands.

pub mod charts;
pub mod config;
pub mod error;
pub mod experiment;
pub mod impatience;
mod numeric;
pub mod optimizer;
pub mod policy;
pub mod report;
pub mod sim;
pub mod state;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
