//! Job scheduling for MEC-assisted holographic streaming.
//!
//! * [`model`]: domain types and the per-user latency model
//! * [`lp`]: dense two-phase simplex
//! * [`scheduler`]: the two-stage LP scheduler and the baselines
//! * [`metrics`]: latency statistics and likability scoring
//! * [`sim`]: scenario templates, sampling and batch runs
//! * [`config`]: template file loading

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod sim;

pub use config::{default_template, load_template};
pub use lp::{solve, LinearProgram, LpSolution, LpStatus, Relation};
pub use metrics::{aggregate, likability, resemblance, LikabilityCurve, PolicyResult};
pub use model::{report, user_latency, Allocation, LatencyReport, Scenario, Schedule};
pub use scheduler::{
    schedule_jsq, schedule_local, schedule_proposed, schedule_split_evenly, Policy, PolicyKind,
};
pub use sim::{run_batch, sample, BatchResult, ScenarioTemplate};
