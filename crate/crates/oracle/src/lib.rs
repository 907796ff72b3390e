//! Brute-force references for the simplex solver and the proposed scheduler.
//!
//! Nothing here calls the code paths it checks: vertex enumeration solves
//! square systems directly, the grid search evaluates latency from the raw
//! scenario fields, and the split-pattern search builds its own joint LPs
//! over every support combination.

pub mod grid;
pub mod patterns;
pub mod vertex;

pub use grid::{eval_latency, grid_l_max, grid_min_latency, random_instance};
pub use patterns::min_total_splits;
pub use vertex::{random_feasible_lp, vertex_enumeration};
