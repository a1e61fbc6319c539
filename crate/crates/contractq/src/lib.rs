//! Solvers for optimal incentive contracts when the monitoring technology —
//! how raw performance data is compressed into finitely many ratings — is
//! itself a design variable with an information cost.
//!
//! The pipeline: an environment ([`mod@env`]) reduces data to likelihood-ratio
//! statistics; a wage solver ([`wages`]) prices incentives for a fixed
//! partition summary; the partition optimizer ([`partition`]) searches over
//! cutoffs, separating lines, product grids and weighted-score directions;
//! [`channel`] relaxes partitions to noisy channels priced by mutual
//! information; [`oracle`] certifies small instances by exhaustive
//! enumeration; [`sweep`] drives reproducible parameter sweeps.
//!
//! Parallelism: multistarts, sweeps and enumeration fan out through rayon
//! when the `parallel` feature (default) is enabled and fall back to
//! sequential loops otherwise; results are identical either way.

// negated comparisons like !(x > 0.0) are deliberate: they reject NaN along
// with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cost;
pub mod env;
pub mod error;
pub mod exec;
pub mod oracle;
pub mod partition;
pub mod quad;
pub mod search;
pub mod sweep;
pub mod utility;
pub mod wages;

pub use cost::{entropy_bits, monitoring_cost, CostKind, MonitoringCostSpec};
pub use env::{
    discrete_grid_env, multi_task_env, normal_signal_env, uniform_z_env, CellSummary,
    DeviationCosts, Line, MultiTaskEnv, ProductEnv, ZEnv,
};
pub use error::{Error, Result};
pub use utility::{CustomUtility, Utility};
pub use wages::{
    closed_form_cost_sqrt, solve_ir_single, solve_ll_multiaction, solve_ll_multiagent,
    solve_ll_single, DualCertificate, WageSchedule,
};
