//! Partial information decomposition with unique information measured by
//! secret key agreement rates, alongside the BROJA measure.
//!
//! The building blocks are:
//!
//! - [`dist`]: dense joint distributions and Shannon quantities (bits).
//! - [`common`]: the Gács-Körner common variable and the no-communication
//!   key rate H(A ∧ B | E).
//! - [`oneway`]: the one-way key rate, optimized over auxiliary channels,
//!   with an exhaustive deterministic-scheme oracle.
//! - [`twoway`]: intrinsic mutual information and two-way rate brackets.
//! - [`broja`]: the BROJA unique information and its minimizing joint.
//! - [`pid`]: decompositions assembled from any pair of uniques, with the
//!   consistency gap between the two sides.
//! - [`search`]: seeded scans over random distributions for consistency
//!   violations.

pub mod broja;
pub mod channel;
pub mod common;
pub mod dist;
pub mod error;
pub mod fixtures;
pub mod oneway;
pub mod optimize;
pub mod pid;
pub mod rate;
pub mod search;
pub mod twoway;

pub use broja::{broja_unique, BrojaStart};
pub use channel::Channel;
pub use common::{meet, skar_no_communication, CommonVariable};
pub use dist::{JointDistribution, VariableSet};
pub use error::{Error, Result};
pub use oneway::{oneway_objective, skar_one_way, skar_one_way_deterministic_oracle};
pub use pid::{
    assemble_from_uniques, broja_pid, camel_pid, elephant_pid, nocomm_pid, twoway_pid,
    MeasureLabel, PartialDecomposition, PidRoles,
};
pub use rate::{Bound, OptimizerConfig, RateEstimate, Witness};
pub use twoway::{intrinsic_mutual_information, two_way_bracket, RateBracket};
