use std::fmt;

use serde::Serialize;

use crate::channel::Channel;
use crate::common::CommonVariable;
use crate::error::{Error, Result};

/// Direction in which a reported number is trustworthy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Exact,
    LowerBound,
    UpperBound,
}

impl Bound {
    /// The flag carried by `c - x` when `x` has this flag.
    pub fn negated(self) -> Bound {
        match self {
            Bound::Exact => Bound::Exact,
            Bound::LowerBound => Bound::UpperBound,
            Bound::UpperBound => Bound::LowerBound,
        }
    }

    /// Combines the flags of two summands.
    pub fn combine(self, other: Bound) -> Option<Bound> {
        match (self, other) {
            (a, b) if a == b => Some(a),
            (Bound::Exact, b) | (b, Bound::Exact) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Exact => "exact",
            Bound::LowerBound => "lower-bound",
            Bound::UpperBound => "upper-bound",
        })
    }
}

/// Certificate attached to a rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Key channel p(k|a) and public-message channel p(c|k).
    OneWay { key: Channel, public: Channel },
    /// Processing applied to the eavesdropper's variable.
    Eavesdropper { channel: Channel },
    /// The common variable whose conditional entropy is the rate.
    Common { variable: CommonVariable },
}

/// A rate in bits with its bound direction and optimizer diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub bound: Bound,
    pub witness: Option<Witness>,
    pub restarts_used: usize,
    pub best_restart_objective_trace: Vec<f64>,
    /// Best objective before clamping at zero.
    pub raw_value: f64,
    /// Sizes of the auxiliary alphabets searched over.
    pub auxiliary_cardinalities: Vec<usize>,
}

impl RateEstimate {
    pub fn exact(value: f64, witness: Option<Witness>) -> Self {
        Self {
            value,
            bound: Bound::Exact,
            witness,
            restarts_used: 0,
            best_restart_objective_trace: Vec::new(),
            raw_value: value,
            auxiliary_cardinalities: Vec::new(),
        }
    }

    pub fn with_bound(mut self, bound: Bound) -> Self {
        self.bound = bound;
        self
    }
}

/// Settings for multi-start local optimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop a restart once one accepted step changes the objective by less.
    pub convergence_tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 25,
            max_iterations: 2000,
            convergence_tolerance: 1e-9,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "restarts and max_iterations must be positive".into(),
            ));
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "convergence_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}
