//! Two-source partial information decompositions assembled from a pair of
//! independently computed unique informations.
//!
//! Given U0 and U1, redundancy is I(S0:T) − U0 and synergy is whatever of
//! I(S0S1:T) remains. The S1-side identity R + U1 = I(S1:T) then holds only
//! when U0 + I(S1:T) = U1 + I(S0:T); the absolute violation of that
//! relation is reported as the consistency gap. Negative redundancy or
//! synergy is kept as computed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::broja::broja_unique;
use crate::common::skar_no_communication;
use crate::dist::{JointDistribution, VariableSet};
use crate::error::{Error, Result};
use crate::oneway::skar_one_way;
use crate::rate::{Bound, OptimizerConfig, RateEstimate};
use crate::twoway::{two_way_bracket, RateBracket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureLabel {
    CamelOneway,
    ElephantOneway,
    NoCommunication,
    TwoWayLower,
    TwoWayUpper,
    Broja,
}

impl MeasureLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureLabel::CamelOneway => "camel-oneway",
            MeasureLabel::ElephantOneway => "elephant-oneway",
            MeasureLabel::NoCommunication => "no-communication",
            MeasureLabel::TwoWayLower => "two-way-lower",
            MeasureLabel::TwoWayUpper => "two-way-upper",
            MeasureLabel::Broja => "broja",
        }
    }
}

impl fmt::Display for MeasureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "camel" | "camel-oneway" => MeasureLabel::CamelOneway,
            "elephant" | "elephant-oneway" => MeasureLabel::ElephantOneway,
            "no-communication" | "none" => MeasureLabel::NoCommunication,
            "two-way-lower" => MeasureLabel::TwoWayLower,
            "two-way-upper" => MeasureLabel::TwoWayUpper,
            "broja" => MeasureLabel::Broja,
            other => return Err(Error::InvalidArgument(format!("unknown measure `{other}`"))),
        })
    }
}

/// Bound flag per component; `None` marks a component whose inputs carry
/// conflicting directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentFlags {
    pub redundancy: Option<Bound>,
    pub unique_0: Option<Bound>,
    pub unique_1: Option<Bound>,
    pub synergy: Option<Bound>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialDecomposition {
    pub redundancy: f64,
    pub unique_0: f64,
    pub unique_1: f64,
    pub synergy: f64,
    pub consistency_gap: f64,
    pub measure_label: MeasureLabel,
    pub component_bound_flags: ComponentFlags,
    /// I(S0:T), I(S1:T) and I(S0S1:T) used in the assembly.
    pub source_0_information: f64,
    pub source_1_information: f64,
    pub joint_information: f64,
}

/// Residuals of the decomposition identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// R + U0 − I(S0:T)
    pub source_0: f64,
    /// R + U1 − I(S1:T); equals ± the consistency gap
    pub source_1: f64,
    /// R + U0 + U1 + Syn − I(S0S1:T)
    pub total: f64,
}

impl PartialDecomposition {
    pub fn identity_residuals(&self) -> IdentityResiduals {
        IdentityResiduals {
            source_0: self.redundancy + self.unique_0 - self.source_0_information,
            source_1: self.redundancy + self.unique_1 - self.source_1_information,
            total: self.redundancy + self.unique_0 + self.unique_1 + self.synergy
                - self.joint_information,
        }
    }

    /// Whether the inputs disagree in bound direction.
    pub fn mixed_confidence(&self) -> bool {
        let f = &self.component_bound_flags;
        f.unique_0 != f.unique_1
    }

    pub fn components(&self) -> [f64; 4] {
        [self.redundancy, self.unique_0, self.unique_1, self.synergy]
    }
}

/// Which variables play S0, S1 and T.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PidRoles {
    pub source_0: VariableSet,
    pub source_1: VariableSet,
    pub target: VariableSet,
}

impl PidRoles {
    /// The last variable is the target; the first two others are sources.
    pub fn default_for(d: &JointDistribution) -> Result<Self> {
        let n = d.num_vars();
        if n < 3 {
            return Err(Error::InvalidArgument(
                "a decomposition needs two sources and a target".into(),
            ));
        }
        Self::with_target(d, n - 1)
    }

    /// `target` by index; the remaining variables in order are the sources.
    pub fn with_target(d: &JointDistribution, target: usize) -> Result<Self> {
        let others: Vec<usize> = (0..d.num_vars()).filter(|&v| v != target).collect();
        if others.len() != 2 || target >= d.num_vars() {
            return Err(Error::InvalidArgument(
                "a decomposition needs exactly two sources and a target".into(),
            ));
        }
        Ok(Self {
            source_0: VariableSet::single(others[0]),
            source_1: VariableSet::single(others[1]),
            target: VariableSet::single(target),
        })
    }

    pub fn named(d: &JointDistribution, s0: &str, s1: &str, t: &str) -> Result<Self> {
        let roles = Self {
            source_0: d.set(&[s0])?,
            source_1: d.set(&[s1])?,
            target: d.set(&[t])?,
        };
        crate::common::check_disjoint(&[&roles.source_0, &roles.source_1, &roles.target])?;
        Ok(roles)
    }
}

pub fn assemble_from_uniques(
    d: &JointDistribution,
    roles: &PidRoles,
    u0: &RateEstimate,
    u1: &RateEstimate,
    label: MeasureLabel,
) -> Result<PartialDecomposition> {
    let i0 = d.mutual_information(&roles.source_0, &roles.target)?;
    let i1 = d.mutual_information(&roles.source_1, &roles.target)?;
    let sources = roles.source_0.union(&roles.source_1)?;
    let total = d.mutual_information(&sources, &roles.target)?;
    let redundancy = i0 - u0.value;
    let synergy = total - redundancy - u0.value - u1.value;
    let consistency_gap = (u0.value + i1 - u1.value - i0).abs();
    Ok(PartialDecomposition {
        redundancy,
        unique_0: u0.value,
        unique_1: u1.value,
        synergy,
        consistency_gap,
        measure_label: label,
        component_bound_flags: ComponentFlags {
            redundancy: Some(u0.bound.negated()),
            unique_0: Some(u0.bound),
            unique_1: Some(u1.bound),
            // Syn = I(S0S1:T) − I(S0:T) − U1
            synergy: Some(u1.bound.negated()),
        },
        source_0_information: i0,
        source_1_information: i1,
        joint_information: total,
    })
}

/// Uniques from the one-way rates with each source communicating to T.
pub fn camel_pid(
    d: &JointDistribution,
    roles: &PidRoles,
    cfg: &OptimizerConfig,
) -> Result<PartialDecomposition> {
    let PidRoles {
        source_0: s0,
        source_1: s1,
        target: t,
    } = roles;
    let (u0, u1) = rayon::join(
        || skar_one_way(d, s0, t, s1, cfg),
        || skar_one_way(d, s1, t, s0, cfg),
    );
    assemble_from_uniques(d, roles, &u0?, &u1?, MeasureLabel::CamelOneway)
}

/// Uniques from the one-way rates with T communicating to each source.
pub fn elephant_pid(
    d: &JointDistribution,
    roles: &PidRoles,
    cfg: &OptimizerConfig,
) -> Result<PartialDecomposition> {
    let PidRoles {
        source_0: s0,
        source_1: s1,
        target: t,
    } = roles;
    let (u0, u1) = rayon::join(
        || skar_one_way(d, t, s0, s1, cfg),
        || skar_one_way(d, t, s1, s0, cfg),
    );
    assemble_from_uniques(d, roles, &u0?, &u1?, MeasureLabel::ElephantOneway)
}

pub fn nocomm_pid(d: &JointDistribution, roles: &PidRoles) -> Result<PartialDecomposition> {
    let u0 = skar_no_communication(d, &roles.source_0, &roles.target, &roles.source_1)?;
    let u1 = skar_no_communication(d, &roles.source_1, &roles.target, &roles.source_0)?;
    assemble_from_uniques(d, roles, &u0, &u1, MeasureLabel::NoCommunication)
}

/// Decompositions from both ends of the two-way brackets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoWayDecomposition {
    pub lower: PartialDecomposition,
    pub upper: PartialDecomposition,
    /// Brackets for S0 ↔ T || S1 and S1 ↔ T || S0.
    pub brackets: [RateBracket; 2],
}

impl TwoWayDecomposition {
    pub fn converged(&self) -> bool {
        self.brackets.iter().all(|b| b.converged)
    }
}

pub fn twoway_pid(
    d: &JointDistribution,
    roles: &PidRoles,
    cfg: &OptimizerConfig,
) -> Result<TwoWayDecomposition> {
    let PidRoles {
        source_0: s0,
        source_1: s1,
        target: t,
    } = roles;
    let (b0, b1) = rayon::join(
        || two_way_bracket(d, s0, t, s1, cfg),
        || two_way_bracket(d, s1, t, s0, cfg),
    );
    let (b0, b1) = (b0?, b1?);
    let side = |b: &RateBracket, upper: bool| {
        let est = if upper { &b.upper } else { &b.lower };
        let bound = if b.converged { Bound::Exact } else { est.bound };
        est.clone().with_bound(bound)
    };
    let lower = assemble_from_uniques(
        d,
        roles,
        &side(&b0, false),
        &side(&b1, false),
        MeasureLabel::TwoWayLower,
    )?;
    let upper = assemble_from_uniques(
        d,
        roles,
        &side(&b0, true),
        &side(&b1, true),
        MeasureLabel::TwoWayUpper,
    )?;
    Ok(TwoWayDecomposition {
        lower,
        upper,
        brackets: [b0, b1],
    })
}

pub fn broja_pid(
    d: &JointDistribution,
    roles: &PidRoles,
    cfg: &OptimizerConfig,
) -> Result<PartialDecomposition> {
    let keep = roles
        .source_0
        .union(&roles.source_1)?
        .union(&roles.target)?;
    let m = d.marginal(&keep)?;
    let (s0, s1, t) = (
        VariableSet::single(0),
        VariableSet::single(1),
        VariableSet::single(2),
    );
    let (u0, u1) = rayon::join(
        || broja_unique(&m, &s0, &s1, &t, cfg),
        || broja_unique(&m, &s1, &s0, &t, cfg),
    );
    let local = PidRoles {
        source_0: s0,
        source_1: s1,
        target: t,
    };
    assemble_from_uniques(&m, &local, &u0?.0, &u1?.0, MeasureLabel::Broja)
}
