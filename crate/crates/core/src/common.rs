//! Gács-Körner common random variable and the secret key rate achievable
//! without public communication.

use serde::Serialize;

use crate::channel::{numbered_alphabet, Channel};
use crate::dist::{JointDistribution, VariableSet, ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::rate::{RateEstimate, Witness};

/// Connected-component labeling of the bipartite support graph of (A, B).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommonVariable {
    /// `(a, b, component)` for every support pair, row-major.
    pub labeling: Vec<(usize, usize, usize)>,
    pub num_components: usize,
    /// Component of each composite `a` symbol, `None` off the support.
    pub a_components: Vec<Option<usize>>,
    /// Component of each composite `b` symbol, `None` off the support.
    pub b_components: Vec<Option<usize>>,
}

impl CommonVariable {
    pub fn component(&self, a: usize, b: usize) -> Option<usize> {
        self.labeling
            .iter()
            .find(|&&(x, y, _)| x == a && y == b)
            .map(|&(_, _, c)| c)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub(crate) fn check_disjoint(sets: &[&VariableSet]) -> Result<()> {
    for (i, s) in sets.iter().enumerate() {
        if sets[..i].iter().any(|o| !o.is_disjoint(s)) {
            return Err(Error::InvalidArgument("variable sets overlap".into()));
        }
    }
    Ok(())
}

/// Name not already used by `d`, for auxiliary variables.
pub(crate) fn fresh_name(d: &JointDistribution, base: &str) -> String {
    let mut name = base.to_string();
    while d.names().contains(&name) {
        name.push('\'');
    }
    name
}

pub fn meet(d: &JointDistribution, a: &VariableSet, b: &VariableSet) -> Result<CommonVariable> {
    check_disjoint(&[a, b])?;
    let t = d.table(&[a, b])?;
    let (na, nb) = (t.dims[0], t.dims[1]);
    let mut uf = UnionFind::new(na + nb);
    for i in 0..na {
        for j in 0..nb {
            if t.get2(i, j) > ZERO_THRESHOLD {
                uf.union(i, na + j);
            }
        }
    }
    let mut ids: Vec<Option<usize>> = vec![None; na + nb];
    let mut next = 0;
    let mut labeling = Vec::new();
    let mut a_components = vec![None; na];
    let mut b_components = vec![None; nb];
    for i in 0..na {
        for j in 0..nb {
            if t.get2(i, j) > ZERO_THRESHOLD {
                let root = uf.find(i);
                let id = *ids[root].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                });
                labeling.push((i, j, id));
                a_components[i] = Some(id);
                b_components[j] = Some(id);
            }
        }
    }
    Ok(CommonVariable {
        labeling,
        num_components: next.max(1),
        a_components,
        b_components,
    })
}

/// Rate H(A ∧ B | E), computed by appending the common variable as a
/// deterministic function of A and conditioning on E.
pub fn skar_no_communication(
    d: &JointDistribution,
    a: &VariableSet,
    b: &VariableSet,
    e: &VariableSet,
) -> Result<RateEstimate> {
    check_disjoint(&[a, b, e])?;
    let common = meet(d, a, b)?;
    let labels = numbered_alphabet("m", common.num_components);
    let channel = Channel::deterministic(d.composite_alphabet(a), labels, |i| {
        common.a_components[i].unwrap_or(0)
    });
    let name = fresh_name(d, "M");
    let extended = d.attach_channel(a, &channel, &name)?;
    let m = VariableSet::single(extended.num_vars() - 1);
    let rate = extended.conditional_entropy(&m, e)?;
    let mut estimate = RateEstimate::exact(rate, Some(Witness::Common { variable: common }));
    estimate.auxiliary_cardinalities = vec![channel.cols()];
    Ok(estimate)
}
