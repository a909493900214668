//! Bounds on the two-way secret key agreement rate.
//!
//! The lower bound is the best of the no-communication rate and the two
//! one-way rates. The upper bound is the intrinsic mutual information
//! min over p(ē|e) of I(A:B|Ē), itself capped by I(A:B) and I(A:B|E).

use serde::Serialize;

use crate::channel::{numbered_alphabet, Channel};
use crate::common::{check_disjoint, skar_no_communication};
use crate::dist::{JointDistribution, VariableSet};
use crate::error::{Error, Result};
use crate::oneway::skar_one_way;
use crate::optimize::{self, Objective, Stochastic};
use crate::rate::{Bound, OptimizerConfig, RateEstimate, Witness};

/// Default width below which a bracket counts as converged, in bits.
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBracket {
    pub lower: RateEstimate,
    pub upper: RateEstimate,
    pub converged: bool,
    pub gap_tolerance: f64,
    /// |Ē| used for the eavesdropper channel.
    pub eavesdropper_cardinality: usize,
}

impl RateBracket {
    pub fn width(&self) -> f64 {
        self.upper.value - self.lower.value
    }
}

/// I(A:B|Ē) as a function of the eavesdropper channel p(ē|e).
#[derive(Debug, Clone)]
pub(crate) struct IntrinsicProblem {
    na: usize,
    nb: usize,
    ne: usize,
    pabe: Vec<f64>,
}

impl IntrinsicProblem {
    fn new(
        d: &JointDistribution,
        a: &VariableSet,
        b: &VariableSet,
        e: &VariableSet,
    ) -> Result<Self> {
        check_disjoint(&[a, b, e])?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument("A and B must be nonempty".into()));
        }
        let t = d.table(&[a, b, e])?;
        Ok(Self {
            na: t.dims[0],
            nb: t.dims[1],
            ne: t.dims[2],
            pabe: t.data,
        })
    }

    /// Returns I(A:B|Ē) and, optionally, the pointwise log ratio per
    /// (a, b, ē) used by the gradient.
    fn evaluate(&self, q: &Stochastic, log_ratio: Option<&mut Vec<f64>>) -> f64 {
        let (na, nb, ne, nq) = (self.na, self.nb, self.ne, q.cols);
        let mut joint = vec![0.0; na * nb * nq];
        for ab in 0..na * nb {
            for e in 0..ne {
                let p = self.pabe[ab * ne + e];
                if p == 0.0 {
                    continue;
                }
                for f in 0..nq {
                    joint[ab * nq + f] += p * q.data[e * nq + f];
                }
            }
        }
        let mut pf = vec![0.0; nq];
        let mut paf = vec![0.0; na * nq];
        let mut pbf = vec![0.0; nb * nq];
        for a in 0..na {
            for b in 0..nb {
                for f in 0..nq {
                    let p = joint[(a * nb + b) * nq + f];
                    pf[f] += p;
                    paf[a * nq + f] += p;
                    pbf[b * nq + f] += p;
                }
            }
        }
        let mut out = log_ratio;
        if let Some(l) = out.as_mut() {
            l.clear();
            l.resize(joint.len(), 0.0);
        }
        let mut total = 0.0;
        for a in 0..na {
            for b in 0..nb {
                for f in 0..nq {
                    let i = (a * nb + b) * nq + f;
                    let p = joint[i];
                    if p <= 0.0 {
                        continue;
                    }
                    let l = (p * pf[f] / (paf[a * nq + f] * pbf[b * nq + f])).log2();
                    total += p * l;
                    if let Some(lr) = out.as_mut() {
                        lr[i] = l;
                    }
                }
            }
        }
        total.max(0.0)
    }
}

impl Objective for IntrinsicProblem {
    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.ne, self.ne)]
    }

    fn value(&self, mats: &[Stochastic]) -> f64 {
        self.evaluate(&mats[0], None)
    }

    fn value_and_gradient(&self, mats: &[Stochastic], grads: &mut [Stochastic]) -> f64 {
        let mut lr = Vec::new();
        let v = self.evaluate(&mats[0], Some(&mut lr));
        let nq = mats[0].cols;
        let g = &mut grads[0].data;
        g.iter_mut().for_each(|x| *x = 0.0);
        for ab in 0..self.na * self.nb {
            for e in 0..self.ne {
                let p = self.pabe[ab * self.ne + e];
                if p == 0.0 {
                    continue;
                }
                for f in 0..nq {
                    g[e * nq + f] += p * lr[ab * nq + f];
                }
            }
        }
        v
    }
}

/// Multi-start descent over eavesdropper channels with |Ē| = |E|. The
/// identity and constant channels are always scored as well, so the result
/// never exceeds min(I(A:B), I(A:B|E)).
pub fn intrinsic_mutual_information(
    d: &JointDistribution,
    a: &VariableSet,
    b: &VariableSet,
    e: &VariableSet,
    cfg: &OptimizerConfig,
) -> Result<RateEstimate> {
    cfg.validate()?;
    // The quantity is symmetric in A and B; a canonical order keeps the
    // floating-point path identical for both argument orders.
    let (a, b) = if a.indices() <= b.indices() {
        (a, b)
    } else {
        (b, a)
    };
    let problem = IntrinsicProblem::new(d, a, b, e)?;
    let ne = problem.ne;
    let opt = optimize::minimize(&problem, cfg);
    let mut best = (opt.value, opt.mats[0].clone());
    let identity = Stochastic::from_map(&(0..ne).collect::<Vec<_>>(), ne);
    let constant = Stochastic::from_map(&vec![0; ne], ne);
    for candidate in [identity, constant] {
        let v = problem.evaluate(&candidate, None);
        if v < best.0 {
            best = (v, candidate);
        }
    }
    let channel = Channel::new(
        d.composite_alphabet(e),
        numbered_alphabet("e", ne),
        best.1.data,
    )
    .expect("optimizer keeps rows stochastic");
    Ok(RateEstimate {
        value: best.0,
        bound: Bound::UpperBound,
        witness: Some(Witness::Eavesdropper { channel }),
        restarts_used: opt.restarts_used,
        best_restart_objective_trace: opt.trace,
        raw_value: best.0,
        auxiliary_cardinalities: vec![ne],
    })
}

pub fn two_way_bracket(
    d: &JointDistribution,
    a: &VariableSet,
    b: &VariableSet,
    e: &VariableSet,
    cfg: &OptimizerConfig,
) -> Result<RateBracket> {
    two_way_bracket_with_tolerance(d, a, b, e, cfg, DEFAULT_GAP_TOLERANCE)
}

pub fn two_way_bracket_with_tolerance(
    d: &JointDistribution,
    a: &VariableSet,
    b: &VariableSet,
    e: &VariableSet,
    cfg: &OptimizerConfig,
    gap_tolerance: f64,
) -> Result<RateBracket> {
    check_disjoint(&[a, b, e])?;
    if !(gap_tolerance >= 0.0) {
        return Err(Error::InvalidArgument(
            "gap tolerance must be nonnegative".into(),
        ));
    }
    let forward = skar_one_way(d, a, b, e, cfg)?;
    let backward = skar_one_way(d, b, a, e, cfg)?;
    let silent = skar_no_communication(d, a, b, e)?;
    let mut lower = forward;
    for candidate in [backward, silent] {
        if candidate.value > lower.value {
            lower = candidate;
        }
    }
    lower.bound = Bound::LowerBound;

    let mut upper = intrinsic_mutual_information(d, a, b, e, cfg)?;
    let mi = d.mutual_information(a, b)?;
    let cmi = if e.is_empty() {
        mi
    } else {
        d.conditional_mutual_information(a, b, e)?
    };
    upper.value = upper.value.min(mi).min(cmi);
    let eavesdropper_cardinality = d.composite_size(e);
    let converged = upper.value - lower.value <= gap_tolerance;
    Ok(RateBracket {
        lower,
        upper,
        converged,
        gap_tolerance,
        eavesdropper_cardinality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, Eve};

    fn roles(
        d: &JointDistribution,
        a: &str,
        b: &str,
        e: &str,
    ) -> (VariableSet, VariableSet, VariableSet) {
        (
            d.set(&[a]).unwrap(),
            d.set(&[b]).unwrap(),
            d.set(&[e]).unwrap(),
        )
    }

    #[test]
    fn intrinsic_examples() {
        let cfg = OptimizerConfig::default();
        let d = fixtures::pointwise_unique();
        let (a, b, e) = roles(&d, "S0", "T", "S1");
        let r = intrinsic_mutual_information(&d, &a, &b, &e, &cfg).unwrap();
        assert!((r.value - 0.5).abs() < 1e-4);
        assert_eq!(r.bound, Bound::UpperBound);

        let d = fixtures::shared_bit(Eve::Independent);
        let (a, b, e) = roles(&d, "A", "B", "E");
        let r = intrinsic_mutual_information(&d, &a, &b, &e, &cfg).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);

        // E holds (A, B) jointly.
        let d = JointDistribution::from_events(
            &["A", "B", "E"],
            &[
                (vec!["0", "0", "00"], 0.4),
                (vec!["0", "1", "01"], 0.1),
                (vec!["1", "0", "10"], 0.2),
                (vec!["1", "1", "11"], 0.3),
            ],
        )
        .unwrap();
        let (a, b, e) = roles(&d, "A", "B", "E");
        let r = intrinsic_mutual_information(&d, &a, &b, &e, &cfg).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = fixtures::pointwise_unique();
        let (a, b, e) = roles(&d, "S0", "T", "S1");
        let p = IntrinsicProblem::new(&d, &a, &b, &e).unwrap();
        let q = Stochastic {
            rows: 3,
            cols: 3,
            data: vec![0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.3, 0.4, 0.3],
        };
        let mut g = vec![q.clone()];
        p.value_and_gradient(std::slice::from_ref(&q), &mut g);
        let h = 1e-6;
        for i in 0..9 {
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus.data[i] += h;
            minus.data[i] -= h;
            let fd = (p.evaluate(&plus, None) - p.evaluate(&minus, None)) / (2.0 * h);
            assert!(
                (fd - g[0].data[i]).abs() < 1e-6,
                "{i}: {fd} vs {}",
                g[0].data[i]
            );
        }
    }

    #[test]
    fn bracket_examples() {
        let cfg = OptimizerConfig::default();
        let d = fixtures::pointwise_unique();
        let (a, b, e) = roles(&d, "S0", "T", "S1");
        let br = two_way_bracket(&d, &a, &b, &e, &cfg).unwrap();
        assert!(br.converged);
        assert!((br.lower.value - 0.5).abs() < 1e-4);
        assert!((br.upper.value - 0.5).abs() < 1e-4);
        assert_eq!(br.eavesdropper_cardinality, 3);

        let d = fixtures::shared_bit(Eve::Independent);
        let (a, b, e) = roles(&d, "A", "B", "E");
        let br = two_way_bracket(&d, &a, &b, &e, &cfg).unwrap();
        assert!(br.converged);
        assert!((br.lower.value - 1.0).abs() < 1e-6 && (br.upper.value - 1.0).abs() < 1e-6);

        let d = fixtures::independent_bits(3);
        let (a, b, e) = roles(&d, "S0", "S1", "T");
        let br = two_way_bracket(&d, &a, &b, &e, &cfg).unwrap();
        assert!(br.converged);
        assert!(br.lower.value.abs() < 1e-9 && br.upper.value.abs() < 1e-9);
    }

    #[test]
    fn bracket_is_symmetric() {
        let cfg = OptimizerConfig::with_seed(11);
        let d = fixtures::pointwise_unique();
        let (a, b, e) = roles(&d, "S1", "T", "S0");
        let ab = two_way_bracket(&d, &a, &b, &e, &cfg).unwrap();
        let ba = two_way_bracket(&d, &b, &a, &e, &cfg).unwrap();
        assert!((ab.lower.value - ba.lower.value).abs() < 1e-6);
        assert!((ab.upper.value - ba.upper.value).abs() < 1e-6);
    }
}
