//! One-way secret key agreement: the communicator A sends a public message
//! C derived from a key variable K, and the rate is the best value of
//! I(B:K|C) − I(E:K|C) over channels with the Markov structure C − K − A − BE.
//!
//! Both auxiliary alphabets have |A|² symbols. The often quoted caps
//! |K| ≤ |A|, |C| ≤ |A|² are not enough: on some binary examples a four
//! symbol key beats every two symbol key.

use crate::channel::{numbered_alphabet, Channel};
use crate::common::{check_disjoint, fresh_name};
use crate::dist::{JointDistribution, VariableSet};
use crate::error::{Error, Result};
use crate::optimize::{self, Objective, Stochastic};
use crate::rate::{Bound, OptimizerConfig, RateEstimate, Witness};

/// Largest communicator alphabet the exhaustive oracle accepts.
pub const ORACLE_MAX_ALPHABET: usize = 4;

/// Number of best deterministic channel pairs the optimizer ascends from.
const WARM_STARTS: usize = 4;

/// I(B:K|C) − I(E:K|C) for the joint extended by the two channels.
///
/// This evaluates through [`JointDistribution::attach_channel`] and the
/// generic entropy routines; the optimizer uses a specialized evaluator
/// that is checked against this one.
pub fn oneway_objective(
    d: &JointDistribution,
    a: &VariableSet,
    b: &VariableSet,
    e: &VariableSet,
    k_channel: &Channel,
    c_channel: &Channel,
) -> Result<f64> {
    check_disjoint(&[a, b, e])?;
    if k_channel.output_alphabet() != c_channel.input_alphabet() {
        return Err(Error::AlphabetMismatch(
            "public channel input must be the key channel output".into(),
        ));
    }
    let k_name = fresh_name(d, "K");
    let with_k = d.attach_channel(a, k_channel, &k_name)?;
    let k = VariableSet::single(with_k.num_vars() - 1);
    let c_name = fresh_name(&with_k, "C");
    let full = with_k.attach_channel(&k, c_channel, &c_name)?;
    let c = VariableSet::single(full.num_vars() - 1);
    let gain = full.conditional_mutual_information(b, &k, &c)?;
    let leak = if e.is_empty() {
        0.0
    } else {
        full.conditional_mutual_information(e, &k, &c)?
    };
    Ok(gain - leak)
}

/// Specialized evaluator over p(a,b), p(a,e) and the two channel matrices.
#[derive(Debug, Clone)]
pub(crate) struct OneWayProblem {
    na: usize,
    nb: usize,
    ne: usize,
    nk: usize,
    nc: usize,
    pab: Vec<f64>,
    pae: Vec<f64>,
}

impl OneWayProblem {
    pub(crate) fn new(
        d: &JointDistribution,
        a: &VariableSet,
        b: &VariableSet,
        e: &VariableSet,
    ) -> Result<Self> {
        check_disjoint(&[a, b, e])?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidArgument(
                "communicator and partner must be nonempty".into(),
            ));
        }
        let ab = d.table(&[a, b])?;
        let ae = d.table(&[a, e])?;
        let na = ab.dims[0];
        Ok(Self {
            na,
            nb: ab.dims[1],
            ne: ae.dims[1],
            nk: na * na,
            nc: na * na,
            pab: ab.data,
            pae: ae.data,
        })
    }

    /// Accumulates one of the two conditional-information terms.
    /// `weights[x][k]` is p(x, k); returns Σ p(xkc) log2 p(k|xc) and, when
    /// requested, its gradients with respect to p(x,k) and r(c|k).
    fn term(
        &self,
        nx: usize,
        pxk: &[f64],
        r: &Stochastic,
        mut grads: Option<(&mut [f64], &mut [f64])>,
    ) -> f64 {
        let (nk, nc) = (self.nk, r.cols);
        let mut total = 0.0;
        for x in 0..nx {
            for c in 0..nc {
                let mut pxc = 0.0;
                for k in 0..nk {
                    pxc += pxk[x * nk + k] * r.data[k * nc + c];
                }
                if pxc <= 0.0 {
                    continue;
                }
                for k in 0..nk {
                    let w = pxk[x * nk + k];
                    let rk = r.data[k * nc + c];
                    let p = w * rk;
                    if p <= 0.0 {
                        continue;
                    }
                    let l = (p / pxc).log2();
                    total += p * l;
                    if let Some((gw, gr)) = grads.as_mut() {
                        gw[x * nk + k] += l * rk;
                        gr[k * nc + c] += l * w;
                    }
                }
            }
        }
        total
    }

    fn project(&self, joint: &[f64], nx: usize, q: &Stochastic) -> Vec<f64> {
        let nk = q.cols;
        let mut out = vec![0.0; nx * nk];
        for a in 0..self.na {
            for x in 0..nx {
                let p = joint[a * nx + x];
                if p == 0.0 {
                    continue;
                }
                for k in 0..nk {
                    out[x * nk + k] += p * q.data[a * nk + k];
                }
            }
        }
        out
    }
}

impl Objective for OneWayProblem {
    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.na, self.nk), (self.nk, self.nc)]
    }

    fn value(&self, mats: &[Stochastic]) -> f64 {
        let (q, r) = (&mats[0], &mats[1]);
        let pbk = self.project(&self.pab, self.nb, q);
        let pek = self.project(&self.pae, self.ne, q);
        // I(B:K|C) − I(E:K|C) = H(K|EC) − H(K|BC)
        self.term(self.nb, &pbk, r, None) - self.term(self.ne, &pek, r, None)
    }

    fn value_and_gradient(&self, mats: &[Stochastic], grads: &mut [Stochastic]) -> f64 {
        let (q, r) = (&mats[0], &mats[1]);
        let nk = self.nk;
        let pbk = self.project(&self.pab, self.nb, q);
        let pek = self.project(&self.pae, self.ne, q);
        let mut gbk = vec![0.0; self.nb * nk];
        let mut gek = vec![0.0; self.ne * nk];
        let mut gr_b = vec![0.0; r.data.len()];
        let mut gr_e = vec![0.0; r.data.len()];
        let gain = self.term(self.nb, &pbk, r, Some((&mut gbk, &mut gr_b)));
        let leak = self.term(self.ne, &pek, r, Some((&mut gek, &mut gr_e)));
        for ((g, b), e) in grads[1].data.iter_mut().zip(&gr_b).zip(&gr_e) {
            *g = b - e;
        }
        let gq = &mut grads[0].data;
        gq.iter_mut().for_each(|g| *g = 0.0);
        for a in 0..self.na {
            for k in 0..nk {
                let mut g = 0.0;
                for b in 0..self.nb {
                    g += self.pab[a * self.nb + b] * gbk[b * nk + k];
                }
                for e in 0..self.ne {
                    g -= self.pae[a * self.ne + e] * gek[e * nk + k];
                }
                gq[a * nk + k] = g;
            }
        }
        gain - leak
    }

    fn warm_starts(&self) -> Vec<Vec<Stochastic>> {
        if self.na > ORACLE_MAX_ALPHABET {
            return Vec::new();
        }
        let mut points = self.deterministic_points();
        points.sort_by(|x, y| y.0.total_cmp(&x.0));
        points
            .into_iter()
            .take(WARM_STARTS)
            .map(|(_, m)| m)
            .collect()
    }
}

impl OneWayProblem {
    /// Every deterministic K = f(A), C = g(K) up to relabeling, with values.
    ///
    /// The objective is invariant under relabeling K and C, so each map is
    /// enumerated once per induced partition.
    fn deterministic_points(&self) -> Vec<(f64, Vec<Stochastic>)> {
        let mut out = Vec::new();
        for f in set_partitions(self.na) {
            let q = Stochastic::from_map(&f, self.nk);
            let used = f.iter().max().map_or(1, |m| m + 1);
            for g in set_partitions(used) {
                let mut map = g.clone();
                map.resize(self.nk, 0);
                let mats = vec![q.clone(), Stochastic::from_map(&map, self.nc)];
                out.push((self.value(&mats), mats));
            }
        }
        out
    }
}

fn witness(d: &JointDistribution, a: &VariableSet, q: &Stochastic, r: &Stochastic) -> Witness {
    let k_alphabet = numbered_alphabet("k", q.cols);
    let key = Channel::new(d.composite_alphabet(a), k_alphabet.clone(), q.data.clone())
        .expect("optimizer keeps rows stochastic");
    let public = Channel::new(k_alphabet, numbered_alphabet("c", r.cols), r.data.clone())
        .expect("optimizer keeps rows stochastic");
    Witness::OneWay { key, public }
}

fn estimate(
    d: &JointDistribution,
    a: &VariableSet,
    problem: &OneWayProblem,
    raw: f64,
    mats: &[Stochastic],
) -> RateEstimate {
    // The empty scheme (constant K and C) achieves exactly zero.
    let (value, q, r) = if raw > 0.0 {
        (raw, mats[0].clone(), mats[1].clone())
    } else {
        (
            0.0,
            Stochastic::from_map(&vec![0; problem.na], problem.nk),
            Stochastic::from_map(&vec![0; problem.nk], problem.nc),
        )
    };
    RateEstimate {
        value,
        bound: Bound::LowerBound,
        witness: Some(witness(d, a, &q, &r)),
        restarts_used: 0,
        best_restart_objective_trace: Vec::new(),
        raw_value: raw,
        auxiliary_cardinalities: vec![problem.nk, problem.nc],
    }
}

/// Multi-start local ascent of the one-way objective; `communicator` plays A.
pub fn skar_one_way(
    d: &JointDistribution,
    communicator: &VariableSet,
    partner: &VariableSet,
    eavesdropper: &VariableSet,
    cfg: &OptimizerConfig,
) -> Result<RateEstimate> {
    cfg.validate()?;
    let problem = OneWayProblem::new(d, communicator, partner, eavesdropper)?;
    let opt = optimize::maximize(&problem, cfg);
    let mut est = estimate(d, communicator, &problem, opt.value, &opt.mats);
    est.restarts_used = opt.restarts_used;
    est.best_restart_objective_trace = opt.trace;
    Ok(est)
}

/// Restricted growth strings of length `n`: one representative of every
/// set partition of `{0..n}` under relabeling of blocks.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, blocks: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=blocks {
            prefix.push(label);
            extend(prefix, blocks.max(label + 1), n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), 0, n, &mut out);
    out
}

/// Best one-way objective over deterministic K = f(A), C = g(K), covering
/// every deterministic map at the capped cardinalities.
pub fn skar_one_way_deterministic_oracle(
    d: &JointDistribution,
    communicator: &VariableSet,
    partner: &VariableSet,
    eavesdropper: &VariableSet,
) -> Result<RateEstimate> {
    let problem = OneWayProblem::new(d, communicator, partner, eavesdropper)?;
    if problem.na > ORACLE_MAX_ALPHABET {
        return Err(Error::ResourceLimit(format!(
            "communicator alphabet has {} symbols; the exhaustive oracle accepts at most {}",
            problem.na, ORACLE_MAX_ALPHABET
        )));
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for (v, mats) in problem.deterministic_points() {
        if v > best.0 {
            best = (v, mats);
        }
    }
    let mut est = estimate(d, communicator, &problem, best.0, &best.1);
    est.restarts_used = 0;
    Ok(est)
}
