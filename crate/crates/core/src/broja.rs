//! BROJA unique information: the minimum of I(S:T|O) over all joint
//! distributions that share the (S, T) and (O, T) marginals of the input.
//!
//! The feasible set factors over target symbols into transportation
//! polytopes. Their cycles (alternating +/− along a closed row/column tour)
//! generate every feasible direction, so the solver runs exact line
//! searches along each cycle in turn. On the polytope the objective is
//! H(T|O) − H(T|S,O) with H(T|O) fixed, so each line search minimizes a
//! convex function of one variable whose derivative is a sum of
//! log-ratios. Steps that reach a face set the blocking cells to exactly
//! zero.

use std::collections::BTreeSet;

use crate::common::check_disjoint;
use crate::dist::{entropy_of, JointDistribution, VariableSet, ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::rate::{Bound, OptimizerConfig, RateEstimate};

/// Stationarity residual below which a BROJA value is flagged exact.
pub const EXACT_RESIDUAL: f64 = 1e-7;

/// Starting point for the descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrojaStart {
    /// q(s, o, t) = p(s|t) p(o|t) p(t), strictly positive on the support.
    Independent,
    /// Convex blend `w·input + (1 − w)·independent`, with `w` in [0, 1).
    Blend(f64),
}

/// A point of the polytope, stored densely over (s, o, t).
#[derive(Debug, Clone)]
pub struct MarginalPolytopePoint {
    dims: [usize; 3],
    q: Vec<f64>,
    free: Vec<bool>,
}

#[derive(Debug, Clone)]
struct Circuit {
    cells: Vec<usize>,
    signs: Vec<f64>,
}

struct Solver {
    dims: [usize; 3],
    q: Vec<f64>,
    pair: Vec<f64>,
    circuits: Vec<Circuit>,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        for mut tail in combinations(&items[i + 1..], k - 1) {
            tail.insert(0, items[i]);
            out.push(tail);
        }
    }
    out
}

/// Simple cycles of the complete bipartite graph `rows × cols`, as signed
/// cell lists with the smallest cell positive.
fn cycles(rows: &[usize], cols: &[usize]) -> Vec<Vec<(usize, usize, i8)>> {
    let mut seen = BTreeSet::new();
    for k in 2..=rows.len().min(cols.len()) {
        for rs in combinations(rows, k) {
            for cs in combinations(cols, k) {
                for rest in permutations(&rs[1..]) {
                    let mut order = vec![rs[0]];
                    order.extend(rest);
                    for col_order in permutations(&cs) {
                        let mut cells: Vec<(usize, usize, i8)> = Vec::with_capacity(2 * k);
                        for m in 0..k {
                            cells.push((order[m], col_order[m], 1));
                            cells.push((order[(m + 1) % k], col_order[m], -1));
                        }
                        cells.sort();
                        if cells[0].2 < 0 {
                            cells.iter_mut().for_each(|c| c.2 = -c.2);
                        }
                        seen.insert(cells);
                    }
                }
            }
        }
    }
    seen.into_iter().collect()
}

impl MarginalPolytopePoint {
    fn index(&self, s: usize, o: usize, t: usize) -> usize {
        (s * self.dims[1] + o) * self.dims[2] + t
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    /// Largest deviation of the (S,T) and (O,T) marginals from `p`.
    pub fn marginal_error(&self, p: &[f64]) -> f64 {
        let [ns, no, nt] = self.dims;
        let mut err: f64 = 0.0;
        for t in 0..nt {
            for s in 0..ns {
                let (a, b): (f64, f64) = (0..no)
                    .map(|o| (self.q[self.index(s, o, t)], p[self.index(s, o, t)]))
                    .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
                err = err.max((a - b).abs());
            }
            for o in 0..no {
                let (a, b): (f64, f64) = (0..ns)
                    .map(|s| (self.q[self.index(s, o, t)], p[self.index(s, o, t)]))
                    .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
                err = err.max((a - b).abs());
            }
        }
        err
    }
}

/// I(S:T|O) for a dense (s, o, t) tensor.
fn conditional_information(q: &[f64], dims: [usize; 3]) -> f64 {
    let [ns, no, nt] = dims;
    let mut so = vec![0.0; ns * no];
    let mut ot = vec![0.0; no * nt];
    let mut o_only = vec![0.0; no];
    for s in 0..ns {
        for o in 0..no {
            for t in 0..nt {
                let p = q[(s * no + o) * nt + t];
                so[s * no + o] += p;
                ot[o * nt + t] += p;
                o_only[o] += p;
            }
        }
    }
    let v = entropy_of(&so) + entropy_of(&ot) - entropy_of(q) - entropy_of(&o_only);
    v.max(0.0)
}

impl Solver {
    fn new(p: &[f64], dims: [usize; 3], start: BrojaStart) -> (Self, Vec<bool>) {
        let [ns, no, nt] = dims;
        let idx = |s: usize, o: usize, t: usize| (s * no + o) * nt + t;
        let mut st = vec![0.0; ns * nt];
        let mut ot = vec![0.0; no * nt];
        let mut pt = vec![0.0; nt];
        for s in 0..ns {
            for o in 0..no {
                for t in 0..nt {
                    let x = p[idx(s, o, t)];
                    st[s * nt + t] += x;
                    ot[o * nt + t] += x;
                    pt[t] += x;
                }
            }
        }
        let mut free = vec![false; p.len()];
        let mut q = vec![0.0; p.len()];
        let mut circuits = Vec::new();
        for t in 0..nt {
            let rows: Vec<usize> = (0..ns)
                .filter(|&s| st[s * nt + t] > ZERO_THRESHOLD)
                .collect();
            let cols: Vec<usize> = (0..no)
                .filter(|&o| ot[o * nt + t] > ZERO_THRESHOLD)
                .collect();
            for &s in &rows {
                for &o in &cols {
                    let i = idx(s, o, t);
                    free[i] = true;
                    let independent = st[s * nt + t] * ot[o * nt + t] / pt[t];
                    q[i] = match start {
                        BrojaStart::Independent => independent,
                        BrojaStart::Blend(w) => w * p[i] + (1.0 - w) * independent,
                    };
                }
            }
            for cyc in cycles(&rows, &cols) {
                circuits.push(Circuit {
                    cells: cyc.iter().map(|&(s, o, _)| idx(s, o, t)).collect(),
                    signs: cyc.iter().map(|&(_, _, sg)| f64::from(sg)).collect(),
                });
            }
        }
        let mut solver = Self {
            dims,
            q,
            pair: vec![0.0; ns * no],
            circuits,
        };
        solver.refresh_pairs();
        (solver, free)
    }

    fn refresh_pairs(&mut self) {
        let nt = self.dims[2];
        for (w, cells) in self.pair.iter_mut().zip(self.q.chunks(nt)) {
            *w = cells.iter().sum();
        }
    }

    fn pair_of(&self, cell: usize) -> usize {
        cell / self.dims[2]
    }

    /// d/dδ and d²/dδ² of the objective at q + δ·c.
    fn derivatives(&self, c: &Circuit, delta: f64) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (&cell, &s) in c.cells.iter().zip(&c.signs) {
            let q = (self.q[cell] + s * delta).max(0.0);
            let w = (self.pair[self.pair_of(cell)] + s * delta).max(0.0);
            if q <= 0.0 {
                if w > 0.0 {
                    d1 += s * f64::NEG_INFINITY;
                }
                continue;
            }
            d1 += s * (q / w).log2();
            d2 += (1.0 / q - 1.0 / w) / std::f64::consts::LN_2;
        }
        (d1, d2)
    }

    /// Exact minimizer of the objective along `c`, or `None` if no move.
    fn line_search(&self, c: &Circuit) -> Option<f64> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (&cell, &s) in c.cells.iter().zip(&c.signs) {
            if s > 0.0 {
                lo = lo.max(-self.q[cell]);
            } else {
                hi = hi.min(self.q[cell]);
            }
        }
        let (d0, _) = self.derivatives(c, 0.0);
        let (mut a, mut b) = if d0 < 0.0 && hi > 0.0 {
            if self.derivatives(c, hi).0 <= 0.0 {
                return Some(hi);
            }
            (0.0, hi)
        } else if d0 > 0.0 && lo < 0.0 {
            if self.derivatives(c, lo).0 >= 0.0 {
                return Some(lo);
            }
            (lo, 0.0)
        } else {
            return None;
        };
        // derivative is negative at a, positive at b
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let (g, h) = self.derivatives(c, x);
            if g == 0.0 {
                break;
            }
            if g < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let newton = x - g / h;
            x = if g.is_finite() && h > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 1e-16 * (1.0 + x.abs()) || (g.abs() < 1e-14) {
                break;
            }
        }
        Some(x)
    }

    fn apply(&mut self, c: &Circuit, delta: f64) {
        let nt = self.dims[2];
        for (&cell, &s) in c.cells.iter().zip(&c.signs) {
            let v = self.q[cell] + s * delta;
            // a step to the face lands exactly on it
            self.q[cell] = if v <= 1e-300 || (s * delta < 0.0 && self.q[cell] == -s * delta) {
                0.0
            } else {
                v
            };
        }
        for &cell in &c.cells {
            let pair = self.pair_of(cell);
            self.pair[pair] = self.q[pair * nt..(pair + 1) * nt].iter().sum();
        }
    }

    /// Largest rate of decrease over feasible unit circuit directions.
    fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.circuits {
            let (g, _) = self.derivatives(c, 0.0);
            let norm = (c.cells.len() as f64).sqrt();
            for sigma in [1.0, -1.0] {
                let feasible = c
                    .cells
                    .iter()
                    .zip(&c.signs)
                    .all(|(&cell, &s)| sigma * s > 0.0 || self.q[cell] > 0.0);
                let slope = sigma * g;
                if feasible && slope < 0.0 {
                    worst = worst.max(-slope / norm);
                }
            }
        }
        worst
    }
}

/// Output of [`broja_unique_from`].
#[derive(Debug, Clone)]
pub struct BrojaSolution {
    pub estimate: RateEstimate,
    pub minimizer: JointDistribution,
    pub point: MarginalPolytopePoint,
    pub residual: f64,
    /// The input, reordered to (source, other, target).
    pub input: Vec<f64>,
}

fn roles(
    d: &JointDistribution,
    source: &VariableSet,
    other_source: &VariableSet,
    target: &VariableSet,
) -> Result<()> {
    check_disjoint(&[source, other_source, target])?;
    let covered = source.len() + other_source.len() + target.len();
    if [source, other_source, target].iter().any(|s| s.len() != 1) || covered != d.num_vars() {
        return Err(Error::InvalidArgument(
            "BROJA needs a distribution of exactly the two sources and the target".into(),
        ));
    }
    Ok(())
}

pub fn broja_unique_from(
    d: &JointDistribution,
    source: &VariableSet,
    other_source: &VariableSet,
    target: &VariableSet,
    cfg: &OptimizerConfig,
    start: BrojaStart,
) -> Result<BrojaSolution> {
    cfg.validate()?;
    roles(d, source, other_source, target)?;
    if let BrojaStart::Blend(w) = start {
        if !(0.0..1.0).contains(&w) {
            return Err(Error::InvalidArgument(
                "blend weight must lie in [0, 1)".into(),
            ));
        }
    }
    let table = d.table(&[source, other_source, target])?;
    let dims = [table.dims[0], table.dims[1], table.dims[2]];
    let (mut solver, free) = Solver::new(&table.data, dims, start);

    let mut trace = vec![conditional_information(&solver.q, dims)];
    let mut residual = solver.residual();
    for _ in 0..cfg.max_iterations {
        if residual < 1e-12 {
            break;
        }
        let mut moved = false;
        for i in 0..solver.circuits.len() {
            let c = solver.circuits[i].clone();
            if let Some(delta) = solver.line_search(&c) {
                if delta != 0.0 {
                    solver.apply(&c, delta);
                    moved = true;
                }
            }
        }
        let value = conditional_information(&solver.q, dims);
        let previous = *trace.last().expect("trace starts nonempty");
        trace.push(value);
        residual = solver.residual();
        if !moved || (previous - value).abs() < cfg.convergence_tolerance * 1e-6 {
            break;
        }
    }

    let value = conditional_information(&solver.q, dims);
    let point = MarginalPolytopePoint {
        dims,
        q: solver.q.clone(),
        free,
    };
    // scatter back into the caller's variable order
    let order = [
        source.indices()[0],
        other_source.indices()[0],
        target.indices()[0],
    ];
    let shape = d.shape();
    let mut pmf = vec![0.0; d.pmf().len()];
    for (flat, p) in pmf.iter_mut().enumerate() {
        let mut rem = flat;
        let mut idx = vec![0; shape.len()];
        for v in (0..shape.len()).rev() {
            idx[v] = rem % shape[v];
            rem /= shape[v];
        }
        *p = point.q[point.index(idx[order[0]], idx[order[1]], idx[order[2]])];
    }
    let minimizer = JointDistribution::new(d.names().to_vec(), d.alphabets().to_vec(), pmf)?;
    let bound = if residual < EXACT_RESIDUAL {
        Bound::Exact
    } else {
        Bound::UpperBound
    };
    let estimate = RateEstimate {
        value,
        bound,
        witness: None,
        restarts_used: 1,
        best_restart_objective_trace: trace,
        raw_value: value,
        auxiliary_cardinalities: Vec::new(),
    };
    Ok(BrojaSolution {
        estimate,
        minimizer,
        point,
        residual,
        input: table.data,
    })
}

/// Unique information of `source` about `target`, and the minimizing joint.
pub fn broja_unique(
    d: &JointDistribution,
    source: &VariableSet,
    other_source: &VariableSet,
    target: &VariableSet,
    cfg: &OptimizerConfig,
) -> Result<(RateEstimate, JointDistribution)> {
    let sol = broja_unique_from(
        d,
        source,
        other_source,
        target,
        cfg,
        BrojaStart::Independent,
    )?;
    Ok((sol.estimate, sol.minimizer))
}

impl MarginalPolytopePoint {
    /// Whether each cell may be nonzero on the polytope.
    pub fn free_cells(&self) -> &[bool] {
        &self.free
    }
}
