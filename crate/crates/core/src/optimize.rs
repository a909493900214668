//! Multi-start local ascent over tuples of row-stochastic matrices.
//!
//! Each row is the softmax of free logits, so iterates stay strictly inside
//! the simplex. A restart runs gradient ascent with a backtracking line
//! search whose step grows after every accepted move; this matters because
//! many optima of the rate objectives sit on simplex corners, which the
//! logits only reach at infinity. Once a restart stalls it is polished by
//! snapping small entries to zero and keeping any snapped point that scores
//! higher.
//!
//! Restart `i` draws its starting rows from a flat Dirichlet seeded by
//! [`sub_seed`]`(seed, i)`. An objective may also supply warm starts, which
//! are scored as given and then ascended from a slightly smoothed copy;
//! they run after the random restarts and do not depend on the restart
//! count. The winner is the highest value with ties going to the lowest
//! index, so results do not depend on thread count and never decrease as
//! restarts are added.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::rate::OptimizerConfig;

/// Dense row-stochastic matrix used inside the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Stochastic {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Stochastic {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Row `i` maps deterministically to column `map[i]`.
    pub fn from_map(map: &[usize], cols: usize) -> Self {
        let mut m = Self::zeros(map.len(), cols);
        for (i, &j) in map.iter().enumerate() {
            m.data[i * cols + j] = 1.0;
        }
        m
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![1.0 / cols as f64; rows * cols],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// A smooth function of several stochastic matrices.
pub trait Objective: Sync {
    fn shapes(&self) -> Vec<(usize, usize)>;

    fn value(&self, mats: &[Stochastic]) -> f64;

    /// Writes d(value)/d(entry) into `grads` (same shapes as `mats`).
    fn value_and_gradient(&self, mats: &[Stochastic], grads: &mut [Stochastic]) -> f64;

    /// Extra starting points, usually deterministic channels.
    fn warm_starts(&self) -> Vec<Vec<Stochastic>> {
        Vec::new()
    }
}

/// Negation adapter for minimization.
pub struct Negated<'a, O: Objective>(pub &'a O);

impl<O: Objective> Objective for Negated<'_, O> {
    fn shapes(&self) -> Vec<(usize, usize)> {
        self.0.shapes()
    }

    fn value(&self, mats: &[Stochastic]) -> f64 {
        -self.0.value(mats)
    }

    fn value_and_gradient(&self, mats: &[Stochastic], grads: &mut [Stochastic]) -> f64 {
        let v = self.0.value_and_gradient(mats, grads);
        for g in grads.iter_mut() {
            g.data.iter_mut().for_each(|x| *x = -*x);
        }
        -v
    }

    fn warm_starts(&self) -> Vec<Vec<Stochastic>> {
        self.0.warm_starts()
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub value: f64,
    pub mats: Vec<Stochastic>,
    pub trace: Vec<f64>,
    pub restart: usize,
    pub restarts_used: usize,
}

#[derive(Debug, Clone)]
struct RestartResult {
    value: f64,
    mats: Vec<Stochastic>,
    trace: Vec<f64>,
}

/// Derives an independent 64-bit seed for work item `index`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x243f_6a88_85a3_08d3)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn maximize<O: Objective>(objective: &O, cfg: &OptimizerConfig) -> Optimum {
    let warm = objective.warm_starts();
    let results: Vec<RestartResult> = (0..cfg.restarts + warm.len())
        .into_par_iter()
        .map(|i| match i.checked_sub(cfg.restarts) {
            None => run_restart(objective, cfg, sub_seed(cfg.seed, i as u64)),
            Some(w) => run_warm_start(objective, cfg, &warm[w]),
        })
        .collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value > results[best].value {
            best = i;
        }
    }
    let RestartResult { value, mats, trace } = results.into_iter().nth(best).expect("restarts > 0");
    Optimum {
        value,
        mats,
        trace,
        restart: best,
        restarts_used: cfg.restarts,
    }
}

pub fn minimize<O: Objective>(objective: &O, cfg: &OptimizerConfig) -> Optimum {
    let mut opt = maximize(&Negated(objective), cfg);
    opt.value = -opt.value;
    opt.trace.iter_mut().for_each(|x| *x = -*x);
    opt
}

fn softmax_into(logits: &[f64], cols: usize, out: &mut [f64]) {
    for (row, dst) in logits.chunks(cols).zip(out.chunks_mut(cols)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (x, d) in row.iter().zip(dst.iter_mut()) {
            *d = (x - max).exp();
            sum += *d;
        }
        dst.iter_mut().for_each(|d| *d /= sum);
    }
}

fn realize(shapes: &[(usize, usize)], logits: &[Vec<f64>], mats: &mut [Stochastic]) {
    for ((&(_, cols), l), m) in shapes.iter().zip(logits).zip(mats.iter_mut()) {
        softmax_into(l, cols, &mut m.data);
    }
}

fn run_restart<O: Objective>(objective: &O, cfg: &OptimizerConfig, seed: u64) -> RestartResult {
    let shapes = objective.shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Flat Dirichlet rows via normalized exponentials; softmax is invariant
    // to the normalization so logs of the raw draws suffice.
    let logits: Vec<Vec<f64>> = shapes
        .iter()
        .map(|&(r, c)| {
            (0..r * c)
                .map(|_| {
                    let x: f64 = Exp1.sample(&mut rng);
                    x.max(1e-300).ln()
                })
                .collect()
        })
        .collect();
    ascend(objective, cfg, logits)
}

/// Scores `start` exactly, then ascends from it mixed with 1e-3 of the
/// uniform rows, since softmax gradients vanish on the boundary.
fn run_warm_start<O: Objective>(
    objective: &O,
    cfg: &OptimizerConfig,
    start: &[Stochastic],
) -> RestartResult {
    let logits = start
        .iter()
        .map(|m| {
            let u = 1e-3 / m.cols as f64;
            m.data.iter().map(|p| (0.999 * p + u).ln()).collect()
        })
        .collect();
    let mut result = ascend(objective, cfg, logits);
    let exact = objective.value(start);
    if exact > result.value {
        result.value = exact;
        result.mats = start.to_vec();
        result.trace.push(exact);
    }
    result
}

fn ascend<O: Objective>(
    objective: &O,
    cfg: &OptimizerConfig,
    mut logits: Vec<Vec<f64>>,
) -> RestartResult {
    let shapes = objective.shapes();
    let mut mats: Vec<Stochastic> = shapes
        .iter()
        .map(|&(r, c)| Stochastic::zeros(r, c))
        .collect();
    let mut grads = mats.clone();
    let mut trial = mats.clone();
    let mut trial_logits = logits.clone();
    let mut step = 1.0;
    let mut trace = Vec::new();

    realize(&shapes, &logits, &mut mats);
    let mut value = objective.value_and_gradient(&mats, &mut grads);
    for _ in 0..cfg.max_iterations {
        trace.push(value);
        // chain rule through the softmax of each row
        let mut direction: Vec<Vec<f64>> = Vec::with_capacity(shapes.len());
        let mut norm2 = 0.0;
        for (m, g) in mats.iter().zip(&grads) {
            let mut d = vec![0.0; m.data.len()];
            for ((prow, grow), drow) in m
                .data
                .chunks(m.cols)
                .zip(g.data.chunks(m.cols))
                .zip(d.chunks_mut(m.cols))
            {
                let mean: f64 = prow.iter().zip(grow).map(|(p, g)| p * g).sum();
                for ((p, g), out) in prow.iter().zip(grow).zip(drow.iter_mut()) {
                    *out = p * (g - mean);
                    norm2 += *out * *out;
                }
            }
            direction.push(d);
        }
        if !(norm2 > 1e-30) {
            break;
        }
        let mut accepted = None;
        while step > 1e-12 {
            for ((t, l), d) in trial_logits.iter_mut().zip(&logits).zip(&direction) {
                for ((t, l), d) in t.iter_mut().zip(l).zip(d) {
                    *t = l + step * d;
                }
            }
            realize(&shapes, &trial_logits, &mut trial);
            let v = objective.value(&trial);
            if v >= value + 1e-4 * step * norm2 {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }
        let Some(new_value) = accepted else { break };
        std::mem::swap(&mut logits, &mut trial_logits);
        step = (step * 2.0).min(1e8);
        let change = new_value - value;
        realize(&shapes, &logits, &mut mats);
        value = objective.value_and_gradient(&mats, &mut grads);
        if change < cfg.convergence_tolerance {
            break;
        }
    }
    trace.push(value);

    let (value, mats) = polish(objective, value, mats);
    if trace.last() != Some(&value) {
        trace.push(value);
    }
    RestartResult { value, mats, trace }
}

/// Tries boundary points near the current iterate: entries under each
/// threshold are zeroed (rows renormalized), and finally every row is
/// rounded to its argmax.
fn polish<O: Objective>(
    objective: &O,
    value: f64,
    mats: Vec<Stochastic>,
) -> (f64, Vec<Stochastic>) {
    let mut best = (value, mats.clone());
    for threshold in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8, f64::INFINITY] {
        let snapped: Vec<Stochastic> = mats.iter().map(|m| snap(m, threshold)).collect();
        let v = objective.value(&snapped);
        if v > best.0 {
            best = (v, snapped);
        }
    }
    best
}

fn snap(m: &Stochastic, threshold: f64) -> Stochastic {
    let mut out = m.clone();
    for row in out.data.chunks_mut(m.cols) {
        if threshold.is_infinite() {
            let (arg, _) = row
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (j, &x)| if x > acc.1 { (j, x) } else { acc },
                );
            row.iter_mut()
                .enumerate()
                .for_each(|(j, x)| *x = if j == arg { 1.0 } else { 0.0 });
            continue;
        }
        let max = row.iter().cloned().fold(0.0, f64::max);
        for x in row.iter_mut() {
            if *x < threshold && *x < max {
                *x = 0.0;
            }
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Linear objective on one 2x3 matrix; optimum is each row on its
    /// largest weight.
    struct Linear(Vec<f64>);

    impl Objective for Linear {
        fn shapes(&self) -> Vec<(usize, usize)> {
            vec![(2, 3)]
        }

        fn value(&self, mats: &[Stochastic]) -> f64 {
            mats[0].data.iter().zip(&self.0).map(|(p, w)| p * w).sum()
        }

        fn value_and_gradient(&self, mats: &[Stochastic], grads: &mut [Stochastic]) -> f64 {
            grads[0].data.copy_from_slice(&self.0);
            self.value(mats)
        }
    }

    #[test]
    fn reaches_corner_exactly() {
        let obj = Linear(vec![0.1, 0.7, 0.3, 0.5, 0.2, -1.0]);
        let opt = maximize(&obj, &OptimizerConfig::default());
        assert_eq!(opt.value, 1.2);
        assert_eq!(opt.mats[0].data, [0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn minimize_flips_sign() {
        let obj = Linear(vec![0.1, 0.7, 0.3, 0.5, 0.2, -1.0]);
        let opt = minimize(&obj, &OptimizerConfig::default());
        assert_eq!(opt.value, -0.9);
    }

    #[test]
    fn deterministic_per_seed() {
        let obj = Linear(vec![0.1, 0.7, 0.3, 0.5, 0.2, -1.0]);
        let cfg = OptimizerConfig {
            restarts: 3,
            max_iterations: 5,
            ..OptimizerConfig::with_seed(9)
        };
        let a = maximize(&obj, &cfg);
        let b = maximize(&obj, &cfg);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.mats, b.mats);
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, 0), sub_seed(1, 1));
        assert_ne!(sub_seed(1, 0), sub_seed(2, 0));
        assert_eq!(sub_seed(5, 3), sub_seed(5, 3));
    }
}
