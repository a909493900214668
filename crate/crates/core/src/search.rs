//! Seeded scans over random three-variable distributions, recording how far
//! assembled decompositions are from consistent.
//!
//! The corpus always starts with three sentinels (the pointwise unique
//! distribution, three copies of a bit, three independent bits) followed by
//! `num_samples` Dirichlet draws. Sample `i` is drawn with
//! [`sub_seed`]`(seed, i)`, every record is computed independently and the
//! records are merged in corpus order, so a report depends only on its
//! configuration.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::optimize::sub_seed;
use crate::pid::{
    assemble_from_uniques, camel_pid, elephant_pid, twoway_pid, MeasureLabel, PartialDecomposition,
    PidRoles,
};
use crate::rate::OptimizerConfig;

/// Version tag of the serialized report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Restart multiplier used to re-check a suspected violation.
pub const REVERIFY_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub num_samples: usize,
    pub alphabet_sizes: (usize, usize, usize),
    pub dirichlet_concentration: f64,
    pub seed: u64,
    pub gap_threshold: f64,
    pub optimizer: OptimizerConfig,
}

impl SearchConfig {
    pub fn new(num_samples: usize, alphabet_sizes: (usize, usize, usize), seed: u64) -> Self {
        Self {
            num_samples,
            alphabet_sizes,
            dirichlet_concentration: 1.0,
            seed,
            gap_threshold: 1e-3,
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (x, y, z) = self.alphabet_sizes;
        if self.num_samples == 0 || x == 0 || y == 0 || z == 0 {
            return Err(Error::InvalidArgument(
                "sample count and alphabet sizes must be positive".into(),
            ));
        }
        if !(self.dirichlet_concentration > 0.0) || !(self.gap_threshold > 0.0) {
            return Err(Error::InvalidArgument(
                "concentration and gap threshold must be positive".into(),
            ));
        }
        self.optimizer.validate()
    }
}

/// Symmetric Dirichlet draw over all cells of an (S0, S1, T) joint with the
/// given alphabet sizes. Symbols are `0`, `1`, ...
pub fn sample_distribution(
    alphabet_sizes: (usize, usize, usize),
    concentration: f64,
    seed: u64,
) -> Result<JointDistribution> {
    let (x, y, z) = alphabet_sizes;
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("concentration {concentration}: {e}")))?;
    if x == 0 || y == 0 || z == 0 {
        return Err(Error::InvalidArgument(
            "alphabet sizes must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pmf: Vec<f64> = (0..x * y * z).map(|_| gamma.sample(&mut rng)).collect();
    let total: f64 = pmf.iter().sum();
    if total > 0.0 {
        pmf.iter_mut().for_each(|p| *p /= total);
    } else {
        // every draw underflowed; only possible for tiny concentrations
        pmf.iter_mut().for_each(|p| *p = 0.0);
        pmf[0] = 1.0;
    }
    let symbols = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    JointDistribution::new(
        vec!["S0".into(), "S1".into(), "T".into()],
        vec![symbols(x), symbols(y), symbols(z)],
        pmf,
    )
}

/// Where a corpus entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    PointwiseUnique,
    Copy,
    Independent,
    Random,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::PointwiseUnique => "pointwise-unique",
            Origin::Copy => "copy",
            Origin::Independent => "independent",
            Origin::Random => "random",
        }
    }
}

/// The sentinels followed by the random draws.
pub fn corpus(cfg: &SearchConfig) -> Result<Vec<(Origin, JointDistribution)>> {
    cfg.validate()?;
    let mut out = vec![
        (Origin::PointwiseUnique, fixtures::pointwise_unique()),
        (Origin::Copy, fixtures::copy_bits(3)),
        (Origin::Independent, fixtures::independent_bits(3)),
    ];
    for i in 0..cfg.num_samples {
        let d = sample_distribution(
            cfg.alphabet_sizes,
            cfg.dirichlet_concentration,
            sub_seed(cfg.seed, i as u64),
        )?;
        out.push((Origin::Random, d));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    Consistency,
    BracketConvergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRecord {
    pub index: usize,
    pub origin: Origin,
    pub digest: String,
    pub measure: MeasureLabel,
    pub unique_0: Option<f64>,
    pub unique_1: Option<f64>,
    pub source_0_information: Option<f64>,
    pub source_1_information: Option<f64>,
    /// |U0 + I(S1:T) − U1 − I(S0:T)|; absent for unconverged brackets.
    pub consistency_gap: Option<f64>,
    /// Gap before re-verification, when re-verification ran.
    pub first_pass_gap: Option<f64>,
    /// Both brackets converged; only set by the bracket scan.
    pub converged: Option<bool>,
    /// Gap above threshold after re-verification.
    pub violation: bool,
    /// Inline distribution at full precision.
    pub distribution: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSummary {
    pub measure: MeasureLabel,
    pub records: usize,
    pub max_gap: f64,
    pub violations: usize,
    pub errors: usize,
    pub converged: Option<usize>,
    pub violations_among_converged: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub schema_version: u32,
    pub kind: ScanKind,
    pub config: SearchConfig,
    pub records: Vec<SearchRecord>,
    pub summary: SearchSummary,
}

fn blank_record(
    index: usize,
    origin: Origin,
    d: &JointDistribution,
    measure: MeasureLabel,
) -> SearchRecord {
    SearchRecord {
        index,
        origin,
        digest: d.digest(),
        measure,
        unique_0: None,
        unique_1: None,
        source_0_information: None,
        source_1_information: None,
        consistency_gap: None,
        first_pass_gap: None,
        converged: None,
        violation: false,
        distribution: d.to_inline(),
        error: None,
    }
}

fn fill(record: &mut SearchRecord, p: &PartialDecomposition) {
    record.unique_0 = Some(p.unique_0);
    record.unique_1 = Some(p.unique_1);
    record.source_0_information = Some(p.source_0_information);
    record.source_1_information = Some(p.source_1_information);
    record.consistency_gap = Some(p.consistency_gap);
}

fn reverify_config(cfg: &SearchConfig) -> OptimizerConfig {
    OptimizerConfig {
        restarts: cfg.optimizer.restarts * REVERIFY_FACTOR,
        ..cfg.optimizer.clone()
    }
}

/// Gap scan for the camel or elephant one-way assembly.
pub fn scan_consistency(measure: MeasureLabel, cfg: &SearchConfig) -> Result<SearchReport> {
    let assemble = match measure {
        MeasureLabel::CamelOneway => camel_pid,
        MeasureLabel::ElephantOneway => elephant_pid,
        other => {
            return Err(Error::InvalidArgument(format!(
                "consistency scan needs camel-oneway or elephant-oneway, not {other}"
            )))
        }
    };
    let items = corpus(cfg)?;
    let records = items
        .par_iter()
        .enumerate()
        .map(|(i, (origin, d))| {
            let mut record = blank_record(i, *origin, d, measure);
            let run =
                |opt: &OptimizerConfig| PidRoles::default_for(d).and_then(|r| assemble(d, &r, opt));
            match run(&cfg.optimizer) {
                Ok(p) => {
                    fill(&mut record, &p);
                    if p.consistency_gap > cfg.gap_threshold {
                        record.first_pass_gap = Some(p.consistency_gap);
                        match run(&reverify_config(cfg)) {
                            Ok(q) => fill(&mut record, &q),
                            Err(e) => record.error = Some(e.to_string()),
                        }
                        record.violation = record
                            .consistency_gap
                            .is_some_and(|g| g > cfg.gap_threshold);
                    }
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect();
    Ok(finish(ScanKind::Consistency, measure, cfg, records))
}

/// Both two-way brackets per sample; the gap is assembled from the lower
/// ends only when both brackets converged.
pub fn scan_bracket_convergence(cfg: &SearchConfig) -> Result<SearchReport> {
    let measure = MeasureLabel::TwoWayLower;
    let items = corpus(cfg)?;
    let records = items
        .par_iter()
        .enumerate()
        .map(|(i, (origin, d))| {
            let mut record = blank_record(i, *origin, d, measure);
            let run = |opt: &OptimizerConfig| -> Result<Option<PartialDecomposition>> {
                let roles = PidRoles::default_for(d)?;
                let two = twoway_pid(d, &roles, opt)?;
                if !two.converged() {
                    return Ok(None);
                }
                let [b0, b1] = &two.brackets;
                assemble_from_uniques(d, &roles, &b0.lower, &b1.lower, measure).map(Some)
            };
            match run(&cfg.optimizer) {
                Ok(None) => record.converged = Some(false),
                Ok(Some(p)) => {
                    record.converged = Some(true);
                    fill(&mut record, &p);
                    if p.consistency_gap > cfg.gap_threshold {
                        record.first_pass_gap = Some(p.consistency_gap);
                        match run(&reverify_config(cfg)) {
                            Ok(Some(q)) => fill(&mut record, &q),
                            // more restarts only tighten a bracket
                            Ok(None) => {}
                            Err(e) => record.error = Some(e.to_string()),
                        }
                        record.violation = record
                            .consistency_gap
                            .is_some_and(|g| g > cfg.gap_threshold);
                    }
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect();
    Ok(finish(ScanKind::BracketConvergence, measure, cfg, records))
}

fn finish(
    kind: ScanKind,
    measure: MeasureLabel,
    cfg: &SearchConfig,
    records: Vec<SearchRecord>,
) -> SearchReport {
    let max_gap = records
        .iter()
        .filter_map(|r| r.consistency_gap)
        .fold(0.0, f64::max);
    let violations = records.iter().filter(|r| r.violation).count();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let (converged, violations_among_converged) = match kind {
        ScanKind::Consistency => (None, None),
        ScanKind::BracketConvergence => {
            let conv = records.iter().filter(|r| r.converged == Some(true));
            (
                Some(conv.clone().count()),
                Some(conv.filter(|r| r.violation).count()),
            )
        }
    };
    SearchReport {
        schema_version: SCHEMA_VERSION,
        kind,
        config: cfg.clone(),
        summary: SearchSummary {
            measure,
            records: records.len(),
            max_gap,
            violations,
            errors,
            converged,
            violations_among_converged,
        },
        records,
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:?}"))
}

impl SearchReport {
    /// Tab-separated records under a `#` header carrying the configuration,
    /// ending with a `#` summary line.
    pub fn to_tsv(&self) -> String {
        let c = &self.config;
        let (x, y, z) = c.alphabet_sizes;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# schema_version={} kind={} measure={} seed={} samples={} sizes={x}x{y}x{z} concentration={:?} gap_threshold={:?} restarts={} max_iterations={} convergence_tolerance={:?} optimizer_seed={}",
            self.schema_version,
            match self.kind {
                ScanKind::Consistency => "consistency",
                ScanKind::BracketConvergence => "bracket-convergence",
            },
            self.summary.measure,
            c.seed,
            c.num_samples,
            c.dirichlet_concentration,
            c.gap_threshold,
            c.optimizer.restarts,
            c.optimizer.max_iterations,
            c.optimizer.convergence_tolerance,
            c.optimizer.seed,
        );
        out.push_str("index\torigin\tdigest\tmeasure\tunique_0\tunique_1\ti_s0_t\ti_s1_t\tgap\tfirst_pass_gap\tconverged\tviolation\tdistribution\terror\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.index,
                r.origin.as_str(),
                r.digest,
                r.measure,
                opt_num(r.unique_0),
                opt_num(r.unique_1),
                opt_num(r.source_0_information),
                opt_num(r.source_1_information),
                opt_num(r.consistency_gap),
                opt_num(r.first_pass_gap),
                r.converged.map_or("-", |b| if b { "yes" } else { "no" }),
                if r.violation { "yes" } else { "no" },
                r.distribution,
                r.error.as_deref().unwrap_or("-").replace(['\t', '\n'], " "),
            );
        }
        let s = &self.summary;
        let _ = write!(
            out,
            "# summary records={} max_gap={:?} violations={} errors={}",
            s.records, s.max_gap, s.violations, s.errors
        );
        if let (Some(c), Some(v)) = (s.converged, s.violations_among_converged) {
            let _ = write!(out, " converged={c} violations_among_converged={v}");
        }
        out.push('\n');
        out
    }
}
