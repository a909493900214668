use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pid_skar::search::{self, SearchConfig, SearchReport};
use pid_skar::{
    broja_pid, camel_pid, elephant_pid, nocomm_pid, skar_no_communication, skar_one_way,
    skar_one_way_deterministic_oracle, two_way_bracket, twoway_pid, Error, JointDistribution,
    MeasureLabel, OptimizerConfig, PartialDecomposition, PidRoles, RateBracket, RateEstimate,
    VariableSet,
};
use serde::Serialize;
use serde_json::{json, Value};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "pid-skar",
    version,
    about = "Partial information decompositions from secret key agreement rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies and (conditional) mutual informations of a distribution.
    Info(InputArgs),
    /// A secret key agreement rate.
    Skar {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Scheme::OneWay)]
        scheme: Scheme,
        /// Use the exhaustive deterministic-channel search (one-way only).
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        roles: SkarRoles,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// A four-component decomposition with its consistency gap.
    Pid {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "camel")]
        measure: PidMeasure,
        /// Target variable; the other two are the sources. Defaults to the last.
        #[arg(long)]
        target: Option<String>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Lower and upper bounds on the two-way rate.
    Bracket {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        roles: SkarRoles,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Scan random distributions for decomposition inconsistencies.
    Search {
        #[arg(long, default_value = "camel")]
        measure: SearchMeasure,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Alphabet sizes as AxBxC; repeat to sweep. Defaults to 2x2x2 and 3x3x3.
        #[arg(long = "sizes", value_parser = parse_sizes)]
        sizes: Vec<(usize, usize, usize)>,
        #[arg(long, default_value_t = 1.0)]
        concentration: f64,
        #[arg(long, default_value_t = 1e-3)]
        gap_threshold: f64,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Rewrite a distribution with every cell at full precision.
    Dump {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Distribution file, or `-` for standard input.
    path: Option<PathBuf>,
    /// Distribution given inline with `;` between lines.
    #[arg(long, conflicts_with = "path")]
    inline: Option<String>,
}

#[derive(Args)]
struct SkarRoles {
    /// Comma-separated variables of A. Defaults to the first variable.
    #[arg(long)]
    communicator: Option<String>,
    /// Comma-separated variables of B. Defaults to the last variable.
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated variables of E. Defaults to all remaining variables.
    #[arg(long)]
    eavesdropper: Option<String>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long, default_value_t = 25)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

impl OptArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            seed: self.seed,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    None,
    OneWay,
    TwoWay,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PidMeasure {
    One(MeasureLabel),
    TwoWay,
}

impl std::str::FromStr for PidMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "two-way" {
            return Ok(PidMeasure::TwoWay);
        }
        match s.parse::<MeasureLabel>() {
            Ok(MeasureLabel::TwoWayLower | MeasureLabel::TwoWayUpper) => Ok(PidMeasure::TwoWay),
            Ok(m) => Ok(PidMeasure::One(m)),
            Err(_) => Err(format!(
                "expected one of camel, elephant, broja, no-communication, two-way; got `{s}`"
            )),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SearchMeasure {
    Consistency(MeasureLabel),
    Brackets,
}

impl std::str::FromStr for SearchMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "camel" | "camel-oneway" => Ok(SearchMeasure::Consistency(MeasureLabel::CamelOneway)),
            "elephant" | "elephant-oneway" => {
                Ok(SearchMeasure::Consistency(MeasureLabel::ElephantOneway))
            }
            "two-way" => Ok(SearchMeasure::Brackets),
            _ => Err(format!("expected camel, elephant or two-way; got `{s}`")),
        }
    }
}

fn parse_sizes(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad size `{s}`: {e}"))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok((a, b, c)),
        _ => Err(format!("sizes look like 2x2x2, got `{s}`")),
    }
}

/// Failure with its exit status.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResourceLimit(_) => 3,
            _ => 2,
        };
        Failure(code, e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Info(input) => info(&load(&input)?),
        Command::Skar {
            input,
            scheme,
            oracle,
            roles,
            opt,
        } => skar(&load(&input)?, scheme, oracle, &roles, &opt),
        Command::Pid {
            input,
            measure,
            target,
            opt,
        } => pid(&load(&input)?, measure, target.as_deref(), &opt),
        Command::Bracket { input, roles, opt } => bracket(&load(&input)?, &roles, &opt),
        Command::Search {
            measure,
            samples,
            sizes,
            concentration,
            gap_threshold,
            opt,
        } => search_cmd(measure, samples, sizes, concentration, gap_threshold, &opt),
        Command::Dump { input, format } => {
            let d = load(&input)?;
            Ok(match format {
                Format::Table => d.to_text(),
                Format::Structured => to_json(json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "dump",
                    "distribution": distribution_json(&d),
                    "names": d.names(),
                    "alphabets": d.alphabets(),
                    "pmf": d.pmf(),
                })),
            })
        }
    }
}

fn load(input: &InputArgs) -> CliResult<JointDistribution> {
    if let Some(text) = &input.inline {
        return Ok(JointDistribution::parse_inline(text)?);
    }
    let text = match input.path.as_deref() {
        None => {
            return Err(Failure(
                2,
                "no distribution given; pass a file or --inline".into(),
            ))
        }
        Some(p) if p.as_os_str() == "-" => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure(2, format!("reading standard input: {e}")))?;
            s
        }
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure(2, format!("reading {}: {e}", p.display())))?,
    };
    Ok(JointDistribution::parse(&text)?)
}

fn to_json(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

fn value_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn distribution_json(d: &JointDistribution) -> Value {
    json!({ "digest": d.digest(), "inline": d.to_inline() })
}

/// Up to six decimals with trailing zeros dropped.
fn decimal(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `p/q` when `v` is within 1e-9 of a non-integer fraction with q ≤ 64.
fn fraction(v: f64) -> Option<String> {
    if (v - v.round()).abs() <= 1e-9 {
        return None;
    }
    (2..=64u32).find_map(|q| {
        let p = (v * q as f64).round();
        ((v - p / q as f64).abs() <= 1e-9).then(|| format!("{}/{q}", p as i64))
    })
}

fn bits(v: f64) -> String {
    match fraction(v) {
        Some(f) => format!("{} bit [{f}]", decimal(v)),
        None => format!("{} bit", decimal(v)),
    }
}

fn rate_line(r: &RateEstimate) -> String {
    match fraction(r.value) {
        Some(f) => format!("{} bit ({}) [{f}]", decimal(r.value), r.bound),
        None => format!("{} bit ({})", decimal(r.value), r.bound),
    }
}

fn bracket_line(b: &RateBracket) -> String {
    format!(
        "[{}, {}] {}",
        decimal(b.lower.value),
        decimal(b.upper.value),
        if b.converged {
            "converged"
        } else {
            "not converged"
        }
    )
}

fn names(d: &JointDistribution, set: &VariableSet) -> Vec<String> {
    set.indices()
        .iter()
        .map(|&i| d.names()[i].clone())
        .collect()
}

fn label(d: &JointDistribution, set: &VariableSet) -> String {
    names(d, set).concat()
}

fn info(d: &JointDistribution) -> CliResult<String> {
    let n = d.num_vars();
    let single: Vec<VariableSet> = (0..n).map(VariableSet::single).collect();
    let mut lines: Vec<(String, f64)> = Vec::new();
    for v in &single {
        lines.push((format!("H({})", label(d, v)), d.entropy(v)?));
    }
    if n > 1 {
        lines.push((
            format!("H({})", label(d, &d.all_vars())),
            d.entropy(&d.all_vars())?,
        ));
    }
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (&single[i], &single[j]);
            lines.push((
                format!("I({}:{})", label(d, x), label(d, y)),
                d.mutual_information(x, y)?,
            ));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in (0..n).filter(|&k| k != i && k != j) {
                let (x, y, z) = (&single[i], &single[j], &single[k]);
                let cmi = d.conditional_mutual_information(x, y, z)?;
                lines.push((
                    format!("I({}:{}|{})", label(d, x), label(d, y), label(d, z)),
                    cmi,
                ));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in (0..n).filter(|&k| k != i && k != j) {
                let pair = single[i].union(&single[j])?;
                let z = &single[k];
                lines.push((
                    format!("I({}:{})", label(d, &pair), label(d, z)),
                    d.mutual_information(&pair, z)?,
                ));
            }
        }
    }
    let mut out = format!("variables: {}\n", d.names().join(" "));
    for (name, v) in &lines {
        out.push_str(&format!("{name} = {}\n", bits(*v)));
    }
    Ok(out)
}

struct Roles {
    a: VariableSet,
    b: VariableSet,
    e: VariableSet,
}

fn variable_set(d: &JointDistribution, list: &str) -> CliResult<VariableSet> {
    let parts: Vec<&str> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    Ok(d.set(&parts)?)
}

fn skar_roles(d: &JointDistribution, r: &SkarRoles) -> CliResult<Roles> {
    let n = d.num_vars();
    if n < 2 {
        return Err(Failure(
            2,
            "key agreement needs at least two variables".into(),
        ));
    }
    let b = match &r.target {
        Some(s) => variable_set(d, s)?,
        None => VariableSet::single(n - 1),
    };
    let a = match &r.communicator {
        Some(s) => variable_set(d, s)?,
        None => {
            let first = (0..n)
                .find(|i| !b.indices().contains(i))
                .ok_or_else(|| Failure(2, "no variable left for the communicator".into()))?;
            VariableSet::single(first)
        }
    };
    let e = match &r.eavesdropper {
        Some(s) => variable_set(d, s)?,
        None => VariableSet::new(
            (0..n)
                .filter(|i| !a.indices().contains(i) && !b.indices().contains(i))
                .collect(),
        )?,
    };
    if !a.is_disjoint(&b) || !a.is_disjoint(&e) || !b.is_disjoint(&e) {
        return Err(Failure(
            2,
            "communicator, target and eavesdropper must not overlap".into(),
        ));
    }
    Ok(Roles { a, b, e })
}

fn roles_json(d: &JointDistribution, r: &Roles) -> Value {
    json!({
        "communicator": names(d, &r.a),
        "target": names(d, &r.b),
        "eavesdropper": names(d, &r.e),
    })
}

fn skar(
    d: &JointDistribution,
    scheme: Scheme,
    oracle: bool,
    r: &SkarRoles,
    opt: &OptArgs,
) -> CliResult<String> {
    let roles = skar_roles(d, r)?;
    let cfg = opt.config();
    cfg.validate()?;
    if oracle && scheme != Scheme::OneWay {
        return Err(Failure(
            2,
            "--oracle applies to the one-way scheme only".into(),
        ));
    }
    let (a, b, e) = (label(d, &roles.a), label(d, &roles.b), label(d, &roles.e));
    let (arrow, scheme_name) = match scheme {
        Scheme::None => (":", "none"),
        Scheme::OneWay => ("→", "one-way"),
        Scheme::TwoWay => ("↔", "two-way"),
    };
    let header = format!("S({a} {arrow} {b} || {e})");
    let (line, result) = match scheme {
        Scheme::None => {
            let r = skar_no_communication(d, &roles.a, &roles.b, &roles.e)?;
            (rate_line(&r), json!({ "rate": value_json(&r) }))
        }
        Scheme::OneWay => {
            let r = if oracle {
                skar_one_way_deterministic_oracle(d, &roles.a, &roles.b, &roles.e)?
            } else {
                skar_one_way(d, &roles.a, &roles.b, &roles.e, &cfg)?
            };
            (rate_line(&r), json!({ "rate": value_json(&r) }))
        }
        Scheme::TwoWay => {
            let br = two_way_bracket(d, &roles.a, &roles.b, &roles.e, &cfg)?;
            (bracket_line(&br), json!({ "bracket": value_json(&br) }))
        }
    };
    Ok(match opt.format {
        Format::Table => format!("{header}: {line}\n"),
        Format::Structured => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "skar",
                "scheme": scheme_name,
                "oracle": oracle,
                "distribution": distribution_json(d),
                "roles": roles_json(d, &roles),
                "optimizer": value_json(&cfg),
                "summary": format!("{header}: {line}"),
            });
            merge(&mut v, result);
            to_json(v)
        }
    })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn bracket(d: &JointDistribution, r: &SkarRoles, opt: &OptArgs) -> CliResult<String> {
    let roles = skar_roles(d, r)?;
    let cfg = opt.config();
    cfg.validate()?;
    let br = two_way_bracket(d, &roles.a, &roles.b, &roles.e, &cfg)?;
    let header = format!(
        "S({} ↔ {} || {})",
        label(d, &roles.a),
        label(d, &roles.b),
        label(d, &roles.e)
    );
    Ok(match opt.format {
        Format::Table => format!(
            "{header}: {}\nlower: {}\nupper: {}\nwidth: {}\ngap tolerance: {}\neavesdropper channel outputs: {}\n",
            bracket_line(&br),
            rate_line(&br.lower),
            rate_line(&br.upper),
            decimal(br.width()),
            br.gap_tolerance,
            br.eavesdropper_cardinality,
        ),
        Format::Structured => to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "bracket",
            "distribution": distribution_json(d),
            "roles": roles_json(d, &roles),
            "optimizer": value_json(&cfg),
            "summary": format!("{header}: {}", bracket_line(&br)),
            "width": br.width(),
            "bracket": value_json(&br),
        })),
    })
}

fn pid_roles(d: &JointDistribution, target: Option<&str>) -> CliResult<PidRoles> {
    Ok(match target {
        Some(t) => PidRoles::with_target(d, d.index_of(t)?)?,
        None => PidRoles::default_for(d)?,
    })
}

fn flag(b: Option<pid_skar::Bound>) -> String {
    b.map_or_else(|| "mixed".into(), |b| b.to_string())
}

fn decomposition_table(
    d: &JointDistribution,
    roles: &PidRoles,
    p: &PartialDecomposition,
) -> String {
    let f = &p.component_bound_flags;
    let (s0, s1) = (label(d, &roles.source_0), label(d, &roles.source_1));
    let rows = [
        ("redundancy".to_string(), p.redundancy, flag(f.redundancy)),
        (format!("unique {s0}"), p.unique_0, flag(f.unique_0)),
        (format!("unique {s1}"), p.unique_1, flag(f.unique_1)),
        ("synergy".to_string(), p.synergy, flag(f.synergy)),
    ];
    let mut out = format!("measure: {}\n", p.measure_label);
    for (name, v, b) in rows {
        out.push_str(&format!("{name:<16}{:<22}{b}\n", bits(v)));
    }
    out.push_str(&format!(
        "{:<16}{}\n",
        "consistency gap",
        bits(p.consistency_gap)
    ));
    if p.mixed_confidence() {
        out.push_str("note: the two uniques carry different bound directions\n");
    }
    out
}

fn decomposition_json(p: &PartialDecomposition) -> Value {
    let r = p.identity_residuals();
    let mut v = value_json(p);
    merge(
        &mut v,
        json!({
            "mixed_confidence": p.mixed_confidence(),
            "identity_residuals": { "source_0": r.source_0, "source_1": r.source_1, "total": r.total },
        }),
    );
    v
}

fn pid(
    d: &JointDistribution,
    measure: PidMeasure,
    target: Option<&str>,
    opt: &OptArgs,
) -> CliResult<String> {
    let roles = pid_roles(d, target)?;
    let cfg = opt.config();
    cfg.validate()?;
    let head = |name: &str| {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "pid",
            "measure": name,
            "distribution": distribution_json(d),
            "roles": {
                "source_0": names(d, &roles.source_0),
                "source_1": names(d, &roles.source_1),
                "target": names(d, &roles.target),
            },
            "optimizer": value_json(&cfg),
        })
    };
    match measure {
        PidMeasure::One(label_) => {
            let p = match label_ {
                MeasureLabel::CamelOneway => camel_pid(d, &roles, &cfg)?,
                MeasureLabel::ElephantOneway => elephant_pid(d, &roles, &cfg)?,
                MeasureLabel::NoCommunication => nocomm_pid(d, &roles)?,
                MeasureLabel::Broja => broja_pid(d, &roles, &cfg)?,
                MeasureLabel::TwoWayLower | MeasureLabel::TwoWayUpper => {
                    unreachable!("parsed as two-way")
                }
            };
            Ok(match opt.format {
                Format::Table => decomposition_table(d, &roles, &p),
                Format::Structured => {
                    let mut v = head(label_.as_str());
                    merge(&mut v, json!({ "decomposition": decomposition_json(&p) }));
                    to_json(v)
                }
            })
        }
        PidMeasure::TwoWay => {
            let two = twoway_pid(d, &roles, &cfg)?;
            Ok(match opt.format {
                Format::Table => {
                    let [b0, b1] = &two.brackets;
                    format!(
                        "brackets: {} {}, {} {}\n{}{}",
                        label(d, &roles.source_0),
                        bracket_line(b0),
                        label(d, &roles.source_1),
                        bracket_line(b1),
                        decomposition_table(d, &roles, &two.lower),
                        decomposition_table(d, &roles, &two.upper),
                    )
                }
                Format::Structured => {
                    let mut v = head("two-way");
                    merge(
                        &mut v,
                        json!({
                            "converged": two.converged(),
                            "brackets": value_json(&two.brackets),
                            "lower": decomposition_json(&two.lower),
                            "upper": decomposition_json(&two.upper),
                        }),
                    );
                    to_json(v)
                }
            })
        }
    }
}

fn search_cmd(
    measure: SearchMeasure,
    samples: usize,
    mut sizes: Vec<(usize, usize, usize)>,
    concentration: f64,
    gap_threshold: f64,
    opt: &OptArgs,
) -> CliResult<String> {
    if sizes.is_empty() {
        sizes = vec![(2, 2, 2), (3, 3, 3)];
    }
    let mut reports: Vec<SearchReport> = Vec::new();
    for s in sizes {
        let cfg = SearchConfig {
            num_samples: samples,
            alphabet_sizes: s,
            dirichlet_concentration: concentration,
            seed: opt.seed,
            gap_threshold,
            optimizer: opt.config(),
        };
        reports.push(match measure {
            SearchMeasure::Consistency(m) => search::scan_consistency(m, &cfg)?,
            SearchMeasure::Brackets => search::scan_bracket_convergence(&cfg)?,
        });
    }
    let violations: usize = reports.iter().map(|r| r.summary.violations).sum();
    let records: usize = reports.iter().map(|r| r.summary.records).sum();
    let summary = format!("violations: {violations} of {records} records");
    Ok(match opt.format {
        Format::Table => {
            let mut out: String = reports.iter().map(|r| r.to_tsv()).collect();
            out.push_str(&summary);
            out.push('\n');
            out
        }
        Format::Structured => to_json(json!({
            "schema_version": SCHEMA_VERSION,
            "command": "search",
            "reports": value_json(&reports),
            "violations": violations,
            "records": records,
            "summary": summary,
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_and_fractions() {
        assert_eq!(decimal(0.5), "0.5");
        assert_eq!(decimal(-1e-17), "0");
        assert_eq!(decimal(1.0), "1");
        assert_eq!(fraction(0.5).as_deref(), Some("1/2"));
        assert_eq!(fraction(1.0 / 3.0 + 5e-10).as_deref(), Some("1/3"));
        assert_eq!(fraction(0.1234567), None);
        assert_eq!(fraction(2.0), None);
        assert_eq!(fraction(5.0 / 64.0).as_deref(), Some("5/64"));
    }

    #[test]
    fn sizes_parse() {
        assert_eq!(parse_sizes("2x3x4"), Ok((2, 3, 4)));
        assert!(parse_sizes("2x2").is_err());
        assert!(parse_sizes("0x2x2").is_err());
    }
}
