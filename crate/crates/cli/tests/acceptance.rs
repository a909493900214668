//! End-to-end checks on the reference example and on seeded random
//! corpora. Every test writes one `PASS` or `FAIL` line to stderr, outside
//! the test harness capture, before asserting.

use std::io::Write;
use std::process::Command;
use std::time::Instant;

use pid_skar::optimize::sub_seed;
use pid_skar::search::{
    sample_distribution, scan_bracket_convergence, scan_consistency, SearchConfig,
};
use pid_skar::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn roles(d: &JointDistribution) -> (VariableSet, VariableSet, VariableSet) {
    (
        d.set(&["S0"]).unwrap(),
        d.set(&["S1"]).unwrap(),
        d.set(&["T"]).unwrap(),
    )
}

#[test]
fn pointwise_unique_key_rates() {
    let start = Instant::now();
    let d = fixtures::pointwise_unique();
    let (s0, s1, t) = roles(&d);
    let cfg = OptimizerConfig::default();
    let mut failures = Vec::new();
    let mut check = |what: &str, got: f64, want: f64, tol: f64| {
        if (got - want).abs() > tol {
            failures.push(format!("{what} = {got}, expected {want}"));
        }
    };
    check(
        "S(S0:T||S1)",
        skar_no_communication(&d, &s0, &t, &s1).unwrap().value,
        0.0,
        0.0,
    );
    check(
        "S(S1:T||S0)",
        skar_no_communication(&d, &s1, &t, &s0).unwrap().value,
        0.0,
        0.0,
    );
    check(
        "S(T→S0||S1)",
        skar_one_way(&d, &t, &s0, &s1, &cfg).unwrap().value,
        0.0,
        1e-4,
    );
    check(
        "S(T→S1||S0)",
        skar_one_way(&d, &t, &s1, &s0, &cfg).unwrap().value,
        0.0,
        1e-4,
    );
    check(
        "S(S0→T||S1)",
        skar_one_way(&d, &s0, &t, &s1, &cfg).unwrap().value,
        0.5,
        1e-4,
    );
    check(
        "S(S1→T||S0)",
        skar_one_way(&d, &s1, &t, &s0, &cfg).unwrap().value,
        0.5,
        1e-4,
    );
    for (a, e, name) in [(&s0, &s1, "S(S0↔T||S1)"), (&s1, &s0, "S(S1↔T||S0)")] {
        let b = two_way_bracket(&d, a, &t, e, &cfg).unwrap();
        check(&format!("{name} lower"), b.lower.value, 0.5, 1e-4);
        check(&format!("{name} upper"), b.upper.value, 0.5, 1e-4);
        check(
            &format!("{name} converged"),
            f64::from(u8::from(b.converged)),
            1.0,
            0.0,
        );
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 120.0 {
        failures.push(format!("took {elapsed:?}"));
    }
    let detail = if failures.is_empty() {
        format!("eight rates reproduced in {:.1}s", elapsed.as_secs_f64())
    } else {
        failures.join("; ")
    };
    report("pointwise unique key rates", failures.is_empty(), &detail);
}

#[test]
fn pointwise_unique_decompositions() {
    let d = fixtures::pointwise_unique();
    let r = PidRoles::default_for(&d).unwrap();
    let cfg = OptimizerConfig::default();
    let camel = camel_pid(&d, &r, &cfg).unwrap();
    let elephant = elephant_pid(&d, &r, &cfg).unwrap();
    let close = |p: &PartialDecomposition, want: [f64; 4]| {
        p.components()
            .iter()
            .zip(want)
            .all(|(g, w)| (g - w).abs() <= 1e-4)
            && p.consistency_gap <= 1e-4
    };
    let pass = close(&camel, [0.0, 0.5, 0.5, 0.0]) && close(&elephant, [0.5, 0.0, 0.0, 0.5]);
    report(
        "pointwise unique decompositions",
        pass,
        &format!(
            "camel {:?} gap {:.2e}, elephant {:?} gap {:.2e}",
            camel.components(),
            camel.consistency_gap,
            elephant.components(),
            elephant.consistency_gap
        ),
    );
}

#[test]
fn broja_intermediate_distribution() {
    let d = fixtures::pointwise_unique();
    let (s0, s1, t) = roles(&d);
    let cfg = OptimizerConfig::default();
    let (u0, q) = broja_unique(&d, &s0, &s1, &t, &cfg).unwrap();
    let expected = [
        ("0", "0", "1"),
        ("0", "0", "2"),
        ("1", "1", "1"),
        ("2", "2", "2"),
    ];
    let mut worst: f64 = 0.0;
    let shape = q.shape();
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let cell = (
                    q.alphabet(0)[i].as_str(),
                    q.alphabet(1)[j].as_str(),
                    q.alphabet(2)[k].as_str(),
                );
                let want = if expected.contains(&cell) { 0.25 } else { 0.0 };
                worst = worst.max((q.prob(&[i, j, k]) - want).abs());
            }
        }
    }
    let r = PidRoles::default_for(&d).unwrap();
    let broja = broja_pid(&d, &r, &cfg).unwrap();
    let elephant = elephant_pid(&d, &r, &cfg).unwrap();
    let diff = broja
        .components()
        .iter()
        .zip(elephant.components())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pass = u0.value <= 1e-6 && worst <= 1e-5 && diff <= 1e-4;
    report(
        "broja intermediate distribution",
        pass,
        &format!(
            "unique {:.2e}, worst cell error {worst:.2e}, broja vs elephant {diff:.2e}",
            u0.value
        ),
    );
}

#[test]
fn one_way_optimizer_matches_oracle_and_rate_ordering() {
    let cfg = OptimizerConfig::default();
    let mut cases = 0;
    let mut failures = Vec::new();
    for i in 0..50u64 {
        let d = sample_distribution((2, 2, 2), 1.0, sub_seed(2024, i)).unwrap();
        for (a, b, e) in [
            (0, 2, 1),
            (2, 0, 1),
            (1, 2, 0),
            (2, 1, 0),
            (0, 1, 2),
            (1, 0, 2),
        ] {
            let (a, b, e) = (
                VariableSet::single(a),
                VariableSet::single(b),
                VariableSet::single(e),
            );
            cases += 1;
            let one = skar_one_way(&d, &a, &b, &e, &cfg).unwrap().value;
            let oracle = skar_one_way_deterministic_oracle(&d, &a, &b, &e)
                .unwrap()
                .value;
            let none = skar_no_communication(&d, &a, &b, &e).unwrap().value;
            let br = two_way_bracket(&d, &a, &b, &e, &cfg).unwrap();
            let cap = d
                .mutual_information(&a, &b)
                .unwrap()
                .min(d.conditional_mutual_information(&a, &b, &e).unwrap());
            let chain = [none, one, br.lower.value, br.upper.value, cap];
            let ordered = chain.windows(2).all(|w| w[0] <= w[1] + 1e-6);
            if one < oracle - 1e-6 || !ordered {
                failures.push(format!(
                    "sample {i} {a:?}->{b:?}||{e:?}: oracle {oracle}, chain {chain:?}"
                ));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} cases, optimizer ≥ oracle and ordering chain hold")
    } else {
        format!(
            "{} of {cases} cases fail: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    report(
        "one-way optimizer vs oracle and rate ordering",
        failures.is_empty(),
        &detail,
    );
}

#[test]
fn elephant_assembly_is_consistent() {
    let cfg = SearchConfig::new(200, (2, 2, 2), 0);
    let rep = scan_consistency(MeasureLabel::ElephantOneway, &cfg).unwrap();
    let bad: Vec<String> = rep
        .records
        .iter()
        .filter(|r| r.violation || r.error.is_some())
        .map(|r| {
            format!(
                "#{} {} gap {:.4e}{}",
                r.index,
                r.digest,
                r.consistency_gap.unwrap_or(f64::NAN),
                r.error
                    .as_deref()
                    .map(|e| format!(" ({e})"))
                    .unwrap_or_default()
            )
        })
        .collect();
    let pass = bad.is_empty() && rep.summary.max_gap <= 1e-3;
    let detail = format!(
        "{} records, max gap {:.4e}, confirmed violations {}{}",
        rep.summary.records,
        rep.summary.max_gap,
        rep.summary.violations,
        if bad.is_empty() {
            String::new()
        } else {
            format!(": {}", bad.join(", "))
        }
    );
    report("elephant assembly consistency", pass, &detail);
}

#[test]
fn converged_brackets_are_consistent() {
    let cfg = SearchConfig::new(1600, (2, 2, 2), 0);
    let rep = scan_bracket_convergence(&cfg).unwrap();
    let converged = rep.summary.converged.unwrap();
    let violations = rep.summary.violations_among_converged.unwrap();
    let pass = converged >= 100 && violations == 0 && rep.summary.errors == 0;
    report(
        "converged bracket consistency",
        pass,
        &format!(
            "{converged} of {} records converged in both directions, {violations} violations, max gap {:.2e}",
            rep.summary.records, rep.summary.max_gap
        ),
    );
}

fn binary_joint() -> impl Strategy<Value = JointDistribution> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 5 => 0.01f64..1.0], 8).prop_filter_map(
        "nonzero",
        |w| {
            let total: f64 = w.iter().sum();
            let bit = || vec!["0".to_string(), "1".to_string()];
            (total > 0.0).then(|| {
                JointDistribution::new(
                    vec!["S0".into(), "S1".into(), "T".into()],
                    vec![bit(), bit(), bit()],
                    w.iter().map(|v| v / total).collect(),
                )
                .unwrap()
            })
        },
    )
}

/// Residual failures of one decomposition; `consistent` demands all three.
fn identity_failures(p: &PartialDecomposition, consistent: bool) -> Option<String> {
    let r = p.identity_residuals();
    let ok = r.source_0.abs() <= 1e-6
        && r.total.abs() <= 1e-6
        && (r.source_1.abs() - p.consistency_gap).abs() <= 1e-12
        && (!consistent || r.source_1.abs() <= 1e-6);
    (!ok).then(|| format!("{} residuals {r:?}", p.measure_label))
}

#[test]
fn decomposition_identities() {
    let cfg = OptimizerConfig {
        restarts: 8,
        ..OptimizerConfig::default()
    };
    let mut failures = Vec::new();

    let d = fixtures::pointwise_unique();
    let r = PidRoles::default_for(&d).unwrap();
    let two = twoway_pid(&d, &r, &cfg).unwrap();
    for p in [
        camel_pid(&d, &r, &cfg).unwrap(),
        elephant_pid(&d, &r, &cfg).unwrap(),
        nocomm_pid(&d, &r).unwrap(),
        broja_pid(&d, &r, &cfg).unwrap(),
        two.lower,
        two.upper,
    ] {
        failures.extend(identity_failures(&p, true));
    }

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 40,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    );
    let checked = std::cell::Cell::new(0);
    let outcome = runner.run(&binary_joint(), |d| {
        let r = PidRoles::default_for(&d).unwrap();
        let two = twoway_pid(&d, &r, &cfg).unwrap();
        let all = [
            (camel_pid(&d, &r, &cfg).unwrap(), false),
            (elephant_pid(&d, &r, &cfg).unwrap(), false),
            (nocomm_pid(&d, &r).unwrap(), false),
            (broja_pid(&d, &r, &cfg).unwrap(), true),
            (two.lower, false),
            (two.upper, false),
        ];
        checked.set(checked.get() + all.len());
        for (p, consistent) in &all {
            if let Some(f) = identity_failures(p, *consistent) {
                return Err(TestCaseError::fail(format!("{f} on {}", d.to_inline())));
            }
        }
        Ok(())
    });
    if let Err(e) = outcome {
        failures.push(e.to_string());
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "6 reference decompositions and {} random ones satisfy the identities",
            checked.get()
        )
    } else {
        failures.join("; ")
    };
    report("decomposition identities", pass, &detail);
}

fn run_cli(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pid-skar"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn structured_output_is_deterministic() {
    let table1 = "S0 S1 T; 0 1 1 1/4; 1 0 1 1/4; 0 2 2 1/4; 2 0 2 1/4";
    let commands: Vec<Vec<&str>> = vec![
        vec!["info", "--inline", table1],
        vec![
            "skar",
            "--inline",
            table1,
            "--scheme",
            "one-way",
            "--communicator",
            "S0",
            "--target",
            "T",
            "--eavesdropper",
            "S1",
            "--format",
            "structured",
            "--seed",
            "5",
        ],
        vec![
            "bracket",
            "--inline",
            table1,
            "--communicator",
            "T",
            "--target",
            "S0",
            "--format",
            "structured",
        ],
        vec![
            "pid",
            "--inline",
            table1,
            "--measure",
            "two-way",
            "--format",
            "structured",
        ],
        vec![
            "pid",
            "--inline",
            table1,
            "--measure",
            "broja",
            "--format",
            "structured",
        ],
        vec![
            "search",
            "--measure",
            "camel",
            "--samples",
            "6",
            "--sizes",
            "2x2x2",
            "--restarts",
            "6",
            "--format",
            "structured",
            "--seed",
            "3",
        ],
        vec![
            "search",
            "--measure",
            "two-way",
            "--samples",
            "4",
            "--sizes",
            "2x2x3",
            "--restarts",
            "6",
            "--seed",
            "9",
        ],
        vec!["dump", "--inline", table1, "--format", "structured"],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let reference = run_cli(args, "1");
        for threads in ["1", "2", "4"] {
            if run_cli(args, threads) != reference {
                differing.push(format!("{} with {threads} threads", args[0]));
            }
        }
    }
    let pass = differing.is_empty();
    let detail = if pass {
        format!(
            "{} commands byte-identical across reruns and 1, 2, 4 worker threads",
            commands.len()
        )
    } else {
        differing.join(", ")
    };
    report("deterministic structured output", pass, &detail);
}
