//! Small named distributions used as sentinels and in tests.

use crate::dist::JointDistribution;

/// Four equiprobable events over (S0, S1, T): exactly one source is nonzero
/// and equals the target, the other reads `0`.
pub fn pointwise_unique() -> JointDistribution {
    JointDistribution::from_events(
        &["S0", "S1", "T"],
        &[
            (vec!["0", "1", "1"], 0.25),
            (vec!["1", "0", "1"], 0.25),
            (vec!["0", "2", "2"], 0.25),
            (vec!["2", "0", "2"], 0.25),
        ],
    )
    .expect("valid fixture")
}

fn bit_names(n: usize) -> Vec<String> {
    match n {
        3 => vec!["S0".into(), "S1".into(), "T".into()],
        _ => (0..n).map(|i| format!("X{i}")).collect(),
    }
}

/// `n` independent uniform bits. Three bits are named S0, S1, T.
pub fn independent_bits(n: usize) -> JointDistribution {
    let events: Vec<(Vec<String>, f64)> = (0..1usize << n)
        .map(|m| {
            let symbols = (0..n)
                .map(|i| ((m >> (n - 1 - i)) & 1).to_string())
                .collect();
            (symbols, 1.0 / (1usize << n) as f64)
        })
        .collect();
    JointDistribution::from_events(&bit_names(n), &events).expect("valid fixture")
}

/// `n` copies of one uniform bit. Three copies are named S0, S1, T.
pub fn copy_bits(n: usize) -> JointDistribution {
    let events = vec![(vec!["0"; n], 0.5), (vec!["1"; n], 0.5)];
    JointDistribution::from_events(&bit_names(n), &events).expect("valid fixture")
}

/// T = S0 with S1 an independent uniform bit.
pub fn copy_first_source() -> JointDistribution {
    JointDistribution::from_events(
        &["S0", "S1", "T"],
        &[
            (vec!["0", "0", "0"], 0.25),
            (vec!["0", "1", "0"], 0.25),
            (vec!["1", "0", "1"], 0.25),
            (vec!["1", "1", "1"], 0.25),
        ],
    )
    .expect("valid fixture")
}

/// T = S0 xor S1 with uniform independent inputs.
pub fn xor() -> JointDistribution {
    JointDistribution::from_events(
        &["S0", "S1", "T"],
        &[
            (vec!["0", "0", "0"], 0.25),
            (vec!["0", "1", "1"], 0.25),
            (vec!["1", "0", "1"], 0.25),
            (vec!["1", "1", "0"], 0.25),
        ],
    )
    .expect("valid fixture")
}

/// A = B uniform bit with a third variable E, either constant, an
/// independent bit, or a copy of A.
pub fn shared_bit(eve: Eve) -> JointDistribution {
    let events: Vec<(Vec<&str>, f64)> = match eve {
        Eve::Constant => vec![(vec!["0", "0", "z"], 0.5), (vec!["1", "1", "z"], 0.5)],
        Eve::Independent => vec![
            (vec!["0", "0", "0"], 0.25),
            (vec!["0", "0", "1"], 0.25),
            (vec!["1", "1", "0"], 0.25),
            (vec!["1", "1", "1"], 0.25),
        ],
        Eve::Copy => vec![(vec!["0", "0", "0"], 0.5), (vec!["1", "1", "1"], 0.5)],
    };
    JointDistribution::from_events(&["A", "B", "E"], &events).expect("valid fixture")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eve {
    Constant,
    Independent,
    Copy,
}
