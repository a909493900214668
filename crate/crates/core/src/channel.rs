use serde::Serialize;

use crate::dist::NORMALIZATION_TOLERANCE;
use crate::error::{Error, Result};

/// Conditional distribution from an input alphabet to an output alphabet,
/// stored as a row-stochastic matrix (one row per input symbol).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    input_alphabet: Vec<String>,
    output_alphabet: Vec<String>,
    matrix: Vec<f64>,
}

impl Channel {
    pub fn new(
        input_alphabet: Vec<String>,
        output_alphabet: Vec<String>,
        matrix: Vec<f64>,
    ) -> Result<Self> {
        let (n, m) = (input_alphabet.len(), output_alphabet.len());
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "channel alphabets must be nonempty".into(),
            ));
        }
        if matrix.len() != n * m {
            return Err(Error::InvalidArgument(format!(
                "channel matrix has {} entries, expected {n}x{m}",
                matrix.len()
            )));
        }
        for (row, r) in matrix.chunks(m).enumerate() {
            let sum: f64 = r.iter().sum();
            let bad_entry = r.iter().any(|x| !(0.0..=1.0).contains(x));
            if bad_entry || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(Self {
            input_alphabet,
            output_alphabet,
            matrix,
        })
    }

    pub fn identity(alphabet: Vec<String>) -> Self {
        let n = alphabet.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Self {
            input_alphabet: alphabet.clone(),
            output_alphabet: alphabet,
            matrix,
        }
    }

    /// Every input goes to the first output symbol.
    pub fn constant(input_alphabet: Vec<String>, output_alphabet: Vec<String>) -> Self {
        Self::deterministic(input_alphabet, output_alphabet, |_| 0)
    }

    /// Channel induced by a function on symbol indices.
    pub fn deterministic(
        input_alphabet: Vec<String>,
        output_alphabet: Vec<String>,
        map: impl Fn(usize) -> usize,
    ) -> Self {
        let m = output_alphabet.len();
        let mut matrix = vec![0.0; input_alphabet.len() * m];
        for i in 0..input_alphabet.len() {
            let j = map(i);
            assert!(j < m, "deterministic map leaves the output alphabet");
            matrix[i * m + j] = 1.0;
        }
        Self {
            input_alphabet,
            output_alphabet,
            matrix,
        }
    }

    pub fn input_alphabet(&self) -> &[String] {
        &self.input_alphabet
    }

    pub fn output_alphabet(&self) -> &[String] {
        &self.output_alphabet
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.output_alphabet.len();
        &self.matrix[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> usize {
        self.input_alphabet.len()
    }

    pub fn cols(&self) -> usize {
        self.output_alphabet.len()
    }
}

/// Symbols `prefix0, prefix1, ...` for auxiliary alphabets.
pub fn numbered_alphabet(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_stochastic_rows() {
        let a = numbered_alphabet("a", 2);
        let err = Channel::new(a.clone(), a.clone(), vec![0.5, 0.5, 0.7, 0.2]).unwrap_err();
        assert_eq!(
            err,
            Error::NotStochastic {
                row: 1,
                sum: 0.8999999999999999
            }
        );
        assert!(Channel::new(a.clone(), a.clone(), vec![1.5, -0.5, 0.0, 1.0]).is_err());
        assert!(Channel::new(a.clone(), a, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn deterministic_rows() {
        let c = Channel::deterministic(numbered_alphabet("a", 3), numbered_alphabet("c", 2), |i| {
            usize::from(i != 0)
        });
        assert_eq!(c.row(0), [1.0, 0.0]);
        assert_eq!(c.row(2), [0.0, 1.0]);
    }
}
