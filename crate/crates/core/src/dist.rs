//! Dense joint distributions over small finite alphabets and the Shannon
//! quantities computed from them.
//!
//! All information quantities are reported in bits. Probabilities are stored
//! in a row-major tensor whose axes follow the variable order; the last
//! variable varies fastest.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::channel::Channel;
use crate::error::{Error, Result};

/// Probabilities at or below this value count as structural zeros when a
/// support is needed.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Allowed deviation of a pmf (or channel row) total from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Ordered subset of variable positions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct VariableSet(Vec<usize>);

impl VariableSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        for (i, a) in indices.iter().enumerate() {
            if indices[..i].contains(a) {
                return Err(Error::InvalidArgument(format!(
                    "variable index {a} repeated in set"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub fn single(index: usize) -> Self {
        Self(vec![index])
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_disjoint(&self, other: &VariableSet) -> bool {
        self.0.iter().all(|i| !other.0.contains(i))
    }

    /// Concatenation of two disjoint sets, `self` first.
    pub fn union(&self, other: &VariableSet) -> Result<VariableSet> {
        if !self.is_disjoint(other) {
            return Err(Error::InvalidArgument("variable sets overlap".to_string()));
        }
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Ok(Self(v))
    }
}

/// A marginal flattened onto composite axes: each axis is one variable set,
/// its size the product of the member alphabet sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Table {
    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dims[1] + j]
    }

    pub fn get3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }
}

/// Finite-alphabet joint probability mass function over named variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution {
    names: Vec<String>,
    alphabets: Vec<Vec<String>>,
    pmf: Vec<f64>,
}

impl JointDistribution {
    pub fn new(names: Vec<String>, alphabets: Vec<Vec<String>>, pmf: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidDistribution("no variables".into()));
        }
        if names.len() != alphabets.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} names but {} alphabets",
                names.len(),
                alphabets.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate variable name `{n}`"
                )));
            }
        }
        for (name, alphabet) in names.iter().zip(&alphabets) {
            if alphabet.is_empty() {
                return Err(Error::InvalidDistribution(format!(
                    "variable `{name}` has an empty alphabet"
                )));
            }
            for (i, s) in alphabet.iter().enumerate() {
                if alphabet[..i].contains(s) {
                    return Err(Error::InvalidDistribution(format!(
                        "symbol `{s}` repeated in alphabet of `{name}`"
                    )));
                }
            }
        }
        let cells: usize = alphabets.iter().map(Vec::len).product();
        if cells != pmf.len() {
            return Err(Error::InvalidDistribution(format!(
                "pmf has {} entries, alphabets imply {cells}",
                pmf.len()
            )));
        }
        if let Some(p) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} is not a finite nonnegative number"
            )));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            names,
            alphabets,
            pmf,
        })
    }

    /// Builds a distribution from listed events. Alphabets are ordered by
    /// first appearance; unlisted events have probability zero.
    pub fn from_events<N, S>(names: &[N], events: &[(Vec<S>, f64)]) -> Result<Self>
    where
        N: AsRef<str>,
        S: AsRef<str>,
    {
        let names: Vec<String> = names.iter().map(|n| n.as_ref().to_string()).collect();
        let mut alphabets: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        let mut indexed = Vec::with_capacity(events.len());
        for (symbols, p) in events {
            if symbols.len() != names.len() {
                return Err(Error::InvalidDistribution(format!(
                    "event has {} symbols, expected {}",
                    symbols.len(),
                    names.len()
                )));
            }
            let idx: Vec<usize> = symbols
                .iter()
                .zip(alphabets.iter_mut())
                .map(|(s, alphabet)| {
                    let s = s.as_ref();
                    match alphabet.iter().position(|a| a == s) {
                        Some(i) => i,
                        None => {
                            alphabet.push(s.to_string());
                            alphabet.len() - 1
                        }
                    }
                })
                .collect();
            indexed.push((idx, *p));
        }
        if alphabets.iter().any(Vec::is_empty) {
            return Err(Error::InvalidDistribution("no events".into()));
        }
        let shape: Vec<usize> = alphabets.iter().map(Vec::len).collect();
        let mut pmf = vec![0.0; shape.iter().product()];
        let mut seen = vec![false; pmf.len()];
        for (idx, p) in indexed {
            let flat = flat_index(&shape, &idx);
            if seen[flat] {
                let event: Vec<&str> = idx
                    .iter()
                    .zip(&alphabets)
                    .map(|(&i, a)| a[i].as_str())
                    .collect();
                return Err(Error::InvalidDistribution(format!(
                    "duplicate event ({})",
                    event.join(" ")
                )));
            }
            seen[flat] = true;
            pmf[flat] = p;
        }
        Self::new(names, alphabets, pmf)
    }

    /// Parses the line-oriented text format: `#` comments, a header of
    /// variable names, then one event per line with a trailing probability
    /// written as a decimal or as `p/q`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut events: Vec<(Vec<String>, f64)> = Vec::new();
        let mut event_lines = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some(names) = &names else {
                names = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != names.len() + 1 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!(
                        "expected {} symbols and a probability, found {} fields",
                        names.len(),
                        fields.len()
                    ),
                });
            }
            let p = parse_probability(fields[names.len()]).map_err(|message| Error::Parse {
                line: lineno + 1,
                message,
            })?;
            events.push((
                fields[..names.len()]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                p,
            ));
            event_lines.push(lineno + 1);
        }
        let Some(names) = names else {
            return Err(Error::Parse {
                line: 0,
                message: "missing header line".into(),
            });
        };
        if events.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no events".into(),
            });
        }
        Self::from_events(&names, &events)
    }

    /// Same format as [`parse`](Self::parse) with `;` accepted as a line
    /// separator, for distributions passed on a command line.
    pub fn parse_inline(text: &str) -> Result<Self> {
        Self::parse(&text.replace(';', "\n"))
    }

    /// Writes every cell (zeros included, in tensor order) so that parsing
    /// the output reproduces alphabets, their order, and the pmf bit for bit.
    pub fn to_text(&self) -> String {
        let mut out = self.names.join(" ");
        out.push('\n');
        for (flat, p) in self.pmf.iter().enumerate() {
            let idx = self.unflatten(flat);
            for (v, i) in idx.iter().enumerate() {
                out.push_str(&self.alphabets[v][*i]);
                out.push(' ');
            }
            let _ = writeln!(out, "{p:?}");
        }
        out
    }

    /// Single-line form of [`to_text`](Self::to_text) using `;` separators.
    pub fn to_inline(&self) -> String {
        self.to_text().trim_end().replace('\n', "; ")
    }

    /// Short hex digest of the full-precision inline form.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_inline().as_bytes());
        hex::encode(&hash[..8])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn alphabets(&self) -> &[Vec<String>] {
        &self.alphabets
    }

    pub fn alphabet(&self, var: usize) -> &[String] {
        &self.alphabets[var]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn prob(&self, index: &[usize]) -> f64 {
        self.pmf[flat_index(&self.shape(), index)]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Variable set from names, in the order given.
    pub fn set(&self, names: &[&str]) -> Result<VariableSet> {
        VariableSet::new(
            names
                .iter()
                .map(|n| self.index_of(n))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn all_vars(&self) -> VariableSet {
        VariableSet((0..self.num_vars()).collect())
    }

    fn check(&self, set: &VariableSet) -> Result<()> {
        match set.indices().iter().find(|&&i| i >= self.num_vars()) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "variable index {i} out of range for {} variables",
                self.num_vars()
            ))),
            None => Ok(()),
        }
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.num_vars()];
        for v in (0..self.num_vars()).rev() {
            let n = self.alphabets[v].len();
            idx[v] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Size of the composite alphabet of a variable set.
    pub fn composite_size(&self, set: &VariableSet) -> usize {
        set.indices()
            .iter()
            .map(|&v| self.alphabets[v].len())
            .product()
    }

    /// Composite symbols of a set, row-major; member symbols joined by `,`.
    pub fn composite_alphabet(&self, set: &VariableSet) -> Vec<String> {
        let mut out = vec![String::new()];
        for &v in set.indices() {
            let mut next = Vec::with_capacity(out.len() * self.alphabets[v].len());
            for prefix in &out {
                for s in &self.alphabets[v] {
                    if prefix.is_empty() {
                        next.push(s.clone());
                    } else {
                        next.push(format!("{prefix},{s}"));
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Marginal over several sets, each flattened to one composite axis.
    /// An empty set yields a unit axis.
    pub fn table(&self, sets: &[&VariableSet]) -> Result<Table> {
        for (i, s) in sets.iter().enumerate() {
            self.check(s)?;
            if sets[..i].iter().any(|o| !o.is_disjoint(s)) {
                return Err(Error::InvalidArgument("variable sets overlap".into()));
            }
        }
        let dims: Vec<usize> = sets.iter().map(|s| self.composite_size(s)).collect();
        let mut data = vec![0.0; dims.iter().product()];
        let shape = self.shape();
        let mut idx = vec![0usize; shape.len()];
        for &p in &self.pmf {
            if p != 0.0 {
                let mut flat = 0;
                for (s, d) in sets.iter().zip(&dims) {
                    let mut c = 0;
                    for &v in s.indices() {
                        c = c * shape[v] + idx[v];
                    }
                    flat = flat * d + c;
                }
                data[flat] += p;
            }
            // odometer increment, last axis fastest
            for v in (0..shape.len()).rev() {
                idx[v] += 1;
                if idx[v] < shape[v] {
                    break;
                }
                idx[v] = 0;
            }
        }
        Ok(Table { dims, data })
    }

    pub fn marginal(&self, keep: &VariableSet) -> Result<JointDistribution> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("marginal of an empty set".into()));
        }
        let singles: Vec<VariableSet> = keep
            .indices()
            .iter()
            .map(|&v| VariableSet::single(v))
            .collect();
        let t = self.table(&singles.iter().collect::<Vec<_>>())?;
        Ok(JointDistribution {
            names: keep
                .indices()
                .iter()
                .map(|&v| self.names[v].clone())
                .collect(),
            alphabets: keep
                .indices()
                .iter()
                .map(|&v| self.alphabets[v].clone())
                .collect(),
            pmf: t.data,
        })
    }

    pub fn entropy(&self, vars: &VariableSet) -> Result<f64> {
        if vars.is_empty() {
            return Err(Error::InvalidArgument("entropy of an empty set".into()));
        }
        Ok(entropy_of(&self.table(&[vars])?.data))
    }

    /// Entropy that treats the empty set as a constant.
    fn entropy_or_zero(&self, vars: &VariableSet) -> Result<f64> {
        if vars.is_empty() {
            self.check(vars)?;
            Ok(0.0)
        } else {
            self.entropy(vars)
        }
    }

    /// H(vars | given); an empty `given` conditions on nothing.
    pub fn conditional_entropy(&self, vars: &VariableSet, given: &VariableSet) -> Result<f64> {
        let joint = vars.union(given)?;
        let h = self.entropy(&joint)? - self.entropy_or_zero(given)?;
        Ok(h.max(0.0))
    }

    pub fn mutual_information(&self, x: &VariableSet, y: &VariableSet) -> Result<f64> {
        self.conditional_mutual_information(x, y, &VariableSet::empty())
    }

    /// I(x : y | z) = H(xz) + H(yz) − H(xyz) − H(z).
    pub fn conditional_mutual_information(
        &self,
        x: &VariableSet,
        y: &VariableSet,
        z: &VariableSet,
    ) -> Result<f64> {
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidArgument(
                "mutual information needs nonempty sets".into(),
            ));
        }
        let xz = x.union(z)?;
        let yz = y.union(z)?;
        let xyz = x.union(&yz)?;
        let i = self.entropy(&xz)? + self.entropy(&yz)?
            - self.entropy(&xyz)?
            - self.entropy_or_zero(z)?;
        Ok(i.max(0.0))
    }

    /// Extends the joint with a new variable drawn from `channel` given the
    /// composite value of `source`. The new variable is appended last.
    pub fn attach_channel(
        &self,
        source: &VariableSet,
        channel: &Channel,
        new_name: &str,
    ) -> Result<JointDistribution> {
        self.check(source)?;
        if self.names.iter().any(|n| n == new_name) {
            return Err(Error::InvalidArgument(format!(
                "variable `{new_name}` already exists"
            )));
        }
        let inputs = self.composite_alphabet(source);
        if inputs.as_slice() != channel.input_alphabet() {
            return Err(Error::AlphabetMismatch(format!(
                "channel input alphabet {:?} does not match source alphabet {:?}",
                channel.input_alphabet(),
                inputs
            )));
        }
        let shape = self.shape();
        let out = channel.output_alphabet().len();
        let mut pmf = Vec::with_capacity(self.pmf.len() * out);
        for (flat, &p) in self.pmf.iter().enumerate() {
            let idx = self.unflatten(flat);
            let row = source
                .indices()
                .iter()
                .fold(0, |acc, &v| acc * shape[v] + idx[v]);
            pmf.extend(channel.row(row).iter().map(|q| p * q));
        }
        let mut names = self.names.clone();
        names.push(new_name.to_string());
        let mut alphabets = self.alphabets.clone();
        alphabets.push(channel.output_alphabet().to_vec());
        Ok(JointDistribution {
            names,
            alphabets,
            pmf,
        })
    }
}

fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Shannon entropy in bits of an unnormalized-free probability vector,
/// with 0·log 0 = 0.
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Parses `0.25`, `1/4`, or `1e-3`.
pub fn parse_probability(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{s}`"))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{s}`"))?;
            if den <= 0.0 {
                return Err(format!("nonpositive denominator in `{s}`"));
            }
            num / den
        }
        None => s.parse().map_err(|_| format!("bad probability `{s}`"))?,
    };
    if !value.is_finite() || value < 0.0 {
        return Err(format!("probability `{s}` out of range"));
    }
    Ok(value)
}
