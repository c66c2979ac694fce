//! Typed variable declarations.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{enumerate_rankings, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariableKind {
    Binary,
    Categorical,
    Multicategorical,
    Continuous,
    Ordinal,
    CategoryRanked,
}

impl VariableKind {
    pub const ALL: [VariableKind; 6] = [
        VariableKind::Binary,
        VariableKind::Categorical,
        VariableKind::Multicategorical,
        VariableKind::Continuous,
        VariableKind::Ordinal,
        VariableKind::CategoryRanked,
    ];

    /// Schema-file keyword.
    pub fn keyword(self) -> &'static str {
        match self {
            VariableKind::Binary => "binary",
            VariableKind::Categorical => "categorical",
            VariableKind::Multicategorical => "multicat",
            VariableKind::Continuous => "continuous",
            VariableKind::Ordinal => "ordinal",
            VariableKind::CategoryRanked => "rank",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        VariableKind::ALL.into_iter().find(|k| k.keyword() == word)
    }

    pub fn has_categories(self) -> bool {
        !matches!(self, VariableKind::Binary | VariableKind::Continuous)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    /// Ordered category labels; for ordinal variables the order is the scale.
    pub categories: Vec<String>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, kind: VariableKind, categories: &[&str]) -> Result<Self> {
        let spec = VariableSpec { name: name.into(), kind, categories: categories.iter().map(|c| c.to_string()).collect() };
        spec.validate().map_err(|message| Error::Schema { line: 0, message })?;
        Ok(spec)
    }

    pub fn binary(name: &str) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Binary, categories: Vec::new() }
    }

    pub fn continuous(name: &str) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous, categories: Vec::new() }
    }

    /// A category-bearing variable with labels `c1..cM`.
    pub fn with_size(name: &str, kind: VariableKind, m: usize) -> Self {
        VariableSpec { name: name.into(), kind, categories: (1..=m).map(|j| format!("c{j}")).collect() }
    }

    /// Category count `M` (zero for binary and continuous variables).
    pub fn size(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Checks that `value` has this variable's kind and a well-formed payload.
    /// `Missing` is always accepted.
    pub fn check(&self, value: &Value) -> std::result::Result<(), String> {
        let m = self.size();
        match (self.kind, value) {
            (_, Value::Missing) | (VariableKind::Binary, Value::Binary(_)) => Ok(()),
            (VariableKind::Continuous, Value::Continuous(x)) => {
                if x.is_finite() {
                    Ok(())
                } else {
                    Err("non-finite continuous value".into())
                }
            }
            (VariableKind::Categorical, Value::Categorical(c)) | (VariableKind::Ordinal, Value::Ordinal(c)) => {
                if *c < m {
                    Ok(())
                } else {
                    Err(format!("category index {c} out of range for M={m}"))
                }
            }
            (VariableKind::Multicategorical, Value::Multicat(a)) => {
                if a.len() != m {
                    Err(format!("{} indicators for M={m}", a.len()))
                } else if !a.iter().any(|&x| x) {
                    Err("multicategorical value with no active category".into())
                } else {
                    Ok(())
                }
            }
            (VariableKind::CategoryRanked, Value::Ranked(r)) => {
                if r.len() != m {
                    Err(format!("{} ranks for M={m}", r.len()))
                } else if !crate::value::is_dense_ranking(r) {
                    Err(format!("ranks {r:?} are not dense"))
                } else {
                    Ok(())
                }
            }
            _ => Err(format!("value {value:?} does not match kind {}", self.kind)),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !is_identifier(&self.name) {
            return Err(format!("invalid variable name `{}`", self.name));
        }
        if self.kind.has_categories() {
            if self.categories.len() < 2 {
                return Err(format!("`{}`: {} variables need at least 2 categories", self.name, self.kind));
            }
        } else if !self.categories.is_empty() {
            return Err(format!("`{}`: {} variables take no categories", self.name, self.kind));
        }
        let mut seen = HashSet::new();
        for c in &self.categories {
            if c.is_empty() || c.contains([',', '|', '>', '=']) || c.contains(char::is_whitespace) {
                return Err(format!("`{}`: invalid category label `{c}`", self.name));
            }
            if !seen.insert(c.as_str()) {
                return Err(format!("`{}`: duplicate category `{c}`", self.name));
            }
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || c == ',')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    variables: Vec<VariableSpec>,
}

impl DatasetSchema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema { line: 0, message: "schema declares no variables".into() });
        }
        let mut names = HashSet::new();
        for (i, v) in variables.iter().enumerate() {
            v.validate().map_err(|message| Error::Schema { line: i + 1, message })?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::Schema { line: i + 1, message: format!("duplicate variable name `{}`", v.name) });
            }
        }
        Ok(DatasetSchema { variables })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableSpec {
        &self.variables[i]
    }

    /// Number of variables `N`.
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.variables {
            out.push_str(&v.name);
            out.push(' ');
            out.push_str(v.kind.keyword());
            if !v.categories.is_empty() {
                out.push(' ');
                out.push_str(&v.categories.join(","));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the line-oriented schema format `<name> <kind>[ <c1>,<c2>,...]`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_schema(text: &str) -> Result<DatasetSchema> {
    let mut variables = Vec::new();
    let mut names = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Schema { line: lineno + 1, message };
        let mut fields = line.split_whitespace();
        let name = fields.next().unwrap_or_default();
        let kind_word = fields.next().ok_or_else(|| err(format!("`{name}`: missing kind")))?;
        let kind = VariableKind::from_keyword(kind_word).ok_or_else(|| err(format!("unknown kind `{kind_word}`")))?;
        let categories: Vec<String> = match fields.next() {
            Some(list) => list.split(',').map(str::to_string).collect(),
            None => Vec::new(),
        };
        if fields.next().is_some() {
            return Err(err("unexpected trailing fields".into()));
        }
        let spec = VariableSpec { name: name.to_string(), kind, categories };
        spec.validate().map_err(err)?;
        if !names.insert(spec.name.clone()) {
            return Err(err(format!("duplicate variable name `{name}`")));
        }
        variables.push(spec);
    }
    DatasetSchema::new(variables)
}

/// Grid used to make a continuous variable enumerable: `points` evenly
/// spaced values on `[lo, hi]`. Each point carries the Riemann weight
/// `(hi - lo) / (points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for ContinuousGrid {
    fn default() -> Self {
        ContinuousGrid { lo: -2.0, hi: 2.0, points: 5 }
    }
}

impl ContinuousGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = self.step();
        (0..self.points).map(|j| self.lo + step * j as f64).collect()
    }

    pub fn step(&self) -> f64 {
        if self.points <= 1 {
            1.0
        } else {
            (self.hi - self.lo) / (self.points - 1) as f64
        }
    }
}

/// Exhaustive list of a variable's observable values: all non-empty
/// subsets for multicategorical variables, all rankings with ties for
/// ranked variables, grid points for continuous variables.
pub fn enumerate_values(spec: &VariableSpec, grid: Option<&ContinuousGrid>) -> Result<Vec<Value>> {
    let m = spec.size();
    Ok(match spec.kind {
        VariableKind::Binary => vec![Value::Binary(false), Value::Binary(true)],
        VariableKind::Categorical => (0..m).map(Value::Categorical).collect(),
        VariableKind::Ordinal => (0..m).map(Value::Ordinal).collect(),
        VariableKind::Multicategorical => {
            if m >= 32 {
                return Err(Error::Unsupported(format!("2^{m} subsets is not enumerable")));
            }
            (1u64..(1 << m)).map(|mask| Value::Multicat((0..m).map(|j| mask >> j & 1 == 1).collect())).collect()
        }
        VariableKind::CategoryRanked => {
            if m > 8 {
                return Err(Error::Unsupported(format!("rankings over {m} categories")));
            }
            enumerate_rankings(m).into_iter().map(Value::Ranked).collect()
        }
        VariableKind::Continuous => {
            let grid = grid.ok_or_else(|| Error::Unsupported(format!("`{}`: continuous enumeration needs a grid", spec.name)))?;
            grid.values().into_iter().map(Value::Continuous).collect()
        }
    })
}
