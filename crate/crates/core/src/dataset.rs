//! Partially observed instances and delimited-text ingestion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, VariableKind, VariableSpec};
use crate::value::Value;

/// One respondent: a value per schema variable, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<Value>,
}

impl Instance {
    pub fn new(values: Vec<Value>) -> Self {
        Instance { values }
    }

    pub fn missing(n: usize) -> Self {
        Instance { values: vec![Value::Missing; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_observed(&self, i: usize) -> bool {
        !self.values[i].is_missing()
    }

    pub fn observed(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(move |&i| self.is_observed(i))
    }

    /// Copy with the listed positions set to `Missing`.
    pub fn masked(&self, positions: &[usize]) -> Instance {
        let mut out = self.clone();
        for &i in positions {
            out.values[i] = Value::Missing;
        }
        out
    }
}

/// Read access to the observed part of an instance.
///
/// Learning code goes through this trait and only calls [`value`] for
/// positions where [`is_observed`] holds.
///
/// [`value`]: Observations::value
/// [`is_observed`]: Observations::is_observed
pub trait Observations {
    fn num_variables(&self) -> usize;
    fn is_observed(&self, i: usize) -> bool;
    fn value(&self, i: usize) -> &Value;
}

impl Observations for Instance {
    fn num_variables(&self) -> usize {
        self.values.len()
    }

    fn is_observed(&self, i: usize) -> bool {
        !self.values[i].is_missing()
    }

    fn value(&self, i: usize) -> &Value {
        &self.values[i]
    }
}

/// Mean and standard deviation, in raw units, of a continuous column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, sd: 1.0 };

    /// Population statistics of `xs`. A column with fewer than two distinct
    /// values keeps unit scale.
    pub fn fit(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Standardization::IDENTITY;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Standardization { mean, sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 } }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.sd
    }

    pub fn invert(&self, z: f64) -> f64 {
        self.mean + self.sd * z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub instances: Vec<Instance>,
    /// One entry per variable; `Some` exactly for continuous variables.
    pub standardization: Vec<Option<Standardization>>,
}

impl Dataset {
    /// Builds a dataset from values already in model units; continuous
    /// columns get the identity standardization record.
    pub fn new(schema: DatasetSchema, instances: Vec<Instance>) -> Result<Self> {
        for (row, inst) in instances.iter().enumerate() {
            check_instance(&schema, inst, row)?;
        }
        let standardization =
            schema.variables().iter().map(|v| (v.kind == VariableKind::Continuous).then_some(Standardization::IDENTITY)).collect();
        Ok(Dataset { schema, instances, standardization })
    }

    /// Builds a dataset from raw continuous values, standardizing every
    /// continuous column over its observed entries.
    pub fn from_raw(schema: DatasetSchema, mut instances: Vec<Instance>) -> Result<Self> {
        for (row, inst) in instances.iter().enumerate() {
            check_instance(&schema, inst, row)?;
        }
        let mut standardization = vec![None; schema.len()];
        for (i, spec) in schema.variables().iter().enumerate() {
            if spec.kind != VariableKind::Continuous {
                continue;
            }
            let observed: Vec<f64> = instances
                .iter()
                .filter_map(|inst| match inst.values[i] {
                    Value::Continuous(x) => Some(x),
                    _ => None,
                })
                .collect();
            let record = Standardization::fit(&observed);
            for inst in &mut instances {
                if let Value::Continuous(x) = &mut inst.values[i] {
                    *x = record.apply(*x);
                }
            }
            standardization[i] = Some(record);
        }
        Ok(Dataset { schema, instances, standardization })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Same schema and standardization, different rows.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Dataset {
        Dataset { schema: self.schema.clone(), instances, standardization: self.standardization.clone() }
    }

    /// Copy with variable `i` set to `Missing` everywhere.
    pub fn without_variable(&self, i: usize) -> Dataset {
        self.with_instances(self.instances.iter().map(|inst| inst.masked(&[i])).collect())
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        self.with_instances(rows.iter().map(|&r| self.instances[r].clone()).collect())
    }

    /// Raw-unit value of a stored continuous entry.
    pub fn raw_continuous(&self, i: usize, z: f64) -> f64 {
        self.standardization[i].unwrap_or(Standardization::IDENTITY).invert(z)
    }

    /// Writes a header of variable names followed by one row per instance,
    /// using the cell grammar of [`parse_dataset`] and raw continuous units.
    pub fn to_delimited(&self, delimiter: u8) -> Result<String> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
        w.write_record(self.schema.variables().iter().map(|v| v.name.as_str()))?;
        for inst in &self.instances {
            let row: Vec<String> =
                inst.values.iter().enumerate().map(|(i, v)| format_cell(self.schema.variable(i), v, self.standardization[i])).collect();
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn check_instance(schema: &DatasetSchema, inst: &Instance, row: usize) -> Result<()> {
    if inst.len() != schema.len() {
        return Err(Error::Arity { row: row + 1, expected: schema.len(), found: inst.len() });
    }
    for (spec, v) in schema.variables().iter().zip(&inst.values) {
        spec.check(v).map_err(|message| Error::Cell { row: row + 1, column: spec.name.clone(), message })?;
    }
    Ok(())
}

/// Parses delimiter-separated rows with a header of variable names.
///
/// Cell grammar: empty for missing; `0`/`1` for binary; a category label
/// for categorical and ordinal; labels joined by `|` for multicategorical;
/// labels joined by `>` (preferred first) and `=` (tied) for rankings,
/// e.g. `sports>music=games>photography`; decimal literals in raw units for
/// continuous variables. Columns may appear in any order but must cover
/// the schema exactly.
pub fn parse_dataset(text: &str, schema: &DatasetSchema, delimiter: u8) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().delimiter(delimiter).has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() != schema.len() {
        return Err(Error::Header(format!("{} columns in header, schema has {} variables", header.len(), schema.len())));
    }
    let mut column_var = Vec::with_capacity(header.len());
    let mut seen = vec![false; schema.len()];
    for name in header.iter() {
        let i = schema.index_of(name.trim()).ok_or_else(|| Error::Header(format!("unknown column `{name}`")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Header(format!("duplicate column `{name}`")));
        }
        column_var.push(i);
    }

    let mut instances = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != schema.len() {
            return Err(Error::Arity { row, expected: schema.len(), found: record.len() });
        }
        let mut values = vec![Value::Missing; schema.len()];
        for (cell, &i) in record.iter().zip(&column_var) {
            let spec = schema.variable(i);
            values[i] = parse_cell(spec, cell.trim()).map_err(|message| Error::Cell { row, column: spec.name.clone(), message })?;
        }
        instances.push(Instance::new(values));
    }
    Dataset::from_raw(schema.clone(), instances)
}

/// Parses one cell; continuous values are returned in raw units.
pub fn parse_cell(spec: &VariableSpec, cell: &str) -> std::result::Result<Value, String> {
    if cell.is_empty() {
        return Ok(Value::Missing);
    }
    let label = |s: &str| spec.category_index(s.trim()).ok_or_else(|| format!("unknown category `{s}` for `{}`", spec.name));
    let m = spec.size();
    let value = match spec.kind {
        VariableKind::Binary => match cell {
            "0" => Value::Binary(false),
            "1" => Value::Binary(true),
            _ => return Err(format!("binary cell must be 0 or 1, got `{cell}`")),
        },
        VariableKind::Continuous => {
            Value::Continuous(cell.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| format!("`{cell}` is not a finite number"))?)
        }
        VariableKind::Categorical => Value::Categorical(label(cell)?),
        VariableKind::Ordinal => Value::Ordinal(label(cell)?),
        VariableKind::Multicategorical => {
            let mut active = vec![false; m];
            for part in cell.split('|') {
                let j = label(part)?;
                if std::mem::replace(&mut active[j], true) {
                    return Err(format!("category `{part}` listed twice"));
                }
            }
            Value::Multicat(active)
        }
        VariableKind::CategoryRanked => {
            let mut ranks = vec![0u32; m];
            for (g, group) in cell.split('>').enumerate() {
                for part in group.split('=') {
                    if part.trim().is_empty() {
                        return Err(format!("malformed rank expression `{cell}`"));
                    }
                    let j = label(part)?;
                    if ranks[j] != 0 {
                        return Err(format!("category `{part}` ranked twice"));
                    }
                    ranks[j] = g as u32 + 1;
                }
            }
            if let Some(j) = ranks.iter().position(|&r| r == 0) {
                return Err(format!("ranking omits category `{}`", spec.categories[j]));
            }
            Value::Ranked(ranks)
        }
    };
    spec.check(&value)?;
    Ok(value)
}

/// Formats one cell; continuous values are written in raw units.
pub fn format_cell(spec: &VariableSpec, value: &Value, record: Option<Standardization>) -> String {
    match value {
        Value::Missing => String::new(),
        Value::Binary(b) => if *b { "1" } else { "0" }.to_string(),
        Value::Continuous(z) => {
            format!("{}", record.unwrap_or(Standardization::IDENTITY).invert(*z))
        }
        Value::Categorical(c) | Value::Ordinal(c) => spec.categories[*c].clone(),
        Value::Multicat(a) => a.iter().zip(&spec.categories).filter(|(on, _)| **on).map(|(_, c)| c.as_str()).collect::<Vec<_>>().join("|"),
        Value::Ranked(ranks) => {
            let parts = ranks.iter().copied().max().unwrap_or(0);
            (1..=parts)
                .map(|r| ranks.iter().zip(&spec.categories).filter(|(&x, _)| x == r).map(|(_, c)| c.as_str()).collect::<Vec<_>>().join("="))
                .collect::<Vec<_>>()
                .join(">")
        }
    }
}
