//! Per-type prediction error rates.
//!
//! Every observed (instance, variable) cell of the truth counts once
//! towards its type.

use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, VariableKind};
use crate::value::Value;

/// Error rate per variable type, indexed by [`VariableKind::index`].
/// Rates are `None` when no cell of that type was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub errors: [Option<f64>; 6],
    pub counts: [usize; 6],
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

impl EvalReport {
    pub fn error(&self, kind: VariableKind) -> Option<f64> {
        self.errors[kind.index()]
    }

    pub fn count(&self, kind: VariableKind) -> usize {
        self.counts[kind.index()]
    }
}

/// Fraction of category pairs ordered in strictly opposite directions.
/// Pairs tied on either side count as agreeing.
pub fn rank_disagreement(truth: &[u32], pred: &[u32]) -> f64 {
    let m = truth.len();
    if m < 2 {
        return 0.0;
    }
    let mut bad = 0usize;
    for l in 0..m {
        for r in l + 1..m {
            let a = truth[l] as i64 - truth[r] as i64;
            let b = pred[l] as i64 - pred[r] as i64;
            if a * b < 0 {
                bad += 1;
            }
        }
    }
    bad as f64 / (m * (m - 1) / 2) as f64
}

/// Scores `predictions` against every observed cell of `truth`.
pub fn evaluate(schema: &DatasetSchema, truth: &[Instance], predictions: &[Instance]) -> Result<EvalReport> {
    if truth.len() != predictions.len() {
        return Err(Error::Dimension(format!("{} truth rows but {} prediction rows", truth.len(), predictions.len())));
    }
    let mut sums = [0.0f64; 6];
    let mut counts = [0usize; 6];
    let (mut hit, mut actual, mut predicted) = (0.0f64, 0.0f64, 0.0f64);
    for (row, (t, p)) in truth.iter().zip(predictions).enumerate() {
        if t.len() != schema.len() || p.len() != schema.len() {
            return Err(Error::Arity { row, expected: schema.len(), found: t.len().min(p.len()) });
        }
        for i in t.observed() {
            let spec = schema.variable(i);
            let slot = spec.kind.index();
            let e = match (&t.values[i], &p.values[i]) {
                (Value::Binary(a), Value::Binary(b)) => (a != b) as u8 as f64,
                (Value::Categorical(a), Value::Categorical(b)) => (a != b) as u8 as f64,
                (Value::Ordinal(a), Value::Ordinal(b)) => (*a as f64 - *b as f64).abs() / (spec.size() as f64 - 1.0),
                (Value::Continuous(a), Value::Continuous(b)) => (a - b) * (a - b),
                (Value::Ranked(a), Value::Ranked(b)) => rank_disagreement(a, b),
                (Value::Multicat(a), Value::Multicat(b)) => {
                    let w = 1.0 / spec.size() as f64;
                    for (x, y) in a.iter().zip(b) {
                        hit += w * (*x && *y) as u8 as f64;
                        actual += w * *x as u8 as f64;
                        predicted += w * *y as u8 as f64;
                    }
                    0.0
                }
                (_, got) => {
                    return Err(Error::Cell {
                        row,
                        column: spec.name.clone(),
                        message: format!("prediction {got:?} does not match the {} truth", spec.kind),
                    })
                }
            };
            sums[slot] += e;
            counts[slot] += 1;
        }
    }
    let mut errors = [None; 6];
    for kind in VariableKind::ALL {
        let s = kind.index();
        if counts[s] == 0 {
            continue;
        }
        errors[s] = Some(match kind {
            VariableKind::Continuous => (sums[s] / counts[s] as f64).sqrt(),
            VariableKind::Multicategorical => 0.0,
            _ => sums[s] / counts[s] as f64,
        });
    }
    let mc = VariableKind::Multicategorical.index();
    let (mut recall, mut precision) = (None, None);
    if counts[mc] > 0 {
        let r = if actual > 0.0 { hit / actual } else { 0.0 };
        let p = if predicted > 0.0 { hit / predicted } else { 0.0 };
        // No activations on either side is vacuously perfect; activations
        // without any overlap score a full error.
        errors[mc] = Some(if actual == 0.0 && predicted == 0.0 {
            0.0
        } else if r + p == 0.0 {
            1.0
        } else {
            1.0 - 2.0 * r * p / (r + p)
        });
        recall = Some(r);
        precision = Some(p);
    }
    Ok(EvalReport { errors, counts, recall, precision })
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// One row per metric, one column per named report; absent rates are
/// written as `NA`.
pub fn report_table(columns: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("metric");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",n\n");
    let n = |s: usize| columns.first().map_or(0, |(_, r)| r.counts[s]);
    for kind in VariableKind::ALL {
        out.push_str(kind.keyword());
        for (_, r) in columns {
            out.push(',');
            out.push_str(&cell(r.error(kind)));
        }
        out.push_str(&format!(",{}\n", n(kind.index())));
    }
    let mc = n(VariableKind::Multicategorical.index());
    let rows: [(&str, fn(&EvalReport) -> Option<f64>); 2] = [("recall", |r| r.recall), ("precision", |r| r.precision)];
    for (label, get) in rows {
        out.push_str(label);
        for (_, r) in columns {
            out.push(',');
            out.push_str(&cell(get(r)));
        }
        out.push_str(&format!(",{mc}\n"));
    }
    out
}
