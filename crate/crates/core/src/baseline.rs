//! The independent model: every variable by its own marginal.

use crate::dataset::{Dataset, Instance};
use crate::model::{PairwiseTable, PredictiveDistribution};
use crate::schema::{DatasetSchema, VariableKind};
use crate::value::{pair_count, ranks_to_pairs, Value};

/// Per-variable maximum-likelihood marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub schema: DatasetSchema,
    pub marginals: Vec<PredictiveDistribution>,
}

fn normalize(counts: Vec<f64>) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let m = counts.len() as f64;
    if total == 0.0 {
        return vec![1.0 / m; counts.len()];
    }
    counts.into_iter().map(|c| c / total).collect()
}

/// Fits one marginal per variable from its observed entries; a variable
/// that is never observed gets the uniform (or standard normal) model.
pub fn fit_baseline(data: &Dataset) -> BaselineModel {
    let schema = data.schema.clone();
    let marginals = schema
        .variables()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let m = spec.size();
            let cells = data.instances.iter().map(|inst| &inst.values[i]).filter(|v| !v.is_missing());
            let n = cells.clone().count() as f64;
            match spec.kind {
                VariableKind::Binary => {
                    let ones = cells.filter(|v| **v == Value::Binary(true)).count() as f64;
                    PredictiveDistribution::Bernoulli(if n > 0.0 { ones / n } else { 0.5 })
                }
                VariableKind::Continuous => {
                    let sum: f64 = cells.map(|v| if let Value::Continuous(x) = v { *x } else { 0.0 }).sum();
                    PredictiveDistribution::Gaussian { mean: if n > 0.0 { sum / n } else { 0.0 }, sd: 1.0 }
                }
                VariableKind::Categorical | VariableKind::Ordinal => {
                    let mut c = vec![0.0; m];
                    for v in cells {
                        if let Value::Categorical(j) | Value::Ordinal(j) = v {
                            c[*j] += 1.0;
                        }
                    }
                    let p = normalize(c);
                    if spec.kind == VariableKind::Categorical {
                        PredictiveDistribution::Categorical(p)
                    } else {
                        PredictiveDistribution::Ordinal(p)
                    }
                }
                VariableKind::Multicategorical => {
                    let mut c = vec![0.0; m];
                    for v in cells {
                        if let Value::Multicat(a) = v {
                            for (x, on) in c.iter_mut().zip(a) {
                                *x += *on as u8 as f64;
                            }
                        }
                    }
                    PredictiveDistribution::Indicators(c.into_iter().map(|x| if n > 0.0 { x / n } else { 0.5 }).collect())
                }
                VariableKind::CategoryRanked => {
                    let mut c = vec![[0.0; 3]; pair_count(m)];
                    for v in cells {
                        if let Value::Ranked(r) = v {
                            for (slot, o) in c.iter_mut().zip(ranks_to_pairs(r)) {
                                slot[crate::model::outcome_slot(o)] += 1.0;
                            }
                        }
                    }
                    let probs = c
                        .into_iter()
                        .map(|s| {
                            let p = normalize(s.to_vec());
                            [p[0], p[1], p[2]]
                        })
                        .collect();
                    PredictiveDistribution::Pairwise(PairwiseTable { size: m, probs })
                }
            }
        })
        .collect();
    BaselineModel { schema, marginals }
}

impl BaselineModel {
    /// Mode (mean for Gaussians, score ranking for ranked variables,
    /// indicators at or above `threshold` for multicategorical ones).
    pub fn predict(&self, i: usize, threshold: f64) -> Value {
        self.marginals[i].decode(threshold)
    }

    /// Fills the listed positions of `inst` with the marginal predictions.
    pub fn complete(&self, inst: &Instance, targets: &[usize], threshold: f64) -> Instance {
        let mut out = inst.clone();
        for &i in targets {
            out.values[i] = self.predict(i, threshold);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate;
    use crate::schema::parse_schema;

    fn column(schema: &str, values: Vec<Value>) -> Dataset {
        let s = parse_schema(schema).unwrap();
        Dataset::new(s, values.into_iter().map(|v| Instance::new(vec![v])).collect()).unwrap()
    }

    fn in_sample(data: &Dataset) -> crate::metrics::EvalReport {
        let b = fit_baseline(data);
        let preds: Vec<Instance> = data.instances.iter().map(|x| b.complete(x, &[0], 0.5)).collect();
        evaluate(&data.schema, &data.instances, &preds).unwrap()
    }

    #[test]
    fn binary_majority() {
        let data = column("a binary", (0..100).map(|j| Value::Binary(j % 10 != 0)).collect());
        assert_eq!(fit_baseline(&data).predict(0, 0.5), Value::Binary(true));
        assert!((in_sample(&data).error(VariableKind::Binary).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn standardized_gaussian_has_unit_error() {
        let s = parse_schema("c continuous").unwrap();
        let rows = [3.0, 7.5, -2.0, 11.0, 4.2, 0.3].iter().map(|x| Instance::new(vec![Value::Continuous(*x)])).collect();
        let data = Dataset::from_raw(s, rows).unwrap();
        let Value::Continuous(mu) = fit_baseline(&data).predict(0, 0.5) else { panic!() };
        assert!(mu.abs() < 1e-12);
        assert!((in_sample(&data).error(VariableKind::Continuous).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn uniform_categorical() {
        use rand::Rng;
        let mut rng = crate::rng::RngKey::new(3).rng();
        let data = column("c categorical a,b,c,d", (0..10_000).map(|_| Value::Categorical(rng.random_range(0..4))).collect());
        let e = in_sample(&data).error(VariableKind::Categorical).unwrap();
        assert!((e - 0.75).abs() < 0.02, "{e}");
    }

    #[test]
    fn unobserved_variable_is_uniform() {
        let data = column("r rank a,b,c", vec![Value::Missing; 3]);
        let b = fit_baseline(&data);
        assert_eq!(b.predict(0, 0.5), Value::Ranked(vec![1, 1, 1]));
    }

    #[test]
    fn pairwise_majority_is_aggregated() {
        let data = column("r rank a,b,c", vec![Value::Ranked(vec![1, 2, 3]), Value::Ranked(vec![1, 3, 2]), Value::Ranked(vec![2, 1, 3])]);
        assert_eq!(fit_baseline(&data).predict(0, 0.5), Value::Ranked(vec![1, 2, 3]));
    }
}
