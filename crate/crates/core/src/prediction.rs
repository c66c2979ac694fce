//! Conditional prediction, completion, feature extraction and mean-field
//! inference.
//!
//! For a target `i` and observed context `v_o`, summing out `h` gives
//!
//! ```text
//! log P(v_i | v_o) = G_i(v_i) + sum_k softplus(c_k + H_ik(v_i)) + const,
//! c_k = w_k + sum_{j in o} H_jk(v_j)
//! ```
//!
//! which is enumerated per *factor* of the target: one factor for binary,
//! categorical and ordinal targets, one binary factor per indicator for
//! multicategorical targets and one three-way factor per pair for ranked
//! targets. Gaussian targets go through the mean-field recursion instead.

use crate::dataset::{Instance, Observations};
use crate::error::{Error, Result};
use crate::model::{encode, logistic, pair_features, softmax, softplus, Encoding, PairwiseTable, PredictiveDistribution, UnitState};
use crate::params::ModelParams;
use crate::sampling::GradientAccumulator;
use crate::schema::VariableKind;
use crate::value::{pairs, ranks_to_pairs, PairOutcome, Value};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_ITER: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Context of a prediction: encodings of the observed entries other than
/// the target, and the resulting hidden pre-activations `c_k`.
pub(crate) struct Context {
    pub units: Vec<(usize, Encoding)>,
    pub input: Vec<f64>,
}

pub(crate) fn context<O: Observations + ?Sized>(params: &ModelParams, target: usize, observed: &O) -> Context {
    let units: Vec<(usize, Encoding)> = params.encode_observed(observed).into_iter().filter(|(j, _)| *j != target).collect();
    let input = params.hidden_input(units.iter().map(|(j, e)| (*j, e)));
    Context { units, input }
}

/// Outcomes of the factors a target decomposes into.
pub(crate) fn target_factors(params: &ModelParams, i: usize) -> Result<Vec<Vec<Encoding>>> {
    let spec = params.schema.variable(i);
    let m = spec.size();
    Ok(match spec.kind {
        VariableKind::Binary => vec![vec![encode(spec, &UnitState::Binary(false)), encode(spec, &UnitState::Binary(true))]],
        VariableKind::Categorical => vec![(0..m).map(|c| encode(spec, &UnitState::Categorical(c))).collect()],
        VariableKind::Ordinal => vec![(0..m).map(|c| encode(spec, &UnitState::Ordinal(c))).collect()],
        VariableKind::Multicategorical => {
            (0..m).map(|j| vec![Encoding::default(), Encoding { feats: vec![(j, 1.0)], ..Default::default() }]).collect()
        }
        VariableKind::CategoryRanked => {
            pairs(m).map(|(l, r)| PairOutcome::ALL.iter().map(|&o| pair_features(l, r, m, o)).collect()).collect()
        }
        VariableKind::Continuous => {
            return Err(Error::Unsupported(format!(
                "continuous target '{}' has no finite outcome space; use mean-field prediction",
                spec.name
            )))
        }
    })
}

/// Index of the observed outcome within each factor.
pub(crate) fn observed_outcomes(v: &Value) -> Vec<usize> {
    match v {
        Value::Binary(b) => vec![*b as usize],
        Value::Categorical(c) | Value::Ordinal(c) => vec![*c],
        Value::Multicat(a) => a.iter().map(|&x| x as usize).collect(),
        Value::Ranked(r) => {
            ranks_to_pairs(r).into_iter().map(|o| PairOutcome::ALL.iter().position(|x| *x == o).expect("outcome")).collect()
        }
        Value::Continuous(_) | Value::Missing => Vec::new(),
    }
}

/// Unnormalized log-probability of each outcome of one factor.
pub(crate) fn factor_scores(params: &ModelParams, i: usize, outcomes: &[Encoding], input: &[f64]) -> Vec<f64> {
    outcomes
        .iter()
        .map(|e| {
            let mut s = params.g_encoded(i, e);
            let mut pre = input.to_vec();
            params.add_hidden_input(i, e, 1.0, &mut pre);
            s += pre.into_iter().map(softplus).sum::<f64>();
            s
        })
        .collect()
}

/// `P(v_i | v_o)` over the observed entries `o` of `observed` other than
/// `i`. Any value the instance holds at `i` itself is ignored.
pub fn predictive_distribution<O: Observations + ?Sized>(params: &ModelParams, i: usize, observed: &O) -> Result<PredictiveDistribution> {
    check_target(params, i)?;
    let factors = target_factors(params, i)?;
    let ctx = context(params, i, observed);
    let probs: Vec<Vec<f64>> = factors.iter().map(|f| softmax(&factor_scores(params, i, f, &ctx.input))).collect();
    let spec = params.schema.variable(i);
    Ok(match spec.kind {
        VariableKind::Binary => PredictiveDistribution::Bernoulli(probs[0][1]),
        VariableKind::Categorical => PredictiveDistribution::Categorical(probs[0].clone()),
        VariableKind::Ordinal => PredictiveDistribution::Ordinal(probs[0].clone()),
        VariableKind::Multicategorical => PredictiveDistribution::Indicators(probs.iter().map(|p| p[1]).collect()),
        VariableKind::CategoryRanked => {
            PredictiveDistribution::Pairwise(PairwiseTable { size: spec.size(), probs: probs.iter().map(|p| [p[0], p[1], p[2]]).collect() })
        }
        VariableKind::Continuous => unreachable!("rejected by target_factors"),
    })
}

fn check_target(params: &ModelParams, i: usize) -> Result<()> {
    if i >= params.num_variables() {
        return Err(Error::Dimension(format!("target index {i} out of range")));
    }
    Ok(())
}

/// Point prediction of variable `i` from the other observed entries.
/// Gaussian targets use the one-shot mean-field mean.
pub fn predict<O: Observations + ?Sized>(params: &ModelParams, i: usize, observed: &O, threshold: f64) -> Result<Value> {
    check_target(params, i)?;
    if params.schema.variable(i).kind == VariableKind::Continuous {
        return Ok(mean_field_one_shot(params, i, observed)?.q_v.decode(threshold));
    }
    Ok(predictive_distribution(params, i, observed)?.decode(threshold))
}

/// Variables to fill in one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub instance: Instance,
    /// Targets; `None` means every missing position.
    pub targets: Option<Vec<usize>>,
}

impl CompletionRequest {
    pub fn missing(instance: Instance) -> Self {
        CompletionRequest { instance, targets: None }
    }

    pub fn resolved_targets(&self) -> Vec<usize> {
        match &self.targets {
            Some(t) => t.clone(),
            None => (0..self.instance.len()).filter(|&i| !self.instance.is_observed(i)).collect(),
        }
    }
}

/// Fills every target independently from the non-target entries.
pub fn complete(params: &ModelParams, request: &CompletionRequest, threshold: f64) -> Result<Instance> {
    let targets = request.resolved_targets();
    let context = request.instance.masked(&targets);
    let mut out = request.instance.clone();
    for &i in &targets {
        out.values[i] = predict(params, i, &context, threshold)?;
    }
    Ok(out)
}

/// Posterior features `P(h_k = 1 | v)` over the observed entries.
pub fn extract_features<O: Observations + ?Sized>(params: &ModelParams, observed: &O) -> Vec<f64> {
    params.hidden_posterior(observed)
}

/// Re-decodes every observed entry as the mode of `P(v_i | h)` at the
/// real-valued posterior `h`; missing entries stay missing.
pub fn reconstruct(params: &ModelParams, observed: &Instance) -> Result<Instance> {
    let h = extract_features(params, observed);
    let mut out = Instance::missing(observed.len());
    for i in observed.observed() {
        out.values[i] = params.conditional_data_distribution(i, &h)?.decode(DEFAULT_THRESHOLD);
    }
    Ok(out)
}

/// Fully factorized approximation `Q(v_i) prod_k Q(h_k)` of
/// `P(v_i, h | v_o)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub q_v: PredictiveDistribution,
    pub q_h: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Expected `H_ik` under `q` for every `k`.
fn expected_hidden_input(params: &ModelParams, i: usize, q: &PredictiveDistribution) -> Vec<f64> {
    let (f, _) = q.expected_features(params.schema.variable(i));
    let e = Encoding { feats: f.into_iter().enumerate().collect(), ..Default::default() };
    let mut acc = vec![0.0; params.num_hidden()];
    params.add_hidden_input(i, &e, 1.0, &mut acc);
    acc
}

/// One-shot mode: `Q(h) = P(h | v_o)`, `Q(v_i) = P(v_i | Q(h))`.
pub fn mean_field_one_shot<O: Observations + ?Sized>(params: &ModelParams, i: usize, observed: &O) -> Result<MeanFieldState> {
    check_target(params, i)?;
    let ctx = context(params, i, observed);
    let q_h: Vec<f64> = ctx.input.iter().copied().map(logistic).collect();
    let q_v = params.conditional_data_distribution(i, &q_h)?;
    Ok(MeanFieldState { q_v, q_h, iterations: 0, converged: true })
}

/// Alternates `Q(v_i) ∝ exp(G_i + sum_k H_ik Q(h_k))` and
/// `Q(h_k) = logistic(c_k + E_Q[H_ik])` from `Q(h) = P(h | v_o)` until the
/// largest change of `Q(h)` falls below `tol`. Each update lowers the
/// joint divergence `KL(Q || P(v_i, h | v_o))`.
pub fn mean_field_predict<O: Observations + ?Sized>(
    params: &ModelParams,
    i: usize,
    observed: &O,
    max_iter: usize,
    tol: f64,
) -> Result<MeanFieldState> {
    let start = mean_field_one_shot(params, i, observed)?;
    let input = context(params, i, observed).input;
    let mut q_h = start.q_h;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let q_v = params.conditional_data_distribution(i, &q_h)?;
        let hv = expected_hidden_input(params, i, &q_v);
        let next: Vec<f64> = input.iter().zip(&hv).map(|(c, x)| logistic(c + x)).collect();
        let change = next.iter().zip(&q_h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q_h = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let q_v = params.conditional_data_distribution(i, &q_h)?;
    Ok(MeanFieldState { q_v, q_h, iterations, converged })
}

/// `log P(v_i | v_o)` for the value held at `i`: the exact factor
/// likelihood for discrete targets, the one-shot mean-field Gaussian
/// density for continuous ones. `None` when `i` is missing.
pub fn conditional_log_likelihood(params: &ModelParams, i: usize, inst: &Instance) -> Result<Option<f64>> {
    check_target(params, i)?;
    let v = &inst.values[i];
    if v.is_missing() {
        return Ok(None);
    }
    if params.schema.variable(i).kind == VariableKind::Continuous {
        return Ok(mean_field_one_shot(params, i, inst)?.q_v.log_prob(v));
    }
    let ctx = context(params, i, inst);
    let mut ll = 0.0;
    for (f, o) in target_factors(params, i)?.iter().zip(observed_outcomes(v)) {
        let s = factor_scores(params, i, f, &ctx.input);
        ll += s[o] - crate::model::log_sum_exp(&s);
    }
    Ok(Some(ll))
}

/// Adds `scale * d/dθ log P(v_i | v_o)` for one instance. Returns `false`
/// (and adds nothing) when the target is missing.
///
/// Clamped inputs only receive interaction-weight gradient; for a
/// continuous target the objective is the one-shot mean-field Gaussian
/// log-density.
pub(crate) fn add_conditional_gradient(
    params: &ModelParams,
    i: usize,
    inst: &Instance,
    scale: f64,
    acc: &mut GradientAccumulator,
) -> Result<bool> {
    let v = &inst.values[i];
    if v.is_missing() {
        return Ok(false);
    }
    let ctx = context(params, i, inst);
    let kk = params.num_hidden();
    // d objective / d c_k, shared by w_k and the input weights.
    let mut dc = vec![0.0; kk];
    if let Value::Continuous(x) = v {
        let h: Vec<f64> = ctx.input.iter().copied().map(logistic).collect();
        let mean = params.natural_params(i, &h)[0] * crate::model::GAUSSIAN_SIGMA.powi(2);
        let r = x - mean;
        let block = params.var(i);
        for k in 0..kk {
            dc[k] = r * block.weights[k] * h[k] * (1.0 - h[k]);
        }
        let e = Encoding { feats: vec![(0, r)], ..Default::default() };
        acc.add_unit(params, i, &e, &h, scale);
    } else {
        for (f, o_star) in target_factors(params, i)?.iter().zip(observed_outcomes(v)) {
            let p = softmax(&factor_scores(params, i, f, &ctx.input));
            for (o, e) in f.iter().enumerate() {
                let coef = (o == o_star) as u8 as f64 - p[o];
                if coef == 0.0 {
                    continue;
                }
                let mut pre = ctx.input.clone();
                params.add_hidden_input(i, e, 1.0, &mut pre);
                let sig: Vec<f64> = pre.into_iter().map(logistic).collect();
                acc.add_unit(params, i, e, &sig, scale * coef);
                for (d, s) in dc.iter_mut().zip(&sig) {
                    *d += coef * s;
                }
            }
        }
    }
    acc.add_hidden(&dc, scale);
    for (j, e) in &ctx.units {
        acc.add_weights(params, *j, e, &dc, scale);
    }
    acc.count += 1;
    Ok(true)
}

/// Posterior features as delimited text with header `h1..hK`.
pub fn features_to_csv(rows: &[Vec<f64>], num_hidden: usize) -> String {
    let mut out = (1..=num_hidden).map(|k| format!("h{k}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
