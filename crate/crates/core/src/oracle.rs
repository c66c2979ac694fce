//! Brute-force references for small models.
//!
//! Every quantity here is computed by exhaustive enumeration of the joint
//! state space, with log-potentials evaluated directly from the per-type
//! definitions rather than through the feature encoding used by the
//! learning code. Continuous variables are replaced by a fixed grid; each
//! grid point carries the Riemann weight of its cell.
//!
//! The state space of a ranked variable is the set of all pairwise outcome
//! configurations (`3^P` for `P` pairs) and that of a multicategorical
//! variable includes the empty set, matching the factorized conditionals of
//! the model.

use std::collections::HashMap;

use rand::Rng as _;

use crate::dataset::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::model::{encode, log_sum_exp, UnitState};
use crate::params::ModelParams;
use crate::rng::{tag, RngKey};
use crate::sampling::{GibbsState, GradientAccumulator};
use crate::schema::{ContinuousGrid, DatasetSchema, VariableKind, VariableSpec};
use crate::value::{pair_count, pairs, PairOutcome, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationBudget {
    pub max_states: f64,
    pub grid: ContinuousGrid,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_states: 1e7, grid: ContinuousGrid::default() }
    }
}

/// Every state of unit `spec`, with its log Riemann weight (zero for
/// discrete states).
pub fn unit_states(spec: &VariableSpec, grid: &ContinuousGrid) -> Vec<(UnitState, f64)> {
    let m = spec.size();
    match spec.kind {
        VariableKind::Binary => vec![(UnitState::Binary(false), 0.0), (UnitState::Binary(true), 0.0)],
        VariableKind::Continuous => {
            let w = grid.step().ln();
            grid.values().into_iter().map(|x| (UnitState::Continuous(x), w)).collect()
        }
        VariableKind::Categorical => (0..m).map(|c| (UnitState::Categorical(c), 0.0)).collect(),
        VariableKind::Ordinal => (0..m).map(|c| (UnitState::Ordinal(c), 0.0)).collect(),
        VariableKind::Multicategorical => {
            (0u64..1 << m).map(|mask| (UnitState::Multicat((0..m).map(|j| mask >> j & 1 == 1).collect()), 0.0)).collect()
        }
        VariableKind::CategoryRanked => {
            let p = pair_count(m);
            (0..3usize.pow(p as u32))
                .map(|mut code| {
                    let outcomes = (0..p)
                        .map(|_| {
                            let o = PairOutcome::ALL[code % 3];
                            code /= 3;
                            o
                        })
                        .collect();
                    (UnitState::Ranked(outcomes), 0.0)
                })
                .collect()
        }
    }
}

fn state_count(spec: &VariableSpec, grid: &ContinuousGrid) -> f64 {
    let m = spec.size() as f64;
    match spec.kind {
        VariableKind::Binary => 2.0,
        VariableKind::Continuous => grid.points as f64,
        VariableKind::Categorical | VariableKind::Ordinal => m,
        VariableKind::Multicategorical => 2f64.powf(m),
        VariableKind::CategoryRanked => 3f64.powf(m * (m - 1.0) / 2.0),
    }
}

/// `G_i` and `H_i.` of a unit state, straight from the definitions.
pub fn unit_potentials(params: &ModelParams, i: usize, s: &UnitState) -> (f64, Vec<f64>) {
    let p = params.var(i);
    let kk = params.num_hidden();
    let w = |d: usize, k: usize| p.weights[d * kk + k];
    let m = params.schema.variable(i).size();
    match s {
        UnitState::Binary(b) => {
            let x = *b as u8 as f64;
            (p.bias[0] * x, (0..kk).map(|k| w(0, k) * x).collect())
        }
        UnitState::Continuous(x) => (p.bias[0] * x - 0.5 * x * x, (0..kk).map(|k| w(0, k) * x).collect()),
        UnitState::Categorical(c) => (p.bias[*c], (0..kk).map(|k| w(*c, k)).collect()),
        UnitState::Multicat(a) => {
            let on: Vec<usize> = (0..m).filter(|&j| a[j]).collect();
            (on.iter().map(|&j| p.bias[j]).sum(), (0..kk).map(|k| on.iter().map(|&j| w(j, k)).sum()).collect())
        }
        UnitState::Ordinal(level) => {
            let phi = |d: usize| (*level as f64 - d as f64) / (m as f64 - 1.0);
            ((0..m).map(|d| phi(d) * p.bias[d]).sum(), (0..kk).map(|k| (0..m).map(|d| phi(d) * w(d, k)).sum()).collect())
        }
        UnitState::Ranked(outcomes) => {
            // log of phi_l, phi_m or gamma * sqrt(phi_l phi_m) per pair.
            let inv = 1.0 / m as f64;
            let mut g = 0.0;
            let mut h = vec![0.0; kk];
            for ((l, r), o) in pairs(m).zip(outcomes) {
                match o {
                    PairOutcome::First => {
                        g += inv * p.bias[l];
                        (0..kk).for_each(|k| h[k] += inv * w(l, k));
                    }
                    PairOutcome::Second => {
                        g += inv * p.bias[r];
                        (0..kk).for_each(|k| h[k] += inv * w(r, k));
                    }
                    PairOutcome::Tie => {
                        g += p.log_gamma + 0.5 * inv * (p.bias[l] + p.bias[r]);
                        (0..kk).for_each(|k| h[k] += 0.5 * inv * (w(l, k) + w(r, k)));
                    }
                }
            }
            (g, h)
        }
    }
}

/// Exhaustive table of `P(v_S, h)` for a subset `S` of the variables.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub subset: Vec<usize>,
    pub states: Vec<Vec<(UnitState, f64)>>,
    pub num_hidden: usize,
    pub log_z: f64,
    /// Indexed by `v_index * 2^K + h_bits` with the first subset variable
    /// varying slowest in `v_index`.
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn num_visible_configs(&self) -> usize {
        self.states.iter().map(Vec::len).product()
    }

    /// Per-variable state indices of a visible configuration index.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.states.len()];
        for (slot, s) in out.iter_mut().zip(&self.states).rev() {
            *slot = index % s.len();
            index /= s.len();
        }
        out
    }

    pub fn encode_indices(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.states).fold(0, |acc, (i, s)| acc * s.len() + i)
    }

    /// Index of an exact `(v_S, h)` state, if every unit state is in the table.
    pub fn index_of(&self, units: &[UnitState], h: &[bool]) -> Option<usize> {
        let mut idx = Vec::with_capacity(units.len());
        for (u, s) in units.iter().zip(&self.states) {
            idx.push(s.iter().position(|(x, _)| x == u)?);
        }
        let bits = h.iter().enumerate().fold(0, |acc, (j, b)| acc | ((*b as usize) << j));
        Some((self.encode_indices(&idx) << self.num_hidden) | bits)
    }

    /// Marginal over the states of the `pos`-th subset variable.
    pub fn marginal_unit(&self, pos: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.states[pos].len()];
        let hs = 1usize << self.num_hidden;
        for v in 0..self.num_visible_configs() {
            let mass: f64 = self.probs[v * hs..(v + 1) * hs].iter().sum();
            out[self.decode(v)[pos]] += mass;
        }
        out
    }

    /// Marginal over the `2^K` hidden configurations.
    pub fn marginal_hidden(&self) -> Vec<f64> {
        let hs = 1usize << self.num_hidden;
        let mut out = vec![0.0; hs];
        for (j, p) in self.probs.iter().enumerate() {
            out[j % hs] += p;
        }
        out
    }

    /// Marginal over visible configurations.
    pub fn marginal_visible(&self) -> Vec<f64> {
        let hs = 1usize << self.num_hidden;
        self.probs.chunks(hs).map(|c| c.iter().sum()).collect()
    }
}

/// Joint table over the variables in `subset` (the sub-model in which
/// every other variable is ignored).
pub fn exact_joint_subset(params: &ModelParams, subset: &[usize], budget: &EnumerationBudget) -> Result<JointTable> {
    let kk = params.num_hidden();
    let total = subset.iter().map(|&i| state_count(params.schema.variable(i), &budget.grid)).product::<f64>() * 2f64.powi(kk as i32);
    if total > budget.max_states {
        return Err(Error::Budget { states: total, budget: budget.max_states });
    }
    let states: Vec<Vec<(UnitState, f64)>> = subset.iter().map(|&i| unit_states(params.schema.variable(i), &budget.grid)).collect();
    let pots: Vec<Vec<(f64, Vec<f64>)>> = subset
        .iter()
        .zip(&states)
        .map(|(&i, ss)| {
            ss.iter()
                .map(|(s, lw)| {
                    let (g, h) = unit_potentials(params, i, s);
                    (g + lw, h)
                })
                .collect()
        })
        .collect();
    let mut table = JointTable { subset: subset.to_vec(), states, num_hidden: kk, log_z: 0.0, probs: Vec::new() };
    let nv = table.num_visible_configs();
    let hs = 1usize << kk;
    let mut logp = Vec::with_capacity(nv * hs);
    for v in 0..nv {
        let idx = table.decode(v);
        let mut g = 0.0;
        let mut pre = params.theta.hidden_bias.clone();
        for (pos, &j) in idx.iter().enumerate() {
            let (gj, hj) = &pots[pos][j];
            g += gj;
            pre.iter_mut().zip(hj).for_each(|(a, b)| *a += b);
        }
        for bits in 0..hs {
            let on: f64 = (0..kk).filter(|k| bits >> k & 1 == 1).map(|k| pre[k]).sum();
            logp.push(g + on);
        }
    }
    let log_z = log_sum_exp(&logp);
    table.probs = logp.into_iter().map(|x| (x - log_z).exp()).collect();
    table.log_z = log_z;
    Ok(table)
}

pub fn exact_joint(params: &ModelParams, budget: &EnumerationBudget) -> Result<JointTable> {
    let all: Vec<usize> = (0..params.num_variables()).collect();
    exact_joint_subset(params, &all, budget)
}

/// `log Z_S` of the sub-model over `subset`.
pub fn log_partition_brute(params: &ModelParams, subset: &[usize], budget: &EnumerationBudget) -> Result<f64> {
    Ok(exact_joint_subset(params, subset, budget)?.log_z)
}

fn observed_units(inst: &Instance) -> Vec<(usize, UnitState)> {
    inst.observed().map(|i| (i, UnitState::from_value(&inst.values[i]).expect("observed"))).collect()
}

/// `log sum_h exp(-E(v_S, h))` of a fixed configuration, enumerating `h`.
fn log_unnormalized(params: &ModelParams, units: &[(usize, UnitState)]) -> f64 {
    let kk = params.num_hidden();
    let mut g = 0.0;
    let mut pre = params.theta.hidden_bias.clone();
    for (i, s) in units {
        let (gi, hi) = unit_potentials(params, *i, s);
        g += gi;
        pre.iter_mut().zip(&hi).for_each(|(a, b)| *a += b);
    }
    let terms: Vec<f64> = (0..1usize << kk).map(|bits| g + (0..kk).filter(|k| bits >> k & 1 == 1).map(|k| pre[k]).sum::<f64>()).collect();
    log_sum_exp(&terms)
}

/// Per-instance `log P_S(v_S)` over the observed set `S` of each
/// instance, with continuous observations scored as grid-normalized
/// densities.
pub fn exact_loglik(params: &ModelParams, data: &Dataset, budget: &EnumerationBudget) -> Result<Vec<f64>> {
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    data.instances
        .iter()
        .map(|inst| {
            let s: Vec<usize> = inst.observed().collect();
            let log_z = match cache.get(&s) {
                Some(z) => *z,
                None => {
                    let z = log_partition_brute(params, &s, budget)?;
                    cache.insert(s, z);
                    z
                }
            };
            Ok(log_unnormalized(params, &observed_units(inst)) - log_z)
        })
        .collect()
}

/// Mean exact log-likelihood.
pub fn mean_exact_loglik(params: &ModelParams, data: &Dataset, budget: &EnumerationBudget) -> Result<f64> {
    let ll = exact_loglik(params, data, budget)?;
    Ok(ll.iter().sum::<f64>() / ll.len().max(1) as f64)
}

/// `P(h_k = 1 | v_S)` by enumerating `h`.
pub fn exact_hidden_posterior(params: &ModelParams, inst: &Instance) -> Vec<f64> {
    let kk = params.num_hidden();
    let units = observed_units(inst);
    let mut pre = params.theta.hidden_bias.clone();
    for (i, s) in &units {
        let (_, hi) = unit_potentials(params, *i, s);
        pre.iter_mut().zip(&hi).for_each(|(a, b)| *a += b);
    }
    let terms: Vec<f64> = (0..1usize << kk).map(|bits| (0..kk).filter(|k| bits >> k & 1 == 1).map(|k| pre[k]).sum()).collect();
    let z = log_sum_exp(&terms);
    (0..kk).map(|k| (0..1usize << kk).filter(|bits| bits >> k & 1 == 1).map(|bits| (terms[bits] - z).exp()).sum()).collect()
}

/// Exact `P(v_i, h | v_o)` over the states of `i` (rows) and hidden
/// configurations (columns), where `o` are the observed entries other
/// than `i`.
pub fn exact_target_joint(params: &ModelParams, i: usize, inst: &Instance, grid: &ContinuousGrid) -> (Vec<UnitState>, Vec<Vec<f64>>) {
    exact_states_joint(params, i, inst, unit_states(params.schema.variable(i), grid))
}

fn exact_states_joint(params: &ModelParams, i: usize, inst: &Instance, states: Vec<(UnitState, f64)>) -> (Vec<UnitState>, Vec<Vec<f64>>) {
    let kk = params.num_hidden();
    let units: Vec<(usize, UnitState)> = observed_units(inst).into_iter().filter(|(j, _)| *j != i).collect();
    let mut g0 = 0.0;
    let mut pre0 = params.theta.hidden_bias.clone();
    for (j, s) in &units {
        let (gj, hj) = unit_potentials(params, *j, s);
        g0 += gj;
        pre0.iter_mut().zip(&hj).for_each(|(a, b)| *a += b);
    }
    let mut logp = Vec::new();
    for (s, lw) in &states {
        let (g, h) = unit_potentials(params, i, s);
        let pre: Vec<f64> = pre0.iter().zip(&h).map(|(a, b)| a + b).collect();
        let row: Vec<f64> =
            (0..1usize << kk).map(|bits| g0 + g + lw + (0..kk).filter(|k| bits >> k & 1 == 1).map(|k| pre[k]).sum::<f64>()).collect();
        logp.push(row);
    }
    let flat: Vec<f64> = logp.iter().flatten().copied().collect();
    let z = log_sum_exp(&flat);
    let probs = logp.into_iter().map(|row| row.into_iter().map(|x| (x - z).exp()).collect()).collect();
    (states.into_iter().map(|(s, _)| s).collect(), probs)
}

/// Exact `P(v_i | v_o)` over the states of `i`.
pub fn exact_conditional(params: &ModelParams, i: usize, inst: &Instance, grid: &ContinuousGrid) -> (Vec<UnitState>, Vec<f64>) {
    let (states, joint) = exact_target_joint(params, i, inst, grid);
    (states, joint.iter().map(|row| row.iter().sum()).collect())
}

/// Exact conditional of one factor of a target in the sub-model where the
/// target consists of that factor alone: indicator `factor` of a
/// multicategorical variable (outcomes off, on) or pair number `factor`
/// of a ranked variable (outcomes first, tie, second).
pub fn exact_factor_conditional(params: &ModelParams, i: usize, factor: usize, inst: &Instance) -> Result<Vec<f64>> {
    let spec = params.schema.variable(i);
    let m = spec.size();
    let kk = params.num_hidden();
    let p = params.var(i);
    let w = |d: usize, k: usize| p.weights[d * kk + k];
    // (G, H) of each factor outcome, written out per type.
    let outcomes: Vec<(f64, Vec<f64>)> = match spec.kind {
        VariableKind::Multicategorical if factor < m => {
            vec![(0.0, vec![0.0; kk]), (p.bias[factor], (0..kk).map(|k| w(factor, k)).collect())]
        }
        VariableKind::CategoryRanked if factor < pair_count(m) => {
            let (l, r) = pairs(m).nth(factor).expect("pair");
            let inv = 1.0 / m as f64;
            vec![
                (inv * p.bias[l], (0..kk).map(|k| inv * w(l, k)).collect()),
                (p.log_gamma + 0.5 * inv * (p.bias[l] + p.bias[r]), (0..kk).map(|k| 0.5 * inv * (w(l, k) + w(r, k))).collect()),
                (inv * p.bias[r], (0..kk).map(|k| inv * w(r, k)).collect()),
            ]
        }
        _ => return Err(Error::Unsupported(format!("factor {factor} of '{}'", spec.name))),
    };
    let units: Vec<(usize, UnitState)> = observed_units(inst).into_iter().filter(|(j, _)| *j != i).collect();
    let mut pre0 = params.theta.hidden_bias.clone();
    for (j, s) in &units {
        let (_, hj) = unit_potentials(params, *j, s);
        pre0.iter_mut().zip(&hj).for_each(|(a, b)| *a += b);
    }
    let scores: Vec<f64> = outcomes
        .iter()
        .map(|(g, h)| {
            let terms: Vec<f64> =
                (0..1usize << kk).map(|bits| g + (0..kk).filter(|k| bits >> k & 1 == 1).map(|k| pre0[k] + h[k]).sum::<f64>()).collect();
            log_sum_exp(&terms)
        })
        .collect();
    let z = log_sum_exp(&scores);
    Ok(scores.into_iter().map(|s| (s - z).exp()).collect())
}

/// Exact gradient of the summed log-likelihood `sum_n log P_S(v_S)`:
/// positive phase at the data, negative phase from the exact joint of each
/// observation pattern.
pub fn exact_loglik_gradient(params: &ModelParams, data: &Dataset, budget: &EnumerationBudget) -> Result<GradientAccumulator> {
    let mut acc = GradientAccumulator::new(params);
    let mut negative: HashMap<Vec<usize>, GradientAccumulator> = HashMap::new();
    let mut patterns: Vec<(Vec<usize>, usize)> = Vec::new();
    for inst in &data.instances {
        acc.count += 1;
        let s: Vec<usize> = inst.observed().collect();
        if s.is_empty() {
            continue;
        }
        let h = exact_hidden_posterior(params, inst);
        acc.add_hidden(&h, 1.0);
        for (i, st) in observed_units(inst) {
            acc.add_unit(params, i, &encode(params.schema.variable(i), &st), &h, 1.0);
        }
        match patterns.iter_mut().find(|(p, _)| *p == s) {
            Some((_, n)) => *n += 1,
            None => patterns.push((s, 1)),
        }
    }
    for (s, n) in &patterns {
        if !negative.contains_key(s) {
            negative.insert(s.clone(), model_statistics(params, s, budget)?);
        }
        acc.grad.add_scaled(-(*n as f64), &negative[s].grad);
    }
    Ok(acc)
}

/// `E[stats]` under the exact sub-model over `subset`.
fn model_statistics(params: &ModelParams, subset: &[usize], budget: &EnumerationBudget) -> Result<GradientAccumulator> {
    let table = exact_joint_subset(params, subset, budget)?;
    let kk = params.num_hidden();
    let hs = 1usize << kk;
    let encodings: Vec<Vec<_>> =
        subset.iter().zip(&table.states).map(|(&i, ss)| ss.iter().map(|(s, _)| encode(params.schema.variable(i), s)).collect()).collect();
    let mut acc = GradientAccumulator::new(params);
    for v in 0..table.num_visible_configs() {
        let block = &table.probs[v * hs..(v + 1) * hs];
        let mass: f64 = block.iter().sum();
        if mass == 0.0 {
            continue;
        }
        // E[h | v] * P(v), by enumeration of h.
        let eh: Vec<f64> = (0..kk).map(|k| (0..hs).filter(|b| b >> k & 1 == 1).map(|b| block[b]).sum::<f64>()).collect();
        acc.add_hidden(&eh, 1.0);
        let cond: Vec<f64> = eh.iter().map(|x| x / mass).collect();
        for (pos, &j) in table.decode(v).iter().enumerate() {
            acc.add_unit(params, subset[pos], &encodings[pos][j], &cond, mass);
        }
    }
    Ok(acc)
}

/// Parameters drawn uniformly from `[-scale, scale]`, log-gamma included.
pub fn random_params(schema: &DatasetSchema, num_hidden: usize, scale: f64, seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(schema, num_hidden);
    let mut rng = RngKey::new(seed).child(tag::PLANT).rng();
    for id in p.param_ids() {
        *p.theta.get_mut(id) = rng.random_range(-scale..=scale);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    /// Probability that each cell is removed afterwards.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { burn_in: 1000, thin: 10, chains: 1, missing_rate: 0.0 }
    }
}

/// `n` instances from long-run alternating Gibbs chains (round-robin over
/// `chains`), then cells removed independently with `missing_rate`.
/// Continuous values are in model units.
pub fn generate_synthetic(params: &ModelParams, n: usize, seed: u64, cfg: &SynthConfig) -> Result<Dataset> {
    if !(0.0..1.0).contains(&cfg.missing_rate) {
        return Err(Error::Config("missing rate must lie in [0, 1)".into()));
    }
    let root = RngKey::new(seed).child(tag::SYNTH);
    let chains = cfg.chains.max(1);
    let thin = cfg.thin.max(1);
    let mut states: Vec<GibbsState> = (0..chains)
        .map(|c| {
            let mut s = GibbsState::from_prior(params, root.child(c as u64));
            for _ in 0..cfg.burn_in {
                s.sweep(params);
            }
            s
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let s = &mut states[j % chains];
        for _ in 0..thin {
            s.sweep(params);
        }
        out.push(s.instance(params));
    }
    if cfg.missing_rate > 0.0 {
        let mut rng = RngKey::new(seed).child(tag::MASK).rng();
        for inst in &mut out {
            for v in &mut inst.values {
                if rng.random::<f64>() < cfg.missing_rate {
                    *v = Value::Missing;
                }
            }
        }
    }
    Dataset::new(params.schema.clone(), out)
}
