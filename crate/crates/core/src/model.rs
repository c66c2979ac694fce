//! Energy functionals, the hidden posterior and the per-type data models.
//!
//! Every visible variable is mapped to a sparse feature vector `f_i(v)` of
//! width [`unit_dim`] so that
//!
//! ```text
//! G_i(v)    = sum_d U_id f_id(v) + log(gamma_i) * ties_i(v) + base_i(v)
//! H_ik(v)   = sum_d V_idk f_id(v)
//! ```
//!
//! Binary and Gaussian variables use `f = [v]` (Gaussian adds the base
//! term `-v^2 / 2 sigma^2`), categorical variables a one-hot vector,
//! multicategorical variables the activation indicators and ordinal
//! variables `f_d(m) = (m - d) / (M - 1)`. A ranked variable lives on the
//! space of pairwise outcomes; for each pair the winner gets `1/M`, a tie
//! gives `1/2M` to both sides and one unit to `ties`. Normalizing
//! `exp(G + H h)` over that space gives exactly the product of Davidson
//! pairwise comparisons.

use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, Observations};
use crate::error::{Error, Result};
use crate::params::{unit_dim, ModelParams};
use crate::schema::{VariableKind, VariableSpec};
use crate::value::{pair_count, pair_index, pairs, ranks_from_scores, ranks_to_pairs, PairOutcome, Value};

/// Fixed standard deviation of every Gaussian variable.
pub const GAUSSIAN_SIGMA: f64 = 1.0;

/// Tolerance under which ranking scores are considered tied.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Ordinal score `phi_d(m) = (m - d) / (M - 1)` for zero-based `d, m < M`.
pub fn phi(size: usize, d: usize, m: usize) -> Result<f64> {
    if size < 2 || d >= size || m >= size {
        return Err(Error::InvalidValue(format!("phi(d={d}, m={m}) with M={size}")));
    }
    Ok((m as f64 - d as f64) / (size as f64 - 1.0))
}

/// State of one visible unit in the model's own state space. This differs
/// from [`Value`] in two places: a multicategorical unit may be all-off,
/// and a ranked unit holds one outcome per category pair (possibly
/// intransitive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UnitState {
    Binary(bool),
    Continuous(f64),
    Categorical(usize),
    Multicat(Vec<bool>),
    Ordinal(usize),
    Ranked(Vec<PairOutcome>),
}

impl UnitState {
    pub fn from_value(v: &Value) -> Option<UnitState> {
        Some(match v {
            Value::Missing => return None,
            Value::Binary(b) => UnitState::Binary(*b),
            Value::Continuous(x) => UnitState::Continuous(*x),
            Value::Categorical(c) => UnitState::Categorical(*c),
            Value::Multicat(a) => UnitState::Multicat(a.clone()),
            Value::Ordinal(m) => UnitState::Ordinal(*m),
            Value::Ranked(r) => UnitState::Ranked(ranks_to_pairs(r)),
        })
    }

    pub fn kind(&self) -> VariableKind {
        match self {
            UnitState::Binary(_) => VariableKind::Binary,
            UnitState::Continuous(_) => VariableKind::Continuous,
            UnitState::Categorical(_) => VariableKind::Categorical,
            UnitState::Multicat(_) => VariableKind::Multicategorical,
            UnitState::Ordinal(_) => VariableKind::Ordinal,
            UnitState::Ranked(_) => VariableKind::CategoryRanked,
        }
    }
}

/// Sufficient statistics of a unit state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Encoding {
    /// Sparse `(dim, f_d)` pairs.
    pub feats: Vec<(usize, f64)>,
    /// Number of tied pairs (ranked variables only).
    pub ties: f64,
    /// Parameter-free part of `G_i` (Gaussian quadratic term).
    pub base: f64,
}

/// Feature contribution of one pairwise outcome of a ranked variable.
pub fn pair_features(l: usize, m: usize, size: usize, outcome: PairOutcome) -> Encoding {
    let w = 1.0 / size as f64;
    match outcome {
        PairOutcome::First => Encoding { feats: vec![(l, w)], ties: 0.0, base: 0.0 },
        PairOutcome::Second => Encoding { feats: vec![(m, w)], ties: 0.0, base: 0.0 },
        PairOutcome::Tie => Encoding { feats: vec![(l, 0.5 * w), (m, 0.5 * w)], ties: 1.0, base: 0.0 },
    }
}

pub fn encode(spec: &VariableSpec, state: &UnitState) -> Encoding {
    let m = spec.size();
    match state {
        UnitState::Binary(b) => Encoding { feats: if *b { vec![(0, 1.0)] } else { Vec::new() }, ..Default::default() },
        UnitState::Continuous(x) => Encoding { feats: vec![(0, *x)], ties: 0.0, base: -x * x / (2.0 * GAUSSIAN_SIGMA * GAUSSIAN_SIGMA) },
        UnitState::Categorical(c) => Encoding { feats: vec![(*c, 1.0)], ..Default::default() },
        UnitState::Multicat(a) => {
            Encoding { feats: a.iter().enumerate().filter(|(_, on)| **on).map(|(j, _)| (j, 1.0)).collect(), ..Default::default() }
        }
        UnitState::Ordinal(level) => Encoding {
            feats: (0..m).map(|d| (d, (*level as f64 - d as f64) / (m as f64 - 1.0))).filter(|(_, f)| *f != 0.0).collect(),
            ..Default::default()
        },
        UnitState::Ranked(outcomes) => {
            let mut dense = vec![0.0; m];
            let mut ties = 0.0;
            for ((l, r), o) in pairs(m).zip(outcomes) {
                let e = pair_features(l, r, m, *o);
                for (d, f) in e.feats {
                    dense[d] += f;
                }
                ties += e.ties;
            }
            Encoding { feats: dense.into_iter().enumerate().filter(|(_, f)| *f != 0.0).collect(), ties, base: 0.0 }
        }
    }
}

/// Per-type representation of a distribution over one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDistribution {
    Bernoulli(f64),
    Categorical(Vec<f64>),
    /// Independent activation probability per category.
    Indicators(Vec<f64>),
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Ordinal(Vec<f64>),
    Pairwise(PairwiseTable),
}

/// Three-way outcome probabilities `(l > m, l = m, l < m)` for every pair
/// `l < m`, in [`pairs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    pub size: usize,
    pub probs: Vec<[f64; 3]>,
}

impl PairwiseTable {
    /// `P(c_a > c_b)` for any `a != b`.
    pub fn prefer(&self, a: usize, b: usize) -> f64 {
        if a < b {
            self.probs[pair_index(a, b, self.size)][0]
        } else {
            self.probs[pair_index(b, a, self.size)][2]
        }
    }

    pub fn tie(&self, a: usize, b: usize) -> f64 {
        let (l, m) = if a < b { (a, b) } else { (b, a) };
        self.probs[pair_index(l, m, self.size)][1]
    }

    /// `s(c_m) = sum_{l != m} P(c_m > c_l)`.
    pub fn scores(&self) -> Vec<f64> {
        (0..self.size).map(|m| (0..self.size).filter(|&l| l != m).map(|l| self.prefer(m, l)).sum()).collect()
    }

    /// Dense ranking by descending score, ties within [`SCORE_TIE_TOLERANCE`].
    pub fn ranking(&self) -> Vec<u32> {
        ranks_from_scores(&self.scores(), SCORE_TIE_TOLERANCE)
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = j;
        }
    }
    best
}

impl PredictiveDistribution {
    /// Point prediction: mode for discrete types (lowest index on ties),
    /// indicators at or above `threshold` for multicategorical variables
    /// (an empty set is promoted to the most probable indicator), score
    /// ranking for ranked variables and the mean for Gaussians.
    pub fn decode(&self, threshold: f64) -> Value {
        match self {
            PredictiveDistribution::Bernoulli(p) => Value::Binary(*p > 0.5),
            PredictiveDistribution::Categorical(p) => Value::Categorical(argmax(p)),
            PredictiveDistribution::Ordinal(p) => Value::Ordinal(argmax(p)),
            PredictiveDistribution::Indicators(p) => {
                let mut on: Vec<bool> = p.iter().map(|&x| x >= threshold).collect();
                if !on.iter().any(|&x| x) {
                    on[argmax(p)] = true;
                }
                Value::Multicat(on)
            }
            PredictiveDistribution::Gaussian { mean, .. } => Value::Continuous(*mean),
            PredictiveDistribution::Pairwise(t) => Value::Ranked(t.ranking()),
        }
    }

    /// Log-probability (log-density for Gaussians) of an observed value;
    /// multicategorical and ranked values score the product of their
    /// indicators or pairs.
    pub fn log_prob(&self, v: &Value) -> Option<f64> {
        let ln = |p: f64| p.max(f64::MIN_POSITIVE).ln();
        Some(match (self, v) {
            (PredictiveDistribution::Bernoulli(p), Value::Binary(b)) => ln(if *b { *p } else { 1.0 - p }),
            (PredictiveDistribution::Categorical(p), Value::Categorical(c)) | (PredictiveDistribution::Ordinal(p), Value::Ordinal(c)) => {
                ln(p[*c])
            }
            (PredictiveDistribution::Indicators(p), Value::Multicat(a)) => {
                a.iter().zip(p).map(|(on, q)| ln(if *on { *q } else { 1.0 - q })).sum()
            }
            (PredictiveDistribution::Gaussian { mean, sd }, Value::Continuous(x)) => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            (PredictiveDistribution::Pairwise(t), Value::Ranked(r)) => {
                ranks_to_pairs(r).iter().zip(&t.probs).map(|(o, p)| ln(p[outcome_slot(*o)])).sum()
            }
            _ => return None,
        })
    }

    /// Expected feature vector (dense, width [`unit_dim`]) and expected tie
    /// count under this distribution.
    pub fn expected_features(&self, spec: &VariableSpec) -> (Vec<f64>, f64) {
        let m = spec.size();
        match self {
            PredictiveDistribution::Bernoulli(p) => (vec![*p], 0.0),
            PredictiveDistribution::Gaussian { mean, .. } => (vec![*mean], 0.0),
            PredictiveDistribution::Categorical(p) | PredictiveDistribution::Indicators(p) => (p.clone(), 0.0),
            PredictiveDistribution::Ordinal(p) => {
                let f =
                    (0..m).map(|d| p.iter().enumerate().map(|(level, q)| q * (level as f64 - d as f64) / (m as f64 - 1.0)).sum()).collect();
                (f, 0.0)
            }
            PredictiveDistribution::Pairwise(t) => {
                let mut f = vec![0.0; m];
                let mut ties = 0.0;
                for ((l, r), p) in pairs(m).zip(&t.probs) {
                    for (o, q) in PairOutcome::ALL.iter().zip(p) {
                        let e = pair_features(l, r, m, *o);
                        for (d, x) in e.feats {
                            f[d] += q * x;
                        }
                        ties += q * e.ties;
                    }
                }
                (f, ties)
            }
        }
    }
}

pub(crate) fn outcome_slot(o: PairOutcome) -> usize {
    match o {
        PairOutcome::First => 0,
        PairOutcome::Tie => 1,
        PairOutcome::Second => 2,
    }
}

/// Davidson three-way probabilities from the log-potentials
/// `log phi_l`, `log phi_m` and `log gamma`.
pub fn davidson(log_phi_l: f64, log_phi_m: f64, log_gamma: f64) -> [f64; 3] {
    let tie = log_gamma + 0.5 * (log_phi_l + log_phi_m);
    let s = softmax(&[log_phi_l, tie, log_phi_m]);
    [s[0], s[1], s[2]]
}

fn check_kind(params: &ModelParams, i: usize, v: &Value) -> Result<()> {
    let spec = params.schema.variable(i);
    if v.is_missing() || v.kind() != Some(spec.kind) {
        return Err(Error::KindMismatch { index: i, name: spec.name.clone(), expected: spec.kind.keyword() });
    }
    spec.check(v).map_err(Error::InvalidValue)
}

impl ModelParams {
    /// `G_i(v)` for an observed value.
    pub fn g_value(&self, i: usize, v: &Value) -> Result<f64> {
        check_kind(self, i, v)?;
        let state = UnitState::from_value(v).expect("checked non-missing");
        Ok(self.g_encoded(i, &encode(self.schema.variable(i), &state)))
    }

    /// `H_ik(v)` for an observed value.
    pub fn h_value(&self, i: usize, k: usize, v: &Value) -> Result<f64> {
        check_kind(self, i, v)?;
        if k >= self.num_hidden() {
            return Err(Error::Dimension(format!("hidden index {k} >= K={}", self.num_hidden())));
        }
        let state = UnitState::from_value(v).expect("checked non-missing");
        Ok(self.h_encoded(i, k, &encode(self.schema.variable(i), &state)))
    }

    pub fn g_encoded(&self, i: usize, e: &Encoding) -> f64 {
        let p = self.var(i);
        e.feats.iter().map(|&(d, f)| p.bias[d] * f).sum::<f64>() + p.log_gamma * e.ties + e.base
    }

    pub fn h_encoded(&self, i: usize, k: usize, e: &Encoding) -> f64 {
        let p = self.var(i);
        let kk = self.num_hidden();
        e.feats.iter().map(|&(d, f)| p.weights[d * kk + k] * f).sum()
    }

    /// Adds `scale * H_i.(e)` to `acc` for every hidden unit.
    pub fn add_hidden_input(&self, i: usize, e: &Encoding, scale: f64, acc: &mut [f64]) {
        let p = self.var(i);
        let k = self.num_hidden();
        for &(d, f) in &e.feats {
            let row = &p.weights[d * k..(d + 1) * k];
            for (a, w) in acc.iter_mut().zip(row) {
                *a += scale * f * w;
            }
        }
    }

    /// Hidden pre-activations `w_k + sum_i H_ik(v_i)` over encoded units.
    /// Units are summed in schema order whatever order they come in, so the
    /// result is bit-identical under permutation.
    pub fn hidden_input<'a>(&self, units: impl IntoIterator<Item = (usize, &'a Encoding)>) -> Vec<f64> {
        let mut units: Vec<(usize, &Encoding)> = units.into_iter().collect();
        units.sort_by_key(|(i, _)| *i);
        let mut acc = self.theta.hidden_bias.clone();
        for (i, e) in units {
            self.add_hidden_input(i, e, 1.0, &mut acc);
        }
        acc
    }

    /// Encodings of the observed entries, in schema order.
    pub fn encode_observed<O: Observations + ?Sized>(&self, v: &O) -> Vec<(usize, Encoding)> {
        (0..v.num_variables())
            .filter(|&i| v.is_observed(i))
            .map(|i| {
                let state = UnitState::from_value(v.value(i)).expect("observed value");
                (i, encode(self.schema.variable(i), &state))
            })
            .collect()
    }

    /// `P(h_k = 1 | v)` for every `k`; missing entries contribute nothing.
    pub fn hidden_posterior<O: Observations + ?Sized>(&self, v: &O) -> Vec<f64> {
        let enc = self.encode_observed(v);
        self.hidden_input(enc.iter().map(|(i, e)| (*i, e))).into_iter().map(logistic).collect()
    }

    /// Natural parameters `eta_d = U_d + sum_k V_dk h_k` of variable `i`.
    pub fn natural_params(&self, i: usize, h: &[f64]) -> Vec<f64> {
        let p = self.var(i);
        let k = self.num_hidden();
        p.bias.iter().enumerate().map(|(d, u)| u + p.weights[d * k..(d + 1) * k].iter().zip(h).map(|(w, x)| w * x).sum::<f64>()).collect()
    }

    /// `P_i(v_i | h)`. `h` may be real-valued in `[0, 1]` (mean-field use).
    pub fn conditional_data_distribution(&self, i: usize, h: &[f64]) -> Result<PredictiveDistribution> {
        if h.len() != self.num_hidden() {
            return Err(Error::Dimension(format!("h has length {}, K={}", h.len(), self.num_hidden())));
        }
        if i >= self.num_variables() {
            return Err(Error::Dimension(format!("variable index {i}")));
        }
        let eta = self.natural_params(i, h);
        Ok(self.distribution_from_natural(i, &eta))
    }

    pub(crate) fn distribution_from_natural(&self, i: usize, eta: &[f64]) -> PredictiveDistribution {
        let spec = self.schema.variable(i);
        let m = spec.size();
        match spec.kind {
            VariableKind::Binary => PredictiveDistribution::Bernoulli(logistic(eta[0])),
            VariableKind::Continuous => {
                PredictiveDistribution::Gaussian { mean: GAUSSIAN_SIGMA * GAUSSIAN_SIGMA * eta[0], sd: GAUSSIAN_SIGMA }
            }
            VariableKind::Categorical => PredictiveDistribution::Categorical(softmax(eta)),
            VariableKind::Multicategorical => PredictiveDistribution::Indicators(eta.iter().copied().map(logistic).collect()),
            VariableKind::Ordinal => {
                let scores: Vec<f64> =
                    (0..m).map(|level| (0..m).map(|d| (level as f64 - d as f64) / (m as f64 - 1.0) * eta[d]).sum()).collect();
                PredictiveDistribution::Ordinal(softmax(&scores))
            }
            VariableKind::CategoryRanked => {
                let lg = self.var(i).log_gamma;
                let log_phi: Vec<f64> = eta.iter().map(|x| x / m as f64).collect();
                let probs = pairs(m).map(|(l, r)| davidson(log_phi[l], log_phi[r], lg)).collect();
                debug_assert_eq!(pair_count(m), pairs(m).count());
                PredictiveDistribution::Pairwise(PairwiseTable { size: m, probs })
            }
        }
    }

    /// `E(v, h) = -sum_i G_i(v_i) - sum_k w_k h_k - sum_ik H_ik(v_i) h_k`.
    pub fn energy(&self, v: &Instance, h: &[bool]) -> Result<f64> {
        if h.len() != self.num_hidden() || v.len() != self.num_variables() {
            return Err(Error::Dimension("instance or hidden vector length".into()));
        }
        let mut states = Vec::with_capacity(v.len());
        for (i, x) in v.values.iter().enumerate() {
            check_kind(self, i, x)?;
            states.push(UnitState::from_value(x).expect("checked"));
        }
        Ok(self.energy_of_states(&states, h))
    }

    /// Energy over unit states (the model's own state space).
    pub fn energy_of_states(&self, states: &[UnitState], h: &[bool]) -> f64 {
        let mut neg = 0.0;
        let mut pre = self.theta.hidden_bias.clone();
        for (i, s) in states.iter().enumerate() {
            let e = encode(self.schema.variable(i), s);
            neg += self.g_encoded(i, &e);
            self.add_hidden_input(i, &e, 1.0, &mut pre);
        }
        neg += pre.iter().zip(h).filter(|(_, on)| **on).map(|(a, _)| a).sum::<f64>();
        -neg
    }

    pub fn unit_dim(&self, i: usize) -> usize {
        unit_dim(self.schema.variable(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{parse_schema, DatasetSchema, VariableSpec};
    use crate::value::enumerate_rankings;

    fn one(spec: VariableSpec, k: usize) -> ModelParams {
        ModelParams::zeros(&DatasetSchema::new(vec![spec]).unwrap(), k)
    }

    #[test]
    fn singleton_energies() {
        let mut p = one(VariableSpec::binary("b"), 1);
        p.var_mut(0).bias[0] = 0.7;
        assert!((p.g_value(0, &Value::Binary(true)).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(p.g_value(0, &Value::Binary(false)).unwrap(), 0.0);
        let p = one(VariableSpec::continuous("x"), 1);
        assert_eq!(p.g_value(0, &Value::Continuous(2.0)).unwrap(), -2.0);
        assert!(p.g_value(0, &Value::Binary(true)).is_err());
    }

    #[test]
    fn interaction_energies() {
        let mut p = one(VariableSpec::binary("b"), 1);
        p.var_mut(0).weights[0] = 0.3;
        assert_eq!(p.h_value(0, 0, &Value::Binary(true)).unwrap(), 0.3);

        let mut p = one(VariableSpec::with_size("c", VariableKind::Categorical, 3), 1);
        p.var_mut(0).weights = vec![0.1, 0.2, 0.3];
        assert_eq!(p.h_value(0, 0, &Value::Categorical(1)).unwrap(), 0.2);

        let mut p = one(VariableSpec::with_size("o", VariableKind::Ordinal, 3), 1);
        p.var_mut(0).weights = vec![1.0, 1.0, 1.0];
        // phi(3,1) + phi(3,2) + phi(3,3) = 1 + 0.5 + 0
        let direct: f64 = (1..=3).map(|d| (3.0 - d as f64) / 2.0).sum();
        assert_eq!(direct, 1.5);
        assert!((p.h_value(0, 0, &Value::Ordinal(2)).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(3, 1, 1).unwrap(), 0.0);
        assert_eq!(phi(3, 0, 2).unwrap(), 1.0);
        for d in 0..5 {
            for m in 1..5 {
                assert!(phi(5, d, m - 1).unwrap() < phi(5, d, m).unwrap());
            }
        }
        assert!(phi(3, 3, 0).is_err());
        assert!(phi(1, 0, 0).is_err());
    }

    #[test]
    fn posterior_basics() {
        let s = parse_schema("a binary\nb categorical x,y,z").unwrap();
        let p = ModelParams::zeros(&s, 3);
        let v = Instance::new(vec![Value::Binary(true), Value::Categorical(2)]);
        assert_eq!(p.hidden_posterior(&v), vec![0.5; 3]);
        let mut p = ModelParams::zeros(&s, 1);
        p.theta.hidden_bias[0] = -20.0;
        let q = p.hidden_posterior(&Instance::missing(2))[0];
        assert!((q - 2.061_153_618_190_204e-9).abs() < 1e-20);
    }

    #[test]
    fn conditional_examples() {
        let mut p = one(VariableSpec::with_size("r", VariableKind::CategoryRanked, 3), 1);
        p.var_mut(0).log_gamma = 0.0;
        let PredictiveDistribution::Pairwise(t) = p.conditional_data_distribution(0, &[1.0]).unwrap() else { panic!() };
        for pr in &t.probs {
            for x in pr {
                assert!((x - 1.0 / 3.0).abs() < 1e-15);
            }
        }

        let p = one(VariableSpec::with_size("o", VariableKind::Ordinal, 4), 2);
        let PredictiveDistribution::Ordinal(q) = p.conditional_data_distribution(0, &[1.0, 0.0]).unwrap() else { panic!() };
        assert!(q.iter().all(|x| (x - 0.25).abs() < 1e-15));

        let mut p = one(VariableSpec::continuous("x"), 1);
        p.var_mut(0).bias[0] = 0.5;
        p.var_mut(0).weights[0] = 0.5;
        let d = p.conditional_data_distribution(0, &[0.5]).unwrap();
        assert_eq!(d, PredictiveDistribution::Gaussian { mean: 0.75, sd: 1.0 });
        assert!(p.conditional_data_distribution(0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn ranked_energy_matches_davidson_product() {
        // Normalizing exp(G + H h) over all 27 pairwise configurations gives
        // the product of independent Davidson comparisons.
        let mut p = one(VariableSpec::with_size("r", VariableKind::CategoryRanked, 3), 2);
        let v = p.var_mut(0);
        v.bias = vec![0.3, -0.8, 1.1];
        v.weights = vec![0.2, -0.4, 0.9, 0.1, -0.6, 0.5];
        v.log_gamma = 0.4;
        let h = [true, false];
        let spec = p.schema.variable(0).clone();
        let mut configs = Vec::new();
        for a in PairOutcome::ALL {
            for b in PairOutcome::ALL {
                for c in PairOutcome::ALL {
                    configs.push(vec![a, b, c]);
                }
            }
        }
        let hf = [1.0, 0.0];
        let logits: Vec<f64> = configs
            .iter()
            .map(|c| {
                let e = encode(&spec, &UnitState::Ranked(c.clone()));
                p.g_encoded(0, &e) + p.h_encoded(0, 0, &e)
            })
            .collect();
        let probs = softmax(&logits);
        let PredictiveDistribution::Pairwise(t) = p.conditional_data_distribution(0, &hf).unwrap() else { panic!() };
        for (c, q) in configs.iter().zip(&probs) {
            let prod: f64 = c.iter().zip(&t.probs).map(|(o, pr)| pr[outcome_slot(*o)]).product();
            assert!((prod - q).abs() < 1e-14);
        }
        // and the energy is consistent with the encoding
        let ranks = enumerate_rankings(3)[4].clone();
        let inst = Instance::new(vec![Value::Ranked(ranks.clone())]);
        let e = encode(&spec, &UnitState::Ranked(ranks_to_pairs(&ranks)));
        let expect = -(p.g_encoded(0, &e) + p.theta.hidden_bias[0] + p.h_encoded(0, 0, &e));
        assert!((p.energy(&inst, &h).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn stable_softplus() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
