//! Blocked Gibbs sampling and the contrastive-divergence gradient.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::{Instance, Observations};
use crate::error::{Error, Result};
use crate::model::{encode, logistic, Encoding, PredictiveDistribution, UnitState};
use crate::params::{ModelParams, Parameters};
use crate::rng::{Rng, RngKey};
use crate::value::{pairs_to_ranks, PairOutcome, Value};

/// Attempts at redrawing an all-off multicategorical sample before the
/// most probable indicator is forced on.
pub const MULTICAT_REDRAWS: usize = 8;

/// Sum of (data statistics - model statistics), same shape as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    pub grad: Parameters,
    /// Number of instances summed in.
    pub count: usize,
}

impl GradientAccumulator {
    pub fn new(params: &ModelParams) -> Self {
        GradientAccumulator { grad: params.theta.zeros_like(), count: 0 }
    }

    /// Adds `scale` times the statistics of unit `i` paired with hidden
    /// activations `h`.
    pub fn add_unit(&mut self, params: &ModelParams, i: usize, e: &Encoding, h: &[f64], scale: f64) {
        let k = params.num_hidden();
        let block = &mut self.grad.variables[i];
        for &(d, f) in &e.feats {
            block.bias[d] += scale * f;
            let row = &mut block.weights[d * k..(d + 1) * k];
            for (g, hk) in row.iter_mut().zip(h) {
                *g += scale * f * hk;
            }
        }
        block.log_gamma += scale * e.ties;
    }

    /// Adds `scale * f_id(e) * r_k` to the interaction weights of unit `i`
    /// only, leaving its biases alone.
    pub fn add_weights(&mut self, params: &ModelParams, i: usize, e: &Encoding, r: &[f64], scale: f64) {
        let k = params.num_hidden();
        let block = &mut self.grad.variables[i];
        for &(d, f) in &e.feats {
            for (g, rk) in block.weights[d * k..(d + 1) * k].iter_mut().zip(r) {
                *g += scale * f * rk;
            }
        }
    }

    pub fn add_hidden(&mut self, h: &[f64], scale: f64) {
        for (g, hk) in self.grad.hidden_bias.iter_mut().zip(h) {
            *g += scale * hk;
        }
    }

    pub fn merge(&mut self, other: &GradientAccumulator) {
        self.grad.add_scaled(1.0, &other.grad);
        self.count += other.count;
    }

    /// Gradient averaged over the summed instances.
    pub fn mean(&self) -> Parameters {
        let mut g = self.grad.clone();
        if self.count > 0 {
            g.scale(1.0 / self.count as f64);
        }
        g
    }
}

pub fn sample_bits(probs: &[f64], rng: &mut Rng) -> Vec<bool> {
    probs.iter().map(|&p| rng.random::<f64>() < p).collect()
}

/// Draws `h` from `P(h | v)`.
pub fn sample_hidden<O: Observations + ?Sized>(params: &ModelParams, v: &O, rng: &mut Rng) -> Vec<bool> {
    sample_bits(&params.hidden_posterior(v), rng)
}

fn draw_index(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return j;
        }
    }
    p.len() - 1
}

/// Draws a unit state from a per-type distribution. Ranked units draw each
/// pair independently; multicategorical units may come out all-off.
pub fn draw_state(dist: &PredictiveDistribution, rng: &mut Rng) -> UnitState {
    match dist {
        PredictiveDistribution::Bernoulli(p) => UnitState::Binary(rng.random::<f64>() < *p),
        PredictiveDistribution::Gaussian { mean, sd } => {
            let z: f64 = rng.sample(StandardNormal);
            UnitState::Continuous(mean + sd * z)
        }
        PredictiveDistribution::Categorical(p) => UnitState::Categorical(draw_index(p, rng)),
        PredictiveDistribution::Ordinal(p) => UnitState::Ordinal(draw_index(p, rng)),
        PredictiveDistribution::Indicators(p) => UnitState::Multicat(sample_bits(p, rng)),
        PredictiveDistribution::Pairwise(t) => UnitState::Ranked(t.probs.iter().map(|p| PairOutcome::ALL[draw_index(p, rng)]).collect()),
    }
}

/// Converts a sampled unit state into an observable value. An all-off
/// multicategorical draw is redrawn from `dist` up to
/// [`MULTICAT_REDRAWS`] times, then the most probable indicator is set.
/// Ranked outcomes are aggregated by [`pairs_to_ranks`].
pub fn state_to_value(state: UnitState, dist: &PredictiveDistribution, rng: &mut Rng) -> Value {
    match state {
        UnitState::Binary(b) => Value::Binary(b),
        UnitState::Continuous(x) => Value::Continuous(x),
        UnitState::Categorical(c) => Value::Categorical(c),
        UnitState::Ordinal(m) => Value::Ordinal(m),
        UnitState::Ranked(o) => {
            let size = match dist {
                PredictiveDistribution::Pairwise(t) => t.size,
                _ => unreachable!("ranked state with non-pairwise distribution"),
            };
            Value::Ranked(pairs_to_ranks(&o, size))
        }
        UnitState::Multicat(mut a) => {
            let PredictiveDistribution::Indicators(p) = dist else {
                unreachable!("multicategorical state with non-indicator distribution")
            };
            let mut tries = 0;
            while !a.iter().any(|&x| x) && tries < MULTICAT_REDRAWS {
                a = sample_bits(p, rng);
                tries += 1;
            }
            if !a.iter().any(|&x| x) {
                let best = (0..p.len()).fold(0, |b, j| if p[j] > p[b] { j } else { b });
                a[best] = true;
            }
            Value::Multicat(a)
        }
    }
}

fn as_real(h: &[bool]) -> Vec<f64> {
    h.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Draws the variables in `pattern` from `P(v_i | h)`; all other positions
/// are `Missing`.
pub fn sample_visible(params: &ModelParams, h: &[bool], pattern: &[usize], rng: &mut Rng) -> Result<Instance> {
    let hr = as_real(h);
    let mut out = Instance::missing(params.num_variables());
    for &i in pattern {
        let dist = params.conditional_data_distribution(i, &hr)?;
        let state = draw_state(&dist, rng);
        out.values[i] = state_to_value(state, &dist, rng);
    }
    Ok(out)
}

/// State of an alternating Gibbs chain over `(v, h)`. Positions holding
/// `None` are not part of the chain.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub h: Vec<bool>,
    pub units: Vec<Option<UnitState>>,
    rng: Rng,
}

impl GibbsState {
    /// Starts from the observed entries of `start`.
    pub fn from_instance(start: &Instance, num_hidden: usize, key: RngKey) -> Self {
        GibbsState { h: vec![false; num_hidden], units: start.values.iter().map(UnitState::from_value).collect(), rng: key.rng() }
    }

    /// Starts with every variable in the chain, drawn from `P(v | h = 0)`.
    pub fn from_prior(params: &ModelParams, key: RngKey) -> Self {
        let mut rng = key.rng();
        let h0 = vec![0.0; params.num_hidden()];
        let units = (0..params.num_variables())
            .map(|i| {
                let dist = params.conditional_data_distribution(i, &h0).expect("shapes");
                Some(draw_state(&dist, &mut rng))
            })
            .collect();
        GibbsState { h: vec![false; params.num_hidden()], units, rng }
    }

    fn hidden_probs(&self, params: &ModelParams) -> Vec<f64> {
        let enc = self.encodings(params);
        params.hidden_input(enc.iter().map(|(i, e)| (*i, e))).into_iter().map(logistic).collect()
    }

    fn encodings(&self, params: &ModelParams) -> Vec<(usize, Encoding)> {
        self.units.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (i, encode(params.schema.variable(i), s)))).collect()
    }

    /// One sweep: `h ~ P(h | v)` then every chain unit `v_i ~ P(v_i | h)`.
    pub fn sweep(&mut self, params: &ModelParams) {
        let probs = self.hidden_probs(params);
        self.h = sample_bits(&probs, &mut self.rng);
        let hr = as_real(&self.h);
        for i in 0..self.units.len() {
            if self.units[i].is_some() {
                let dist = params.conditional_data_distribution(i, &hr).expect("shapes");
                self.units[i] = Some(draw_state(&dist, &mut self.rng));
            }
        }
    }

    /// Current visible state as observable values.
    pub fn instance(&mut self, params: &ModelParams) -> Instance {
        let hr = as_real(&self.h);
        let values = (0..self.units.len())
            .map(|i| match self.units[i].clone() {
                None => Value::Missing,
                Some(s) => {
                    let dist = params.conditional_data_distribution(i, &hr).expect("shapes");
                    state_to_value(s, &dist, &mut self.rng)
                }
            })
            .collect();
        Instance::new(values)
    }
}

/// CD-k statistics of one instance: positive phase with `P(h | v)` at the
/// observed entries, negative phase after `k_steps` alternating steps
/// restarted from the data over the observed positions only.
pub fn cd_instance<O: Observations + ?Sized>(params: &ModelParams, v: &O, k_steps: usize, key: RngKey) -> GradientAccumulator {
    let mut acc = GradientAccumulator::new(params);
    acc.count = 1;
    let data = params.encode_observed(v);
    if data.is_empty() {
        return acc;
    }
    let pos_h: Vec<f64> = params.hidden_input(data.iter().map(|(i, e)| (*i, e))).into_iter().map(logistic).collect();
    acc.add_hidden(&pos_h, 1.0);
    for (i, e) in &data {
        acc.add_unit(params, *i, e, &pos_h, 1.0);
    }

    let mut rng = key.rng();
    let mut chain = data;
    let mut probs = pos_h;
    for _ in 0..k_steps {
        let h = as_real(&sample_bits(&probs, &mut rng));
        for (i, e) in chain.iter_mut() {
            let dist = params.conditional_data_distribution(*i, &h).expect("shapes");
            *e = encode(params.schema.variable(*i), &draw_state(&dist, &mut rng));
        }
        probs = params.hidden_input(chain.iter().map(|(i, e)| (*i, e))).into_iter().map(logistic).collect();
    }
    acc.add_hidden(&probs, -1.0);
    for (i, e) in &chain {
        acc.add_unit(params, *i, e, &probs, -1.0);
    }
    acc
}

/// CD-k gradient summed over a batch. Instance `j` of the batch draws from
/// `key.child(j)`; with `workers > 1` instances are processed in parallel
/// and merged in batch order, so the result does not depend on `workers`.
pub fn cd_k<O: Observations + Sync>(
    params: &ModelParams,
    batch: &[O],
    k_steps: usize,
    key: RngKey,
    workers: usize,
) -> Result<GradientAccumulator> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if k_steps == 0 {
        return Err(Error::Config("CD needs at least one Gibbs step".into()));
    }
    let mut total = GradientAccumulator::new(params);
    if workers <= 1 {
        for (j, v) in batch.iter().enumerate() {
            total.merge(&cd_instance(params, v, k_steps, key.child(j as u64)));
        }
    } else {
        let parts: Vec<GradientAccumulator> = run_parallel(workers, || {
            batch.par_iter().enumerate().map(|(j, v)| cd_instance(params, v, k_steps, key.child(j as u64))).collect()
        });
        for p in &parts {
            total.merge(p);
        }
    }
    Ok(total)
}

pub(crate) fn run_parallel<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

impl<T: Observations + ?Sized> Observations for &T {
    fn num_variables(&self) -> usize {
        (**self).num_variables()
    }
    fn is_observed(&self, i: usize) -> bool {
        (**self).is_observed(i)
    }
    fn value(&self, i: usize) -> &Value {
        (**self).value(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{parse_schema, DatasetSchema, VariableKind, VariableSpec};
    use std::cell::RefCell;

    fn small() -> ModelParams {
        let s = parse_schema("a binary\nb multicat x,y,z\nc rank p,q,r\nd continuous\ne ordinal l,m,h").unwrap();
        let mut p = ModelParams::zeros(&s, 3);
        for (j, id) in p.param_ids().into_iter().enumerate() {
            *p.theta.get_mut(id) = ((j * 37 % 17) as f64 - 8.0) / 10.0;
        }
        p
    }

    #[test]
    fn hidden_frequency_at_zero_params() {
        let s = parse_schema("a binary").unwrap();
        let p = ModelParams::zeros(&s, 2);
        let mut rng = RngKey::new(1).rng();
        let v = Instance::new(vec![Value::Binary(true)]);
        let mut ones = [0usize; 2];
        let n = 100_000;
        for _ in 0..n {
            for (c, b) in ones.iter_mut().zip(sample_hidden(&p, &v, &mut rng)) {
                *c += b as usize;
            }
        }
        for c in ones {
            let f = c as f64 / n as f64;
            assert!((0.494..=0.506).contains(&f), "{f}");
        }
    }

    #[test]
    fn saturated_hidden_never_fires() {
        let s = parse_schema("a binary").unwrap();
        let mut p = ModelParams::zeros(&s, 1);
        p.theta.hidden_bias[0] = -50.0;
        let mut rng = RngKey::new(2).rng();
        let v = Instance::new(vec![Value::Binary(true)]);
        assert!((0..1000).all(|_| !sample_hidden(&p, &v, &mut rng)[0]));
    }

    #[test]
    fn sampling_is_deterministic_per_key() {
        let p = small();
        let v = Instance::new(vec![Value::Binary(true), Value::Missing, Value::Missing, Value::Continuous(0.3), Value::Missing]);
        let draw = || {
            let mut rng = RngKey::new(5).rng();
            (0..20).map(|_| sample_hidden(&p, &v, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn binary_visible_frequency() {
        let s = parse_schema("a binary").unwrap();
        let p = ModelParams::zeros(&s, 1);
        let mut rng = RngKey::new(3).rng();
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_visible(&p, &[true], &[0], &mut rng).unwrap().values[0] == Value::Binary(true)).count();
        let f = ones as f64 / n as f64;
        assert!((0.494..=0.506).contains(&f), "{f}");
    }

    #[test]
    fn saturated_multicat_draws_all_on() {
        let spec = VariableSpec::with_size("m", VariableKind::Multicategorical, 3);
        let mut p = ModelParams::zeros(&DatasetSchema::new(vec![spec]).unwrap(), 1);
        p.var_mut(0).bias = vec![10.0; 3];
        let mut rng = RngKey::new(4).rng();
        let n = 10_000;
        let full =
            (0..n).filter(|_| sample_visible(&p, &[false], &[0], &mut rng).unwrap().values[0] == Value::Multicat(vec![true; 3])).count();
        assert!(full as f64 / n as f64 > 0.999);
    }

    #[test]
    fn multicat_values_are_never_empty() {
        let spec = VariableSpec::with_size("m", VariableKind::Multicategorical, 3);
        let mut p = ModelParams::zeros(&DatasetSchema::new(vec![spec]).unwrap(), 1);
        p.var_mut(0).bias = vec![-6.0, -3.0, -6.0];
        let mut rng = RngKey::new(4).rng();
        for _ in 0..2000 {
            let v = sample_visible(&p, &[false], &[0], &mut rng).unwrap();
            let Value::Multicat(a) = &v.values[0] else { panic!() };
            assert!(a.iter().any(|&x| x));
        }
    }

    #[test]
    fn fully_missing_instance_has_zero_gradient() {
        let p = small();
        let g = cd_k(&p, &[Instance::missing(5)], 1, RngKey::new(0), 1).unwrap();
        assert_eq!(g.count, 1);
        assert_eq!(g.grad, p.theta.zeros_like());
    }

    #[test]
    fn cd_is_deterministic_and_worker_independent() {
        let p = small();
        let batch: Vec<Instance> = (0..12)
            .map(|j| {
                Instance::new(vec![
                    Value::Binary(j % 2 == 0),
                    Value::Multicat(vec![j % 3 == 0, true, false]),
                    if j % 4 == 0 { Value::Missing } else { Value::Ranked(vec![1, 2, 2]) },
                    Value::Continuous(j as f64 / 6.0 - 1.0),
                    Value::Ordinal(j % 3),
                ])
            })
            .collect();
        let a = cd_k(&p, &batch, 1, RngKey::new(11), 1).unwrap();
        let b = cd_k(&p, &batch, 1, RngKey::new(11), 1).unwrap();
        let c = cd_k(&p, &batch, 1, RngKey::new(11), 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(cd_k::<Instance>(&p, &[], 1, RngKey::new(0), 1).is_err());
        assert!(cd_k(&p, &batch, 0, RngKey::new(0), 1).is_err());
    }

    /// Wraps an instance and records every value read.
    struct Audited<'a> {
        inner: &'a Instance,
        reads: RefCell<Vec<usize>>,
    }

    impl Observations for Audited<'_> {
        fn num_variables(&self) -> usize {
            self.inner.len()
        }
        fn is_observed(&self, i: usize) -> bool {
            self.inner.is_observed(i)
        }
        fn value(&self, i: usize) -> &Value {
            self.reads.borrow_mut().push(i);
            self.inner.value(i)
        }
    }

    #[test]
    fn cd_never_touches_missing_positions() {
        let p = small();
        let inst =
            Instance::new(vec![Value::Binary(true), Value::Missing, Value::Ranked(vec![2, 1, 3]), Value::Missing, Value::Ordinal(1)]);
        let audited = Audited { inner: &inst, reads: RefCell::new(Vec::new()) };
        for seed in 0..20 {
            let g = cd_instance(&p, &audited, 3, RngKey::new(seed));
            for i in [1, 3] {
                let block = &g.grad.variables[i];
                assert!(block.bias.iter().chain(&block.weights).all(|&x| x == 0.0));
                assert_eq!(block.log_gamma, 0.0);
            }
        }
        assert!(audited.reads.borrow().iter().all(|&i| inst.is_observed(i)));
    }
}
