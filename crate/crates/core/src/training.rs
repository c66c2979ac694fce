//! Parameter estimation: generative (contrastive divergence),
//! discriminative (exact conditional likelihood of one target), hybrid and
//! two-stage pretrain/fine-tune training.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dataset::{Dataset, Instance, Observations};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model::softplus;
use crate::params::{ModelParams, Parameters};
use crate::prediction::{add_conditional_gradient, conditional_log_likelihood, reconstruct, target_factors};
use crate::rng::{tag, RngKey};
use crate::sampling::{cd_k, GradientAccumulator};
use crate::schema::{DatasetSchema, VariableKind};
use crate::value::PairOutcome;
use crate::value::{pairs, ranks_to_pairs, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Generative,
    Discriminative,
    Hybrid,
    PretrainFinetune,
}

impl Objective {
    pub fn keyword(self) -> &'static str {
        match self {
            Objective::Generative => "generative",
            Objective::Discriminative => "discriminative",
            Objective::Hybrid => "hybrid",
            Objective::PretrainFinetune => "pretrain-finetune",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        [Objective::Generative, Objective::Discriminative, Objective::Hybrid, Objective::PretrainFinetune]
            .into_iter()
            .find(|o| o.keyword() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_hidden: usize,
    pub epochs: usize,
    /// Epochs of the unsupervised stage of pretrain/fine-tune; defaults to
    /// `epochs`.
    pub pretrain_epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty on interaction weights.
    pub weight_decay: f64,
    pub cd_steps: usize,
    /// Weight of the generative term of the hybrid objective.
    pub lambda: f64,
    pub seed: u64,
    pub objective: Objective,
    pub target: Option<usize>,
    pub freeze_gamma: bool,
    pub init_scale: f64,
    pub workers: usize,
    /// Largest number of target outcomes enumerated per instance.
    pub target_budget: usize,
    /// Multicategorical decoding threshold used for the training log.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_hidden: 10,
            epochs: 20,
            pretrain_epochs: None,
            batch_size: 100,
            learning_rate: 0.05,
            momentum: 0.5,
            weight_decay: 1e-4,
            cd_steps: 1,
            lambda: 0.5,
            seed: 0,
            objective: Objective::Generative,
            target: None,
            freeze_gamma: false,
            init_scale: 0.01,
            workers: 1,
            target_budget: 1_000_000,
            threshold: 0.5,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl TrainConfig {
    pub fn validate(&self, schema: &DatasetSchema) -> Result<()> {
        if self.num_hidden == 0 {
            return Err(config_error("number of hidden units must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_error("batch size must be at least 1"));
        }
        if self.cd_steps == 0 {
            return Err(config_error("CD steps must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(config_error("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(config_error("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(config_error("weight decay must be finite and non-negative"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(config_error("init scale must be finite and non-negative"));
        }
        if self.workers == 0 {
            return Err(config_error("workers must be at least 1"));
        }
        if self.objective == Objective::Hybrid && !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(config_error("hybrid weight lambda must lie in (0, 1)"));
        }
        if self.objective != Objective::Generative {
            let t = self.target.ok_or_else(|| config_error(format!("objective '{}' needs a target variable", self.objective.keyword())))?;
            if t >= schema.len() {
                return Err(config_error(format!("target index {t} out of range")));
            }
            if schema.variable(t).kind != VariableKind::Continuous {
                let probe = ModelParams::zeros(schema, 1);
                let size: usize = target_factors(&probe, t)?.iter().map(Vec::len).sum();
                if size > self.target_budget {
                    return Err(config_error(format!(
                        "target '{}' has {size} outcomes, above the budget of {}",
                        schema.variable(t).name,
                        self.target_budget
                    )));
                }
            }
        }
        Ok(())
    }
}

const RATE_CLAMP: f64 = 1e-3;

fn logit(p: f64) -> f64 {
    let p = p.clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
    (p / (1.0 - p)).ln()
}

/// Independent-model input biases of variable `i` fitted to the observed
/// entries of `data`; zero when nothing is observed.
fn independent_bias(schema: &DatasetSchema, i: usize, data: &Dataset) -> Vec<f64> {
    let spec = schema.variable(i);
    let m = spec.size();
    let cells: Vec<&Value> = data.instances.iter().map(|x| &x.values[i]).filter(|v| !v.is_missing()).collect();
    let n = cells.len() as f64;
    let dim = crate::params::unit_dim(spec);
    if cells.is_empty() {
        return vec![0.0; dim];
    }
    match spec.kind {
        VariableKind::Binary => {
            let ones = cells.iter().filter(|v| ***v == Value::Binary(true)).count() as f64;
            vec![logit(ones / n)]
        }
        VariableKind::Continuous => {
            vec![cells.iter().map(|v| if let Value::Continuous(x) = v { *x } else { 0.0 }).sum::<f64>() / n]
        }
        VariableKind::Categorical => {
            let mut c = vec![0.0; m];
            for v in &cells {
                if let Value::Categorical(j) = v {
                    c[*j] += 1.0;
                }
            }
            c.into_iter().map(|x| (x / n).max(RATE_CLAMP).ln()).collect()
        }
        VariableKind::Multicategorical => {
            let mut c = vec![0.0; m];
            for v in &cells {
                if let Value::Multicat(a) = v {
                    for (x, on) in c.iter_mut().zip(a) {
                        *x += *on as u8 as f64;
                    }
                }
            }
            c.into_iter().map(|x| logit(x / n)).collect()
        }
        VariableKind::Ordinal => {
            // Without hidden units only sum_d U_d matters: P(m) ∝ exp(beta m).
            let mean = cells.iter().map(|v| if let Value::Ordinal(j) = v { *j as f64 } else { 0.0 }).sum::<f64>() / n;
            let mut beta = 0.0f64;
            for _ in 0..100 {
                let p = crate::model::softmax(&(0..m).map(|j| beta * j as f64).collect::<Vec<_>>());
                let e: f64 = p.iter().enumerate().map(|(j, q)| q * j as f64).sum();
                let var: f64 = p.iter().enumerate().map(|(j, q)| q * (j as f64 - e).powi(2)).sum();
                if var < 1e-12 {
                    break;
                }
                let next = (beta + (mean - e) / var).clamp(-20.0, 20.0);
                if (next - beta).abs() < 1e-12 {
                    beta = next;
                    break;
                }
                beta = next;
            }
            vec![beta * (m as f64 - 1.0) / m as f64; m]
        }
        VariableKind::CategoryRanked => {
            // Davidson fit of the category strengths with gamma = 1.
            let mut counts = vec![[0.0f64; 3]; crate::value::pair_count(m)];
            for v in &cells {
                if let Value::Ranked(r) = v {
                    for (slot, o) in counts.iter_mut().zip(ranks_to_pairs(r)) {
                        slot[crate::model::outcome_slot(o)] += 1.0 / n;
                    }
                }
            }
            let mut u = vec![0.0; m];
            let step = m as f64;
            for _ in 0..500 {
                let mut g = vec![0.0; m];
                for ((l, r), c) in pairs(m).zip(&counts) {
                    let p = crate::model::davidson(u[l] / m as f64, u[r] / m as f64, 0.0);
                    let total: f64 = c.iter().sum();
                    for (slot, o) in PairOutcome::ALL.iter().enumerate() {
                        let coef = c[slot] - total * p[slot];
                        for (d, f) in crate::model::pair_features(l, r, m, *o).feats {
                            g[d] += coef * f;
                        }
                    }
                }
                for (x, gx) in u.iter_mut().zip(&g) {
                    *x += step * m as f64 * gx;
                }
            }
            let mean = u.iter().sum::<f64>() / m as f64;
            u.iter().map(|x| (x - mean).clamp(-50.0, 50.0)).collect()
        }
    }
}

/// Initial parameters: interaction weights uniform on
/// `[-init_scale, init_scale]`, `w = 0`, `gamma = 1`, and input biases at
/// the independent-model fit of `data` when given (zero otherwise).
pub fn init_params(schema: &DatasetSchema, num_hidden: usize, init_scale: f64, seed: u64, data: Option<&Dataset>) -> Result<ModelParams> {
    if num_hidden == 0 {
        return Err(config_error("number of hidden units must be at least 1"));
    }
    let mut p = ModelParams::zeros(schema, num_hidden);
    let mut rng = RngKey::new(seed).child(tag::INIT).rng();
    for block in &mut p.theta.variables {
        for w in &mut block.weights {
            *w = if init_scale > 0.0 { rng.random_range(-init_scale..=init_scale) } else { 0.0 };
        }
    }
    if let Some(d) = data {
        if d.schema != *schema {
            return Err(Error::Model("dataset schema differs from the model schema".into()));
        }
        for i in 0..schema.len() {
            p.var_mut(i).bias = independent_bias(schema, i, d);
        }
    }
    Ok(p)
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    /// Reconstruction error per type on the training data.
    pub reconstruction: [Option<f64>; 6],
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "epoch,objective,binary,categorical,multicat,continuous,ordinal,rank,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{}", r.epoch, r.objective);
            for e in &r.reconstruction {
                match e {
                    Some(x) => {
                        let _ = write!(out, ",{x}");
                    }
                    None => out.push_str(",NA"),
                }
            }
            let _ = writeln!(out, ",{}", r.wall_ms);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub log: TrainingLog,
}

/// SGD with momentum and L2 decay on the interaction weights.
#[derive(Debug, Clone)]
pub struct Optimizer {
    velocity: Parameters,
    learning_rate: f64,
    momentum: f64,
    weight_decay: f64,
    freeze_gamma: bool,
}

impl Optimizer {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        Optimizer {
            velocity: params.theta.zeros_like(),
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            freeze_gamma: cfg.freeze_gamma,
        }
    }

    /// Ascent step along `grad` (a mean gradient of the objective).
    pub fn step(&mut self, params: &mut Parameters, grad: &Parameters) {
        let mut g = grad.clone();
        let decay = self.weight_decay;
        g.zip_apply(params, |gi, w, is_weight| {
            if is_weight {
                *gi -= decay * w;
            }
        });
        if self.freeze_gamma {
            g.variables.iter_mut().for_each(|v| v.log_gamma = 0.0);
        }
        let (mu, lr) = (self.momentum, self.learning_rate);
        self.velocity.zip_apply(&g, |v, gi, _| *v = mu * *v + lr * gi);
        // Zero steps are skipped so a zero learning rate leaves every bit alone.
        params.zip_apply(&self.velocity, |p, v, _| {
            if v != 0.0 {
                *p += v;
            }
        });
    }
}

/// Negative free energy `log sum_h exp(-E(v_o, h))` of the observed part.
pub fn negative_free_energy<O: Observations + ?Sized>(params: &ModelParams, v: &O) -> f64 {
    let enc = params.encode_observed(v);
    let g: f64 = enc.iter().map(|(i, e)| params.g_encoded(*i, e)).sum();
    g + params.hidden_input(enc.iter().map(|(i, e)| (*i, e))).into_iter().map(softplus).sum::<f64>()
}

fn mean_cll(params: &ModelParams, data: &Dataset, target: usize) -> Result<f64> {
    let mut s = 0.0;
    let mut n = 0usize;
    for inst in &data.instances {
        if let Some(ll) = conditional_log_likelihood(params, target, inst)? {
            s += ll;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { s / n as f64 })
}

fn mean_free(params: &ModelParams, data: &Dataset, skip: Option<usize>) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let total: f64 = data
        .instances
        .iter()
        .map(|x| match skip {
            Some(t) => negative_free_energy(params, &x.masked(&[t])),
            None => negative_free_energy(params, x),
        })
        .sum();
    total / data.len() as f64
}

/// Objective estimate logged per epoch: the mean negative free energy
/// (unnormalized) for generative training, the mean conditional
/// log-likelihood of the target for discriminative training, and their
/// `lambda` mix for hybrid training.
pub fn objective_estimate(params: &ModelParams, data: &Dataset, objective: Objective, cfg: &TrainConfig) -> Result<f64> {
    Ok(match (objective, cfg.target) {
        (Objective::Generative, _) => mean_free(params, data, None),
        (Objective::Hybrid, Some(t)) => cfg.lambda * mean_free(params, data, Some(t)) + (1.0 - cfg.lambda) * mean_cll(params, data, t)?,
        (_, Some(t)) => mean_cll(params, data, t)?,
        (_, None) => return Err(config_error("objective needs a target variable")),
    })
}

fn reconstruction_errors(params: &ModelParams, data: &Dataset) -> Result<[Option<f64>; 6]> {
    let rec = data.instances.iter().map(|x| reconstruct(params, x)).collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&data.schema, &data.instances, &rec)?.errors)
}

/// Runs `epochs` of shuffled mini-batch ascent from `init` with the mean
/// batch gradient supplied by `grad`. The batch of epoch `e`, index `b`
/// receives the stream `seed / CD / e / b`.
pub fn optimize<G>(
    init: ModelParams,
    data: &Dataset,
    cfg: &TrainConfig,
    objective: Objective,
    epochs: usize,
    mut grad: G,
) -> Result<TrainedModel>
where
    G: FnMut(&ModelParams, &[&Instance], RngKey) -> Result<Parameters>,
{
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let root = RngKey::new(cfg.seed);
    let mut params = init;
    let mut opt = Optimizer::new(&params, cfg);
    let mut log = TrainingLog::default();
    let start = Instant::now();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..epochs {
        order.sort_unstable();
        order.shuffle(&mut root.path(&[tag::SHUFFLE, epoch as u64]).rng());
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Instance> = chunk.iter().map(|&r| &data.instances[r]).collect();
            let g = grad(&params, &batch, root.path(&[tag::CD, epoch as u64, b as u64]))?;
            opt.step(&mut params.theta, &g);
        }
        log.records.push(EpochRecord {
            epoch: epoch + 1,
            objective: objective_estimate(&params, data, objective, cfg)?,
            reconstruction: reconstruction_errors(&params, data)?,
            wall_ms: start.elapsed().as_millis(),
        });
    }
    Ok(TrainedModel { params, log })
}

/// Mean CD-k gradient of a batch.
pub fn generative_gradient(params: &ModelParams, batch: &[&Instance], cfg: &TrainConfig, key: RngKey) -> Result<Parameters> {
    Ok(cd_k(params, batch, cfg.cd_steps, key, cfg.workers)?.mean())
}

/// Mean gradient of `log P(v_t | v_rest)` over the batch instances that
/// observe the target `t`; zero when none does.
pub fn discriminative_gradient(params: &ModelParams, batch: &[&Instance], target: usize) -> Result<Parameters> {
    let mut acc = GradientAccumulator::new(params);
    for inst in batch {
        add_conditional_gradient(params, target, inst, 1.0, &mut acc)?;
    }
    Ok(acc.mean())
}

/// `lambda * g_gen(inputs only) + (1 - lambda) * g_disc`.
pub fn hybrid_gradient(params: &ModelParams, batch: &[&Instance], cfg: &TrainConfig, target: usize, key: RngKey) -> Result<Parameters> {
    let inputs: Vec<Instance> = batch.iter().map(|x| x.masked(&[target])).collect();
    let inputs: Vec<&Instance> = inputs.iter().collect();
    let mut g = generative_gradient(params, &inputs, cfg, key)?;
    g.scale(cfg.lambda);
    g.add_scaled(1.0 - cfg.lambda, &discriminative_gradient(params, batch, target)?);
    Ok(g)
}

fn initial(data: &Dataset, cfg: &TrainConfig) -> Result<ModelParams> {
    init_params(&data.schema, cfg.num_hidden, cfg.init_scale, cfg.seed, Some(data))
}

fn target_of(cfg: &TrainConfig) -> Result<usize> {
    cfg.target.ok_or_else(|| config_error("a target variable is required"))
}

pub fn train_generative(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate(&data.schema)?;
    let init = initial(data, cfg)?;
    optimize(init, data, cfg, Objective::Generative, cfg.epochs, |p, b, k| generative_gradient(p, b, cfg, k))
}

pub fn train_discriminative(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let cfg = TrainConfig { objective: Objective::Discriminative, ..cfg.clone() };
    cfg.validate(&data.schema)?;
    let init = initial(data, &cfg)?;
    discriminative_from(init, data, &cfg, cfg.epochs)
}

fn discriminative_from(init: ModelParams, data: &Dataset, cfg: &TrainConfig, epochs: usize) -> Result<TrainedModel> {
    let t = target_of(cfg)?;
    optimize(init, data, cfg, Objective::Discriminative, epochs, |p, b, _| discriminative_gradient(p, b, t))
}

pub fn train_hybrid(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    let cfg = TrainConfig { objective: Objective::Hybrid, ..cfg.clone() };
    cfg.validate(&data.schema)?;
    let t = target_of(&cfg)?;
    let init = initial(data, &cfg)?;
    optimize(init, data, &cfg, Objective::Hybrid, cfg.epochs, |p, b, k| hybrid_gradient(p, b, &cfg, t, k))
}

/// Stage 1: generative training with the target hidden everywhere. Stage
/// 2: discriminative training from the stage-1 parameters, with the
/// target's own block reset to its initial value. Returns both stages.
pub fn pretrain_finetune(data: &Dataset, cfg: &TrainConfig) -> Result<(TrainedModel, TrainedModel)> {
    let cfg = TrainConfig { objective: Objective::PretrainFinetune, ..cfg.clone() };
    cfg.validate(&data.schema)?;
    let t = target_of(&cfg)?;
    let inputs = data.without_variable(t);
    let stage1_cfg = TrainConfig { objective: Objective::Generative, target: None, ..cfg.clone() };
    let stage1 = {
        let init = initial(&inputs, &stage1_cfg)?;
        let epochs = cfg.pretrain_epochs.unwrap_or(cfg.epochs);
        optimize(init, &inputs, &stage1_cfg, Objective::Generative, epochs, |p, b, k| generative_gradient(p, b, &stage1_cfg, k))?
    };
    let mut start = stage1.params.clone();
    start.theta.variables[t] = initial(data, &cfg)?.theta.variables[t].clone();
    let stage2 = discriminative_from(start, data, &cfg, cfg.epochs)?;
    Ok((stage1, stage2))
}

/// Dispatches on `cfg.objective`.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    match cfg.objective {
        Objective::Generative => train_generative(data, cfg),
        Objective::Discriminative => train_discriminative(data, cfg),
        Objective::Hybrid => train_hybrid(data, cfg),
        Objective::PretrainFinetune => pretrain_finetune(data, cfg).map(|(_, m)| m),
    }
}

/// `P(h_k = 1 | v)` averaged over a dataset; handy for diagnostics.
pub fn mean_activation(params: &ModelParams, data: &Dataset) -> Vec<f64> {
    let mut acc = vec![0.0; params.num_hidden()];
    for x in &data.instances {
        for (a, p) in acc.iter_mut().zip(params.hidden_posterior(x)) {
            *a += p;
        }
    }
    let n = data.len().max(1) as f64;
    acc.iter().map(|a| a / n).collect()
}
