//! Batch commands behind the `mvrbm` binary.
//!
//! Each command reads a schema and a delimited data file, and writes its
//! outputs (model JSON, delimited data, reports). Every random choice
//! (splits, masks, initialization, sampling) derives from `--seed`, so a
//! rerun with the same arguments reproduces the outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mvrbm::baseline::fit_baseline;
use mvrbm::metrics::{evaluate, report_table, EvalReport};
use mvrbm::oracle::{generate_synthetic, random_params, SynthConfig};
use mvrbm::prediction::{complete, extract_features, features_to_csv, predict, reconstruct, CompletionRequest};
use mvrbm::rng::{tag, RngKey};
use mvrbm::training::{train, Objective, TrainConfig, TrainedModel};
use mvrbm::{parse_dataset, parse_schema, Dataset, DatasetSchema, Instance, ModelParams};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] mvrbm::Error),
}

impl CliError {
    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Model(mvrbm::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mvrbm", version, about = "Mixed-variate RBM training, completion and prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and save it.
    Train(TrainCmd),
    /// Mask a fraction of the observed answers, fill them in and score the fill.
    Complete(CompleteCmd),
    /// Split, train on one part and predict a target variable on the other.
    Predict(PredictCmd),
    /// Write posterior features P(h_k = 1 | v) for every instance.
    Features(FeaturesCmd),
    /// Reconstruct every observed entry from its posterior and score it.
    Reconstruct(ReconstructCmd),
    /// Draw a synthetic dataset from a planted model.
    Synth(SynthCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Generative,
    Discriminative,
    Hybrid,
    PretrainFinetune,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Generative => Objective::Generative,
            ObjectiveArg::Discriminative => Objective::Discriminative,
            ObjectiveArg::Hybrid => Objective::Hybrid,
            ObjectiveArg::PretrainFinetune => Objective::PretrainFinetune,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Schema file: one `<name> <kind>[ <cat1>,<cat2>,...]` line per variable.
    #[arg(long)]
    pub schema: PathBuf,
    /// Delimited data file with a header row of variable names.
    #[arg(long)]
    pub data: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Hidden units.
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Epochs of the unsupervised stage of pretrain-finetune (default: --epochs).
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1)]
    pub cd_steps: usize,
    /// Weight of the generative term of the hybrid objective.
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Name of the output variable of discriminative objectives.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub freeze_gamma: bool,
    /// Half-width of the uniform initial interaction weights.
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Activation threshold for multicategorical predictions.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl TrainArgs {
    pub fn config(&self, schema: &DatasetSchema, default_objective: Objective) -> CliResult<TrainConfig> {
        let target = self.target.as_deref().map(|t| target_index(schema, t)).transpose()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::Config("threshold must lie in [0, 1]".into()));
        }
        let cfg = TrainConfig {
            num_hidden: self.hidden,
            epochs: self.epochs,
            pretrain_epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            cd_steps: self.cd_steps,
            lambda: self.lambda,
            seed: self.seed,
            objective: self.objective.map_or(default_objective, Objective::from),
            target,
            freeze_gamma: self.freeze_gamma,
            init_scale: self.init_scale,
            workers: self.workers,
            threshold: self.threshold,
            ..TrainConfig::default()
        };
        cfg.validate(schema)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional training log (one line per epoch).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Fraction of each instance's observed answers to hide.
    #[arg(long, default_value_t = 0.2)]
    pub rho: f64,
    /// Use this model instead of training one on the masked data.
    #[arg(long)]
    pub model_in: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Completed data file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
    /// Add a column for the independent baseline.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Fraction of instances used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long)]
    pub model_in: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Predictions for the test instances, in test order.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturesCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub baseline: bool,
    /// Reconstructed data file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long)]
    pub schema: PathBuf,
    /// Planted model; a random one is drawn when absent.
    #[arg(long)]
    pub params_in: Option<PathBuf>,
    /// Where to save the planted model.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    /// Half-width of the uniform random planted parameters.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Probability of removing each cell.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn delimiter_byte(c: char) -> CliResult<u8> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        Err(CliError::Config(format!("delimiter {c:?} is not ASCII")))
    }
}

pub fn target_index(schema: &DatasetSchema, name: &str) -> CliResult<usize> {
    schema.index_of(name).ok_or_else(|| CliError::Config(format!("unknown target variable '{name}'")))
}

pub fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    let schema = parse_schema(&read(&args.schema)?)?;
    let delim = delimiter_byte(args.delimiter)?;
    Ok(parse_dataset(&read(&args.data)?, &schema, delim)?)
}

fn load_model(path: &Path, schema: &DatasetSchema) -> CliResult<ModelParams> {
    let params = ModelParams::from_json(&read(path)?)?;
    if params.schema != *schema {
        return Err(CliError::Model(mvrbm::Error::Model(format!("{}: model schema differs from the data schema", path.display()))));
    }
    Ok(params)
}

fn save_model(path: &Path, params: &ModelParams) -> CliResult<()> {
    write(path, &params.to_json()?)
}

fn train_or_load(
    data: &Dataset,
    cfg: &TrainConfig,
    model_in: Option<&Path>,
    model_out: Option<&Path>,
    log: Option<&Path>,
) -> CliResult<ModelParams> {
    let params = match model_in {
        Some(p) => load_model(p, &data.schema)?,
        None => {
            let TrainedModel { params, log: records } = train(data, cfg)?;
            if let Some(path) = log {
                write(path, &records.to_csv())?;
            }
            params
        }
    };
    if let Some(path) = model_out {
        save_model(path, &params)?;
    }
    Ok(params)
}

fn table(model: &EvalReport, baseline: Option<&EvalReport>) -> String {
    match baseline {
        Some(b) => report_table(&[("baseline", b), ("model", model)]),
        None => report_table(&[("model", model)]),
    }
}

pub fn cmd_train(cmd: &TrainCmd) -> CliResult<()> {
    let data = load_data(&cmd.data)?;
    let cfg = cmd.train.config(&data.schema, Objective::Generative)?;
    train_or_load(&data, &cfg, None, Some(&cmd.model), cmd.log.as_deref())?;
    Ok(())
}

/// Hides `round(rho * observed)` answers of every instance, chosen by the
/// instance's own stream `seed / MASK / row`.
pub fn mask_answers(data: &Dataset, rho: f64, seed: u64) -> (Vec<Instance>, Vec<Vec<usize>>) {
    use rand::seq::SliceRandom;
    let root = RngKey::new(seed).child(tag::MASK);
    let mut masked = Vec::with_capacity(data.len());
    let mut hidden = Vec::with_capacity(data.len());
    for (row, inst) in data.instances.iter().enumerate() {
        let mut obs: Vec<usize> = inst.observed().collect();
        let k = (rho * obs.len() as f64).round() as usize;
        obs.shuffle(&mut root.child(row as u64).rng());
        let mut chosen = obs[..k].to_vec();
        chosen.sort_unstable();
        masked.push(inst.masked(&chosen));
        hidden.push(chosen);
    }
    (masked, hidden)
}

fn only(inst: &Instance, keep: &[usize]) -> Instance {
    let mut out = Instance::missing(inst.len());
    for &i in keep {
        out.values[i] = inst.values[i].clone();
    }
    out
}

pub fn cmd_complete(cmd: &CompleteCmd) -> CliResult<()> {
    if !(0.0..1.0).contains(&cmd.rho) {
        return Err(CliError::Config("rho must lie in [0, 1)".into()));
    }
    let data = load_data(&cmd.data)?;
    let cfg = cmd.train.config(&data.schema, Objective::Generative)?;
    let (masked, hidden) = mask_answers(&data, cmd.rho, cfg.seed);
    let observed = data.with_instances(masked);
    let params = train_or_load(&observed, &cfg, cmd.model_in.as_deref(), cmd.model_out.as_deref(), cmd.log.as_deref())?;

    let mut completed = Vec::with_capacity(data.len());
    let mut truth = Vec::with_capacity(data.len());
    let mut filled = Vec::with_capacity(data.len());
    let mut base_filled = Vec::new();
    let base = cmd.baseline.then(|| fit_baseline(&observed));
    for ((orig, inst), targets) in data.instances.iter().zip(&observed.instances).zip(&hidden) {
        let req = CompletionRequest { instance: inst.clone(), targets: Some(targets.clone()) };
        let done = complete(&params, &req, cfg.threshold)?;
        truth.push(only(orig, targets));
        filled.push(only(&done, targets));
        if let Some(b) = &base {
            base_filled.push(only(&b.complete(inst, targets, cfg.threshold), targets));
        }
        completed.push(done);
    }
    let model_report = evaluate(&data.schema, &truth, &filled)?;
    let base_report = base.as_ref().map(|_| evaluate(&data.schema, &truth, &base_filled)).transpose()?;
    write(&cmd.report, &table(&model_report, base_report.as_ref()))?;
    if let Some(path) = &cmd.out {
        write(path, &data.with_instances(completed).to_delimited(delimiter_byte(cmd.data.delimiter)?)?)?;
    }
    Ok(())
}

/// Seeded permutation split; the first `round(split * n)` rows train.
pub fn split_rows(n: usize, split: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut RngKey::new(seed).child(tag::SPLIT).rng());
    let cut = ((split * n as f64).round() as usize).min(n);
    let test = rows.split_off(cut);
    (rows, test)
}

pub fn cmd_predict(cmd: &PredictCmd) -> CliResult<()> {
    if !(cmd.split > 0.0 && cmd.split < 1.0) {
        return Err(CliError::Config("split must lie in (0, 1)".into()));
    }
    let data = load_data(&cmd.data)?;
    let cfg = cmd.train.config(&data.schema, Objective::Discriminative)?;
    let target = cfg.target.ok_or_else(|| CliError::Config("predict needs --target".into()))?;
    let (train_rows, test_rows) = split_rows(data.len(), cmd.split, cfg.seed);
    let train_set = data.subset(&train_rows);
    let test_set = data.subset(&test_rows);
    let params = train_or_load(&train_set, &cfg, cmd.model_in.as_deref(), cmd.model_out.as_deref(), cmd.log.as_deref())?;

    let base = cmd.baseline.then(|| fit_baseline(&train_set));
    let mut truth = Vec::new();
    let mut preds = Vec::new();
    let mut base_preds = Vec::new();
    for inst in &test_set.instances {
        let inputs = inst.masked(&[target]);
        let mut p = Instance::missing(inst.len());
        p.values[target] = predict(&params, target, &inputs, cfg.threshold)?;
        preds.push(p);
        truth.push(only(inst, &[target]));
        if let Some(b) = &base {
            let mut q = Instance::missing(inst.len());
            q.values[target] = b.predict(target, cfg.threshold);
            base_preds.push(q);
        }
    }
    let model_report = evaluate(&data.schema, &truth, &preds)?;
    let base_report = base.as_ref().map(|_| evaluate(&data.schema, &truth, &base_preds)).transpose()?;
    write(&cmd.report, &table(&model_report, base_report.as_ref()))?;
    if let Some(path) = &cmd.out {
        let spec = data.schema.variable(target);
        let mut text = format!("row,{}\n", spec.name);
        for (row, p) in test_rows.iter().zip(&preds) {
            let cell = mvrbm::dataset::format_cell(spec, &p.values[target], data.standardization[target]);
            text.push_str(&format!("{},{}\n", row + 1, quote(&cell)));
        }
        write(path, &text)?;
    }
    Ok(())
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn cmd_features(cmd: &FeaturesCmd) -> CliResult<()> {
    let data = load_data(&cmd.data)?;
    let params = load_model(&cmd.model, &data.schema)?;
    let rows: Vec<Vec<f64>> = data.instances.iter().map(|x| extract_features(&params, x)).collect();
    write(&cmd.out, &features_to_csv(&rows, params.num_hidden()))
}

pub fn cmd_reconstruct(cmd: &ReconstructCmd) -> CliResult<()> {
    let data = load_data(&cmd.data)?;
    let params = load_model(&cmd.model, &data.schema)?;
    let rec = data.instances.iter().map(|x| reconstruct(&params, x)).collect::<mvrbm::Result<Vec<_>>>()?;
    let model_report = evaluate(&data.schema, &data.instances, &rec)?;
    let base_report = if cmd.baseline {
        let b = fit_baseline(&data);
        let preds: Vec<Instance> = data
            .instances
            .iter()
            .map(|x| {
                let obs: Vec<usize> = x.observed().collect();
                only(&b.complete(x, &obs, mvrbm::prediction::DEFAULT_THRESHOLD), &obs)
            })
            .collect();
        Some(evaluate(&data.schema, &data.instances, &preds)?)
    } else {
        None
    };
    write(&cmd.report, &table(&model_report, base_report.as_ref()))?;
    if let Some(path) = &cmd.out {
        write(path, &data.with_instances(rec).to_delimited(delimiter_byte(cmd.data.delimiter)?)?)?;
    }
    Ok(())
}

pub fn cmd_synth(cmd: &SynthCmd) -> CliResult<()> {
    let schema = parse_schema(&read(&cmd.schema)?)?;
    if !(0.0..1.0).contains(&cmd.rho) {
        return Err(CliError::Config("rho must lie in [0, 1)".into()));
    }
    let params = match &cmd.params_in {
        Some(p) => load_model(p, &schema)?,
        None => {
            if cmd.hidden == 0 {
                return Err(CliError::Config("number of hidden units must be at least 1".into()));
            }
            random_params(&schema, cmd.hidden, cmd.scale, cmd.seed)
        }
    };
    let cfg = SynthConfig { burn_in: cmd.burn_in, thin: cmd.thin, chains: cmd.chains, missing_rate: cmd.rho };
    let data = generate_synthetic(&params, cmd.n, cmd.seed, &cfg)?;
    write(&cmd.out, &data.to_delimited(delimiter_byte(cmd.delimiter)?)?)?;
    if let Some(path) = &cmd.params_out {
        save_model(path, &params)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Complete(c) => cmd_complete(c),
        Command::Predict(c) => cmd_predict(c),
        Command::Features(c) => cmd_features(c),
        Command::Reconstruct(c) => cmd_reconstruct(c),
        Command::Synth(c) => cmd_synth(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_seeded_partition() {
        let (a, b) = split_rows(10, 0.8, 3);
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_rows(10, 0.8, 3), (a, b));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Model(mvrbm::Error::Config("x".into())).exit_code(), 2);
        assert_eq!(CliError::Model(mvrbm::Error::Empty("dataset")).exit_code(), 1);
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a|b"), "a|b");
        assert_eq!(quote("a,b"), "\"a,b\"");
    }
}
