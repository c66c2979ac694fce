//! Mixed-variate restricted Boltzmann machines.
//!
//! One binary hidden layer models the joint distribution of binary,
//! categorical, multicategorical, continuous (Gaussian), ordinal and
//! category-ranked variables. The crate covers ingestion of typed tabular
//! data, generative, discriminative and hybrid training, data completion,
//! prediction, posterior feature extraction and the evaluation metrics used
//! to compare against an independent per-variable baseline.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod params;
pub mod prediction;
pub mod rng;
pub mod sampling;
pub mod schema;
pub mod training;
pub mod value;

pub use baseline::{fit_baseline, BaselineModel};
pub use dataset::{parse_dataset, Dataset, Instance, Observations, Standardization};
pub use error::{Error, Result};
pub use metrics::{evaluate, rank_disagreement, EvalReport};
pub use model::{PairwiseTable, PredictiveDistribution, UnitState};
pub use params::{ModelParams, ParamClass, ParamId, Parameters};
pub use prediction::{
    complete, extract_features, mean_field_predict, predict, predictive_distribution, reconstruct, CompletionRequest, MeanFieldState,
};
pub use rng::RngKey;
pub use sampling::{GibbsState, GradientAccumulator};
pub use schema::{enumerate_values, parse_schema, ContinuousGrid, DatasetSchema, VariableKind, VariableSpec};
pub use training::{init_params, train, Objective, TrainConfig, TrainedModel, TrainingLog};
pub use value::{count_rank_assignments, PairOutcome, Value};
