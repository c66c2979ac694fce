//! Learnable quantities and their persistence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{DatasetSchema, VariableKind, VariableSpec};

/// Width of a variable's parameter block: one row of input bias and
/// interaction weights per encoded dimension.
pub fn unit_dim(spec: &VariableSpec) -> usize {
    match spec.kind {
        VariableKind::Binary | VariableKind::Continuous => 1,
        _ => spec.size(),
    }
}

/// Input bias and interaction weights of one visible variable.
///
/// `bias` holds `U_i` (binary, continuous), `U_im` (categorical,
/// multicategorical, ranked) or `U_id` (ordinal, `D = M`). `weights` is the
/// matching `dim x K` block stored row-major. `log_gamma` is the log of the
/// tie parameter and is only used by ranked variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableParams {
    pub bias: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_gamma: f64,
}

impl VariableParams {
    pub fn zeros(dim: usize, k: usize) -> Self {
        VariableParams { bias: vec![0.0; dim], weights: vec![0.0; dim * k], log_gamma: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    #[inline]
    pub fn weight(&self, d: usize, k: usize, num_hidden: usize) -> f64 {
        self.weights[d * num_hidden + k]
    }
}

/// Shape shared by model parameters and gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub hidden_bias: Vec<f64>,
    pub variables: Vec<VariableParams>,
}

impl Parameters {
    pub fn zeros(schema: &DatasetSchema, num_hidden: usize) -> Self {
        Parameters {
            hidden_bias: vec![0.0; num_hidden],
            variables: schema.variables().iter().map(|v| VariableParams::zeros(unit_dim(v), num_hidden)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Parameters {
            hidden_bias: vec![0.0; self.hidden_bias.len()],
            variables: self
                .variables
                .iter()
                .map(|v| VariableParams { bias: vec![0.0; v.bias.len()], weights: vec![0.0; v.weights.len()], log_gamma: 0.0 })
                .collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Parameters) {
        for (a, b) in self.hidden_bias.iter_mut().zip(&other.hidden_bias) {
            *a += alpha * b;
        }
        for (va, vb) in self.variables.iter_mut().zip(&other.variables) {
            for (a, b) in va.bias.iter_mut().zip(&vb.bias) {
                *a += alpha * b;
            }
            for (a, b) in va.weights.iter_mut().zip(&vb.weights) {
                *a += alpha * b;
            }
            va.log_gamma += alpha * vb.log_gamma;
        }
    }

    /// Calls `f(self_entry, other_entry, is_interaction_weight)` for every
    /// entry pair.
    pub fn zip_apply(&mut self, other: &Parameters, mut f: impl FnMut(&mut f64, f64, bool)) {
        for (a, b) in self.hidden_bias.iter_mut().zip(&other.hidden_bias) {
            f(a, *b, false);
        }
        for (va, vb) in self.variables.iter_mut().zip(&other.variables) {
            for (a, b) in va.bias.iter_mut().zip(&vb.bias) {
                f(a, *b, false);
            }
            for (a, b) in va.weights.iter_mut().zip(&vb.weights) {
                f(a, *b, true);
            }
            f(&mut va.log_gamma, vb.log_gamma, false);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.hidden_bias.iter_mut().for_each(|x| *x *= alpha);
        for v in &mut self.variables {
            v.bias.iter_mut().for_each(|x| *x *= alpha);
            v.weights.iter_mut().for_each(|x| *x *= alpha);
            v.log_gamma *= alpha;
        }
    }

    /// Largest absolute entry over the parameters that exist for `schema`.
    pub fn max_abs(&self, schema: &DatasetSchema) -> f64 {
        ParamId::all(schema, self.hidden_bias.len()).into_iter().map(|id| self.get(id).abs()).fold(0.0, f64::max)
    }

    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::HiddenBias(k) => self.hidden_bias[k],
            ParamId::Bias { var, dim } => self.variables[var].bias[dim],
            ParamId::Weight { var, dim, hidden } => {
                let k = self.hidden_bias.len();
                self.variables[var].weights[dim * k + hidden]
            }
            ParamId::LogGamma(var) => self.variables[var].log_gamma,
        }
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut f64 {
        let k = self.hidden_bias.len();
        match id {
            ParamId::HiddenBias(h) => &mut self.hidden_bias[h],
            ParamId::Bias { var, dim } => &mut self.variables[var].bias[dim],
            ParamId::Weight { var, dim, hidden } => &mut self.variables[var].weights[dim * k + hidden],
            ParamId::LogGamma(var) => &mut self.variables[var].log_gamma,
        }
    }
}

/// Address of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    /// `w_k`
    HiddenBias(usize),
    /// `U_i`, `U_im` or `U_id`
    Bias { var: usize, dim: usize },
    /// `V_ik`, `V_imk` or `V_idk`
    Weight { var: usize, dim: usize, hidden: usize },
    /// `log gamma` of a ranked variable
    LogGamma(usize),
}

/// Parameter families, named after the variable type they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamClass {
    HiddenBias,
    ScalarBias,
    CategoryBias,
    OrdinalBias,
    ScalarWeight,
    CategoryWeight,
    OrdinalWeight,
    LogGamma,
}

impl fmt::Display for ParamClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamClass::HiddenBias => "w_k",
            ParamClass::ScalarBias => "U_i",
            ParamClass::CategoryBias => "U_im",
            ParamClass::OrdinalBias => "U_id",
            ParamClass::ScalarWeight => "V_ik",
            ParamClass::CategoryWeight => "V_imk",
            ParamClass::OrdinalWeight => "V_idk",
            ParamClass::LogGamma => "log_gamma",
        })
    }
}

impl ParamId {
    /// Every parameter of a model with this schema, in a fixed order.
    pub fn all(schema: &DatasetSchema, num_hidden: usize) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = (0..num_hidden).map(ParamId::HiddenBias).collect();
        for (var, spec) in schema.variables().iter().enumerate() {
            let dim = unit_dim(spec);
            ids.extend((0..dim).map(|d| ParamId::Bias { var, dim: d }));
            for d in 0..dim {
                ids.extend((0..num_hidden).map(|hidden| ParamId::Weight { var, dim: d, hidden }));
            }
            if spec.kind == VariableKind::CategoryRanked {
                ids.push(ParamId::LogGamma(var));
            }
        }
        ids
    }

    pub fn class(&self, schema: &DatasetSchema) -> ParamClass {
        let kind = |var: usize| schema.variable(var).kind;
        match *self {
            ParamId::HiddenBias(_) => ParamClass::HiddenBias,
            ParamId::LogGamma(_) => ParamClass::LogGamma,
            ParamId::Bias { var, .. } => match kind(var) {
                VariableKind::Binary | VariableKind::Continuous => ParamClass::ScalarBias,
                VariableKind::Ordinal => ParamClass::OrdinalBias,
                _ => ParamClass::CategoryBias,
            },
            ParamId::Weight { var, .. } => match kind(var) {
                VariableKind::Binary | VariableKind::Continuous => ParamClass::ScalarWeight,
                VariableKind::Ordinal => ParamClass::OrdinalWeight,
                _ => ParamClass::CategoryWeight,
            },
        }
    }

    pub fn variable(&self) -> Option<usize> {
        match *self {
            ParamId::HiddenBias(_) => None,
            ParamId::Bias { var, .. } | ParamId::Weight { var, .. } | ParamId::LogGamma(var) => Some(var),
        }
    }
}

/// All learnable quantities of a mixed-variate RBM with `K` hidden units.
///
/// Gaussian variables have a fixed unit standard deviation
/// ([`crate::model::GAUSSIAN_SIGMA`]); the tie parameter of each ranked
/// variable is stored as `log_gamma` so that it stays positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub schema: DatasetSchema,
    pub theta: Parameters,
}

const MODEL_FORMAT: &str = "mvrbm-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    num_hidden: usize,
    schema: DatasetSchema,
    parameters: Parameters,
}

impl ModelParams {
    pub fn zeros(schema: &DatasetSchema, num_hidden: usize) -> Self {
        ModelParams { schema: schema.clone(), theta: Parameters::zeros(schema, num_hidden) }
    }

    /// Number of hidden units `K`.
    pub fn num_hidden(&self) -> usize {
        self.theta.hidden_bias.len()
    }

    pub fn num_variables(&self) -> usize {
        self.schema.len()
    }

    pub fn var(&self, i: usize) -> &VariableParams {
        &self.theta.variables[i]
    }

    pub fn var_mut(&mut self, i: usize) -> &mut VariableParams {
        &mut self.theta.variables[i]
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.theta.variables[i].log_gamma.exp()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        ParamId::all(&self.schema, self.num_hidden())
    }

    /// Checks shapes against the schema and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        let k = self.num_hidden();
        if self.theta.variables.len() != self.schema.len() {
            return Err(Error::Dimension(format!("{} parameter blocks for {} variables", self.theta.variables.len(), self.schema.len())));
        }
        for (i, (spec, v)) in self.schema.variables().iter().zip(&self.theta.variables).enumerate() {
            let dim = unit_dim(spec);
            if v.bias.len() != dim || v.weights.len() != dim * k {
                return Err(Error::Dimension(format!("variable {i} (`{}`)", spec.name)));
            }
        }
        let finite = self.param_ids().into_iter().all(|id| self.theta.get(id).is_finite());
        if !finite {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Versioned JSON dump of the schema and every parameter array.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            num_hidden: self.num_hidden(),
            schema: self.schema.clone(),
            parameters: self.theta.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unexpected format tag `{}`", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported version {}", file.version)));
        }
        let schema = DatasetSchema::new(file.schema.variables().to_vec())?;
        let params = ModelParams { schema, theta: file.parameters };
        if params.num_hidden() != file.num_hidden {
            return Err(Error::Dimension("hidden bias length disagrees with num_hidden".into()));
        }
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::parse_schema;

    fn schema() -> DatasetSchema {
        parse_schema("a binary\nb ordinal x,y,z\nc rank p,q,r\nd continuous").unwrap()
    }

    #[test]
    fn ids_cover_every_slot_once() {
        let s = schema();
        let p = ModelParams::zeros(&s, 2);
        let ids = p.param_ids();
        // w: 2, a: 1+2, b: 3+6, c: 3+6+1, d: 1+2
        assert_eq!(ids.len(), 27);
        let mut q = p.theta.clone();
        for (j, id) in ids.iter().enumerate() {
            *q.get_mut(*id) = j as f64 + 1.0;
        }
        for (j, id) in ids.iter().enumerate() {
            assert_eq!(q.get(*id), j as f64 + 1.0);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = schema();
        let mut p = ModelParams::zeros(&s, 3);
        for (j, id) in p.param_ids().into_iter().enumerate() {
            *p.theta.get_mut(id) = (j as f64 * 0.734_519).sin() / 3.0 + 1e-17 * j as f64;
        }
        let back = ModelParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        for id in p.param_ids() {
            assert_eq!(back.theta.get(id).to_bits(), p.theta.get(id).to_bits());
        }
    }

    #[test]
    fn rejects_wrong_shapes() {
        let s = schema();
        let mut p = ModelParams::zeros(&s, 2);
        p.theta.variables[1].weights.pop();
        assert!(p.validate().is_err());
        let text = ModelParams::zeros(&s, 2).to_json().unwrap().replace("mvrbm-model", "other");
        assert!(ModelParams::from_json(&text).is_err());
    }
}
