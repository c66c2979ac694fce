use mvrbm::oracle::{generate_synthetic, random_params, SynthConfig};
use mvrbm::prediction::conditional_log_likelihood;
use mvrbm::training::discriminative_gradient;
use mvrbm::{DatasetSchema, Instance, ModelParams, VariableKind, VariableSpec};

fn schema() -> DatasetSchema {
    DatasetSchema::new(vec![
        VariableSpec::binary("b"),
        VariableSpec::with_size("c", VariableKind::Categorical, 3),
        VariableSpec::with_size("m", VariableKind::Multicategorical, 3),
        VariableSpec::continuous("z"),
        VariableSpec::with_size("o", VariableKind::Ordinal, 4),
        VariableSpec::with_size("r", VariableKind::CategoryRanked, 3),
    ])
    .unwrap()
}

fn mean_cll(params: &ModelParams, data: &[Instance], t: usize) -> f64 {
    let ll: Vec<f64> = data.iter().filter_map(|x| conditional_log_likelihood(params, t, x).unwrap()).collect();
    ll.iter().sum::<f64>() / ll.len() as f64
}

#[test]
fn matches_finite_differences_for_every_target_type() {
    let schema = schema();
    let planted = random_params(&schema, 3, 1.0, 1);
    let data = generate_synthetic(&planted, 25, 2, &SynthConfig { missing_rate: 0.15, ..Default::default() }).unwrap();
    let params = random_params(&schema, 3, 0.7, 3);
    let refs: Vec<&Instance> = data.instances.iter().collect();
    let step = 1e-5;
    for t in 0..schema.len() {
        let g = discriminative_gradient(&params, &refs, t).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for id in params.param_ids() {
            let mut up = params.clone();
            *up.theta.get_mut(id) += step;
            let mut down = params.clone();
            *down.theta.get_mut(id) -= step;
            let fd = (mean_cll(&up, &data.instances, t) - mean_cll(&down, &data.instances, t)) / (2.0 * step);
            num += (g.get(id) - fd).powi(2);
            den += fd * fd;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-6, "target {} ({}): relative error {rel:e}", t, schema.variable(t).kind);
    }
}
