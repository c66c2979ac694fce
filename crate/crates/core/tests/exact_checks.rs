use mvrbm::oracle::{
    exact_joint, exact_loglik_gradient, exact_target_joint, generate_synthetic, random_params, EnumerationBudget, SynthConfig,
};
use mvrbm::prediction::mean_field_one_shot;
use mvrbm::{
    fit_baseline, init_params, mean_field_predict, predict, predictive_distribution, ContinuousGrid, Dataset, DatasetSchema, Instance,
    MeanFieldState, ModelParams, PredictiveDistribution, Value, VariableKind, VariableSpec,
};

fn small_schema() -> DatasetSchema {
    DatasetSchema::new(vec![
        VariableSpec::binary("b"),
        VariableSpec::with_size("c", VariableKind::Categorical, 4),
        VariableSpec::with_size("o", VariableKind::Ordinal, 3),
        VariableSpec::binary("x"),
    ])
    .unwrap()
}

fn state_probs(q: &PredictiveDistribution) -> Vec<f64> {
    match q {
        PredictiveDistribution::Bernoulli(p) => vec![1.0 - p, *p],
        PredictiveDistribution::Categorical(p) | PredictiveDistribution::Ordinal(p) => p.clone(),
        other => panic!("not enumerable here: {other:?}"),
    }
}

/// `KL(Q(v_i) prod_k Q(h_k) || P(v_i, h | v_o))`.
fn joint_kl(params: &ModelParams, i: usize, inst: &Instance, mf: &MeanFieldState) -> f64 {
    let (_, joint) = exact_target_joint(params, i, inst, &Default::default());
    let qv = state_probs(&mf.q_v);
    let kk = params.num_hidden();
    let mut kl = 0.0;
    for (s, row) in joint.iter().enumerate() {
        for (bits, p) in row.iter().enumerate() {
            let qh: f64 = (0..kk).map(|k| if bits >> k & 1 == 1 { mf.q_h[k] } else { 1.0 - mf.q_h[k] }).product();
            let q = qv[s] * qh;
            if q > 0.0 {
                kl += q * (q.ln() - p.ln());
            }
        }
    }
    kl
}

#[test]
fn mean_field_recursion_never_worsens_the_one_shot_fit() {
    let schema = small_schema();
    for seed in 0..20 {
        let params = random_params(&schema, 3, 1.5, seed);
        let inst = generate_synthetic(&params, 1, seed, &SynthConfig { burn_in: 20, ..Default::default() }).unwrap().instances[0].clone();
        for t in 0..3 {
            let one = mean_field_one_shot(&params, t, &inst).unwrap();
            let full = mean_field_predict(&params, t, &inst, 200, 1e-12).unwrap();
            let (a, b) = (joint_kl(&params, t, &inst, &full), joint_kl(&params, t, &inst, &one));
            assert!(a <= b + 1e-9, "seed {seed}, target {t}: {a} > {b}");
        }
    }
}

#[test]
fn synthetic_marginals_match_enumeration() {
    let schema = small_schema();
    let params = random_params(&schema, 3, 1.0, 11);
    let table = exact_joint(&params, &EnumerationBudget::default()).unwrap();
    // 100000 draws keep the test quick; the sampling error is ~0.003.
    let n = 100_000;
    let data = generate_synthetic(&params, n, 4, &SynthConfig { burn_in: 1000, thin: 4, chains: 4, missing_rate: 0.0 }).unwrap();
    for i in 0..schema.len() {
        let exact = table.marginal_unit(i);
        let mut freq = vec![0.0; exact.len()];
        for x in &data.instances {
            let s = match x.values[i] {
                Value::Binary(b) => b as usize,
                Value::Categorical(c) | Value::Ordinal(c) => c,
                ref v => panic!("{v:?}"),
            };
            freq[s] += 1.0 / n as f64;
        }
        let tv = 0.5 * exact.iter().zip(&freq).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.02, "variable {i}: TV {tv}");
    }
}

fn saturated_data() -> Dataset {
    let schema = DatasetSchema::new(vec![
        VariableSpec::binary("b"),
        VariableSpec::with_size("c", VariableKind::Categorical, 3),
        VariableSpec::with_size("m", VariableKind::Multicategorical, 3),
        VariableSpec::with_size("o", VariableKind::Ordinal, 4),
        VariableSpec::continuous("z"),
    ])
    .unwrap();
    let rows = [
        (true, 0, [true, false, false], 0, -0.8),
        (false, 1, [true, true, false], 3, 0.3),
        (true, 2, [false, false, true], 1, 1.1),
        (true, 1, [true, false, true], 2, -0.2),
        (false, 1, [false, true, false], 1, 0.6),
    ];
    let instances = rows
        .iter()
        .map(|(b, c, m, o, z)| {
            Instance::new(vec![
                Value::Binary(*b),
                Value::Categorical(*c),
                Value::Multicat(m.to_vec()),
                Value::Ordinal(*o),
                Value::Continuous(*z),
            ])
        })
        .collect();
    Dataset::new(schema, instances).unwrap()
}

#[test]
fn gradient_vanishes_at_the_independent_fit() {
    // With no interactions the independent per-variable fit is the maximum
    // likelihood solution, so the exact gradient vanishes there.
    let data = saturated_data();
    let params = init_params(&data.schema, 2, 0.0, 0, Some(&data)).unwrap();
    // The Gaussian needs a fine, wide grid for its grid mean to equal U.
    let budget = EnumerationBudget { grid: ContinuousGrid { lo: -12.0, hi: 12.0, points: 481 }, ..Default::default() };
    let g = exact_loglik_gradient(&params, &data, &budget).unwrap().mean();
    let worst = g.max_abs(&data.schema);
    assert!(worst < 1e-6, "max |grad| = {worst:e}");
}

#[test]
fn symmetric_data_gives_zero_weight_gradient_at_zero() {
    let schema = DatasetSchema::new(vec![VariableSpec::binary("b"), VariableSpec::with_size("c", VariableKind::Categorical, 3)]).unwrap();
    let mut rows = Vec::new();
    for b in [false, true] {
        for c in 0..3 {
            rows.push(Instance::new(vec![Value::Binary(b), Value::Categorical(c)]));
        }
    }
    let data = Dataset::new(schema.clone(), rows).unwrap();
    let params = ModelParams::zeros(&schema, 3);
    let g = exact_loglik_gradient(&params, &data, &EnumerationBudget::default()).unwrap().mean();
    for v in &g.variables {
        assert!(v.weights.iter().all(|w| w.abs() < 1e-12), "{:?}", v.weights);
    }
}

#[test]
fn baseline_agrees_with_an_interaction_free_model() {
    let data = saturated_data();
    let base = fit_baseline(&data);
    let params = init_params(&data.schema, 2, 0.0, 0, Some(&data)).unwrap();
    let empty = Instance::missing(data.schema.len());
    for (i, spec) in data.schema.variables().iter().enumerate() {
        if matches!(spec.kind, VariableKind::Binary | VariableKind::Categorical | VariableKind::Multicategorical) {
            assert_eq!(predict(&params, i, &empty, 0.5).unwrap(), base.predict(i, 0.5), "{}", spec.name);
        }
    }
    let mut observed = data.instances[0].clone();
    observed.values[0] = Value::Missing;
    assert_eq!(predict(&params, 0, &observed, 0.5).unwrap(), base.predict(0, 0.5));
}

#[test]
fn ordinal_distribution_depends_only_on_the_bias_sum() {
    let schema = DatasetSchema::new(vec![VariableSpec::with_size("o", VariableKind::Ordinal, 5), VariableSpec::binary("b")]).unwrap();
    let mut p = random_params(&schema, 2, 1.0, 2);
    p.var_mut(0).weights.iter_mut().for_each(|w| *w = 0.0);
    let inst = Instance::new(vec![Value::Missing, Value::Binary(true)]);
    let before = predictive_distribution(&p, 0, &inst).unwrap();
    let u = &mut p.var_mut(0).bias;
    u[0] += 0.7;
    u[3] -= 0.3;
    u[4] -= 0.4;
    let after = predictive_distribution(&p, 0, &inst).unwrap();
    let (a, b) = (state_probs(&before), state_probs(&after));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    assert_eq!(before.decode(0.5), after.decode(0.5));
}
