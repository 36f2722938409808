mod common;

use common::*;
use fedsim::data::generate_synthetic;
use fedsim::federation::smooth;
use fedsim::nn::{
    average_params, forward, init_params, loss_and_grad, sgd_step, BatchSampler, Matrix,
    ModelParams, NetworkSpec,
};
use fedsim::rng::Stream;
use proptest::prelude::*;

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..20 {
        let case = random_case(seed);
        let err = gradient_check(&case);
        assert!(
            err < 1e-4,
            "seed {seed} ({}): relative error {err:e}",
            case.spec
        );
    }
}

#[test]
fn forward_matches_reference() {
    for seed in 100..110 {
        let case = random_case(seed);
        let probs = forward(&case.params, &case.spec, &case.batch.features).unwrap();
        for r in 0..case.batch.len() {
            let want =
                reference_probs(&case.spec, case.params.values(), case.batch.features.row(r));
            for (a, b) in probs.row(r).iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "seed {seed} row {r}: {a} vs {b}");
            }
        }
        let (loss, _) = loss_and_grad(&case.params, &case.spec, &case.batch).unwrap();
        assert!(
            (loss - reference_loss(&case.spec, case.params.values(), &case.batch)).abs() < 1e-12
        );
    }
}

#[test]
fn smoothed_loss_falls_over_first_100_steps() {
    let data = generate_synthetic(4, 100, 8, 3).unwrap();
    let spec = NetworkSpec::mlp(8, &[16], 4).unwrap();
    let mut params = init_params(&spec, 3);
    let mut sampler = BatchSampler::new(data.len(), 3, Stream::Sampler(0));
    let all = data.all();
    let mut losses = Vec::new();
    for _ in 0..100 {
        let batch = all.batch(sampler.next_batch(16));
        let (loss, grad) = loss_and_grad(&params, &spec, &batch).unwrap();
        losses.push(loss);
        params = sgd_step(&params, &grad, 0.1).unwrap();
    }
    let s = smooth(&losses, 10);
    assert!(s[99] < 0.8 * s[9], "smoothed loss {} -> {}", s[9], s[99]);
}

fn spec_strategy() -> impl Strategy<Value = NetworkSpec> {
    (1usize..6, prop::collection::vec(1usize..6, 0..3), 2usize..5)
        .prop_map(|(i, h, c)| NetworkSpec::mlp(i, &h, c).unwrap())
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(spec in spec_strategy(), seed in 0u64..1000, scale in 0.0f64..50.0) {
        let params = init_params(&spec, seed);
        let values: Vec<f64> = params.values().iter().map(|v| v * scale).collect();
        let params = ModelParams::from_values(&spec, values).unwrap();
        let rows = 3;
        let x: Vec<f64> = (0..rows * spec.input_dim()).map(|i| ((i * 7919 + seed as usize) % 97) as f64 / 96.0).collect();
        let probs = forward(&params, &spec, &Matrix::new(rows, spec.input_dim(), x).unwrap()).unwrap();
        for r in 0..rows {
            let row = probs.row(r);
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_identical_models_is_identity(spec in spec_strategy(), seed in 0u64..1000, k in 1usize..12) {
        let p = init_params(&spec, seed);
        let entries: Vec<_> = (0..k).map(|i| (&p, 1.0 + i as f64)).collect();
        prop_assert_eq!(average_params(&entries).unwrap(), p.clone());
    }

    #[test]
    fn averaging_is_permutation_invariant(spec in spec_strategy(), seeds in prop::collection::vec(0u64..1000, 2..6), rot in 0usize..6) {
        let models: Vec<ModelParams> = seeds.iter().map(|&s| init_params(&spec, s)).collect();
        let weights: Vec<f64> = (0..models.len()).map(|i| 1.0 + i as f64).collect();
        let entries: Vec<_> = models.iter().zip(weights.iter().copied()).collect();
        let mut rotated = entries.clone();
        rotated.rotate_left(rot % entries.len());
        let a = average_params(&entries).unwrap();
        let b = average_params(&rotated).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let total: f64 = weights.iter().sum();
        for j in 0..a.len() {
            let want: f64 = models.iter().zip(&weights).map(|(m, w)| m.values()[j] * w).sum::<f64>() / total;
            prop_assert!((a.values()[j] - want).abs() < 1e-12);
        }
    }
}
