//! Test oracles. The reference forward pass, loss and finite differences
//! are written from the parameter layout alone and share no code with the
//! library's numerics.

#![allow(dead_code)]

use fedsim::nn::{init_params, loss_and_grad, Batch, Matrix, ModelParams, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPS: f64 = 1e-4;

/// Straight-line forward pass over the documented flat layout: per layer,
/// an `n_in x n_out` row-major weight block followed by `n_out` biases.
pub fn reference_probs(spec: &NetworkSpec, params: &[f64], x: &[f64]) -> Vec<f64> {
    let sizes = spec.layer_sizes();
    let mut offset = 0;
    let mut act = x.to_vec();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut z = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = b[j];
            for i in 0..n_in {
                s += act[i] * w[i * n_out + j];
            }
            z[j] = s;
        }
        act = if l + 2 == sizes.len() {
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        } else {
            z.into_iter().map(|v| v.max(0.0)).collect()
        };
    }
    assert_eq!(offset, params.len());
    act
}

pub fn reference_loss(spec: &NetworkSpec, params: &[f64], batch: &Batch) -> f64 {
    let n = batch.labels.len();
    (0..n)
        .map(|r| {
            -reference_probs(spec, params, batch.features.row(r))[batch.labels[r]]
                .max(1e-12)
                .ln()
        })
        .sum::<f64>()
        / n as f64
}

/// Central differences of [`reference_loss`].
pub fn numeric_grad(spec: &NetworkSpec, params: &[f64], batch: &Batch, eps: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = reference_loss(spec, &p, batch);
            p[i] = orig - eps;
            let down = reference_loss(spec, &p, batch);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - n|| / (||a|| + ||n||)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = norm(analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(analytic.iter().copied()) + norm(numeric.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub struct GradCase {
    pub spec: NetworkSpec,
    pub params: ModelParams,
    pub batch: Batch,
}

/// Smallest |pre-activation| over all hidden units and batch rows.
pub fn min_hidden_preactivation(spec: &NetworkSpec, params: &[f64], batch: &Batch) -> f64 {
    let sizes = spec.layer_sizes();
    let mut min = f64::INFINITY;
    for r in 0..batch.labels.len() {
        let mut act = batch.features.row(r).to_vec();
        let mut offset = 0;
        for l in 0..sizes.len() - 2 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut z = params[offset + n_in * n_out..offset + n_in * n_out + n_out].to_vec();
            for (i, a) in act.iter().enumerate() {
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += a * params[offset + i * n_out + j];
                }
            }
            offset += n_in * n_out + n_out;
            min = z.iter().fold(min, |m, v| m.min(v.abs()));
            act = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    min
}

/// Cases whose hidden units all sit this far from the ReLU kink, so a
/// central difference with step `FD_EPS` never straddles it.
pub const KINK_MARGIN: f64 = 10.0 * FD_EPS;

/// A small random network with non-zero biases and a random batch, redrawn
/// until no hidden pre-activation lies within [`KINK_MARGIN`] of zero.
pub fn random_case(seed: u64) -> GradCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let case = draw_case(&mut rng, seed);
        if min_hidden_preactivation(&case.spec, case.params.values(), &case.batch) > KINK_MARGIN {
            return case;
        }
    }
}

fn draw_case(rng: &mut ChaCha8Rng, seed: u64) -> GradCase {
    let input = rng.random_range(2..=6);
    let depth = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
    let classes = rng.random_range(2..=5);
    let spec = NetworkSpec::mlp(input, &hidden, classes).unwrap();
    let mut values = init_params(&spec, seed).into_values();
    for v in values.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let params = ModelParams::from_values(&spec, values).unwrap();
    let n = rng.random_range(3..=6);
    let features: Vec<f64> = (0..n * input).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let batch = Batch::new(Matrix::new(n, input, features).unwrap(), labels).unwrap();
    GradCase {
        spec,
        params,
        batch,
    }
}

/// Relative error between the library gradient and finite differences.
pub fn gradient_check(case: &GradCase) -> f64 {
    let (_, analytic) = loss_and_grad(&case.params, &case.spec, &case.batch).unwrap();
    let numeric = numeric_grad(&case.spec, case.params.values(), &case.batch, FD_EPS);
    relative_error(&analytic, &numeric)
}
