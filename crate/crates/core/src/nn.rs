//! Dense feed-forward classifier: initialization, forward pass, analytic
//! cross-entropy gradients, SGD, evaluation and parameter averaging.
//!
//! Parameters are stored as one flat `f64` vector. For every consecutive
//! pair of layer sizes `(n_in, n_out)` the layout is the row-major
//! `n_in × n_out` weight block followed by the `n_out` biases.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Subset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HiddenActivation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
}

/// Offsets of one weight/bias block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub n_in: usize,
    pub n_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    fn end(&self) -> usize {
        self.bias_offset + self.n_out
    }
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least an input and an output layer, got {} layer(s)",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(format!("layer {pos} has size 0")));
        }
        Ok(NetworkSpec {
            layer_sizes,
            hidden_activation: HiddenActivation::Relu,
            output_activation: OutputActivation::Softmax,
        })
    }

    /// `input`, then each hidden width, then `classes`.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    n_in: w[0],
                    n_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset = shape.end();
                shape
            })
            .collect()
    }

    /// FNV-1a over the layer sizes. Stable across platforms and releases.
    pub fn hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        for &size in &self.layer_sizes {
            for byte in (size as u64).to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(PRIME);
            }
        }
        h
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", sizes.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
    spec_hash: u64,
}

impl ModelParams {
    /// Wraps raw values, checking length and finiteness against `spec`.
    pub fn from_values(spec: &NetworkSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "network {spec} has {} parameters, got {}",
                spec.param_count(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(ModelParams {
            values,
            spec_hash: spec.hash(),
        })
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        ModelParams {
            values: vec![0.0; spec.param_count()],
            spec_hash: spec.hash(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spec_hash(&self) -> u64 {
        self.spec_hash
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Serialized size as 64-bit floats.
    pub fn byte_size(&self) -> u64 {
        (self.values.len() * std::mem::size_of::<f64>()) as u64
    }

    fn check_bound(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = spec.hash();
        if self.spec_hash != expected {
            return Err(Error::SpecMismatch {
                expected,
                found: self.spec_hash,
            });
        }
        if self.values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "network {spec} has {} parameters, got {}",
                spec.param_count(),
                self.values.len()
            )));
        }
        Ok(())
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Matrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Batch { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.features.cols() != spec.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch width {} but network input is {}",
                self.features.cols(),
                spec.input_dim()
            )));
        }
        let classes = spec.class_count();
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(())
    }
}

/// Uniform Glorot initialization for weights, zero biases.
pub fn init_params(spec: &NetworkSpec, seed: u64) -> ModelParams {
    let mut rng = rng::for_stream(seed, Stream::Init);
    let mut values = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
        let weights = &mut values[layer.weight_offset..layer.bias_offset];
        for w in weights.iter_mut() {
            *w = rng.random_range(-limit..=limit);
        }
    }
    ModelParams {
        values,
        spec_hash: spec.hash(),
    }
}

/// out[r] = bias + input[r] · W
fn affine(input: &Matrix, params: &[f64], layer: &LayerShape) -> Matrix {
    let weights = &params[layer.weight_offset..layer.bias_offset];
    let bias = &params[layer.bias_offset..layer.end()];
    let mut out = Matrix::zeros(input.rows(), layer.n_out);
    for r in 0..input.rows() {
        let x = input.row(r);
        let o = out.row_mut(r);
        o.copy_from_slice(bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let w_row = &weights[i * layer.n_out..(i + 1) * layer.n_out];
            for (oj, &wj) in o.iter_mut().zip(w_row) {
                *oj += xi * wj;
            }
        }
    }
    out
}

fn relu_in_place(m: &mut Matrix) {
    for v in m.data.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn softmax_in_place(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Returns every layer's post-activation output; the first entry is a
/// copy of the input and the last is the softmax output.
fn forward_all(params: &[f64], layers: &[LayerShape], features: &Matrix) -> Vec<Matrix> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(features.clone());
    for (idx, layer) in layers.iter().enumerate() {
        let mut z = affine(acts.last().expect("non-empty"), params, layer);
        if idx + 1 == layers.len() {
            softmax_in_place(&mut z);
        } else {
            relu_in_place(&mut z);
        }
        acts.push(z);
    }
    acts
}

fn check_features(spec: &NetworkSpec, features: &Matrix) -> Result<()> {
    if features.cols() != spec.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature width {} but network input is {}",
            features.cols(),
            spec.input_dim()
        )));
    }
    Ok(())
}

/// Class probabilities, one row per input row.
pub fn forward(params: &ModelParams, spec: &NetworkSpec, features: &Matrix) -> Result<Matrix> {
    params.check_bound(spec)?;
    check_features(spec, features)?;
    let layers = spec.layers();
    Ok(forward_all(&params.values, &layers, features)
        .pop()
        .expect("at least one layer"))
}

/// Mean cross-entropy over the batch and its gradient.
pub fn loss_and_grad(
    params: &ModelParams,
    spec: &NetworkSpec,
    batch: &Batch,
) -> Result<(f64, Vec<f64>)> {
    params.check_bound(spec)?;
    batch.check(spec)?;
    let layers = spec.layers();
    let mut acts = forward_all(&params.values, &layers, &batch.features);
    let n = batch.len();
    let inv_n = 1.0 / n as f64;

    let probs = acts.pop().expect("output layer");
    let mut loss = 0.0;
    for (r, &label) in batch.labels.iter().enumerate() {
        loss -= probs.row(r)[label].max(PROB_FLOOR).ln();
    }
    loss *= inv_n;

    // dL/dz at the output is (p - onehot) / n
    let mut delta = probs;
    for (r, &label) in batch.labels.iter().enumerate() {
        let row = delta.row_mut(r);
        row[label] -= 1.0;
        for v in row.iter_mut() {
            *v *= inv_n;
        }
    }

    let mut grad = vec![0.0; params.len()];
    for (idx, layer) in layers.iter().enumerate().rev() {
        let input = &acts[idx];
        let (gw, gb) =
            grad[layer.weight_offset..layer.end()].split_at_mut(layer.n_in * layer.n_out);
        for r in 0..n {
            let d = delta.row(r);
            for (gbj, &dj) in gb.iter_mut().zip(d) {
                *gbj += dj;
            }
            for (i, &xi) in input.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let g_row = &mut gw[i * layer.n_out..(i + 1) * layer.n_out];
                for (g, &dj) in g_row.iter_mut().zip(d) {
                    *g += xi * dj;
                }
            }
        }
        if idx == 0 {
            break;
        }
        // Back through W and the ReLU of the layer below.
        let weights = &params.values[layer.weight_offset..layer.bias_offset];
        let mut prev = Matrix::zeros(n, layer.n_in);
        for r in 0..n {
            let d = delta.row(r);
            let a = input.row(r);
            let p = prev.row_mut(r);
            for i in 0..layer.n_in {
                if a[i] <= 0.0 {
                    continue;
                }
                let w_row = &weights[i * layer.n_out..(i + 1) * layer.n_out];
                p[i] = w_row.iter().zip(d).map(|(w, dj)| w * dj).sum();
            }
        }
        delta = prev;
    }
    Ok((loss, grad))
}

/// `values - lr * grad`, rejecting non-finite gradients.
pub fn sgd_step(params: &ModelParams, grad: &[f64], lr: f64) -> Result<ModelParams> {
    if grad.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient has {} entries, parameters {}",
            grad.len(),
            params.len()
        )));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    check_finite(grad)?;
    let values = params
        .values
        .iter()
        .zip(grad)
        .map(|(v, g)| v - lr * g)
        .collect();
    Ok(ModelParams {
        values,
        spec_hash: params.spec_hash,
    })
}

/// Hands out mini-batches of positions `0..len`, sampled without
/// replacement within an epoch and reshuffled at every epoch boundary.
/// The final batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(len: usize, seed: u64, stream: Stream) -> Self {
        BatchSampler {
            order: (0..len).collect(),
            cursor: len,
            rng: rng::for_stream(seed, stream),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn next_batch(&mut self, batch_size: usize) -> &[usize] {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        let end = (start + batch_size).min(self.order.len());
        self.cursor = end;
        &self.order[start..end]
    }
}

/// Runs `steps` SGD steps drawing batches from `sampler` over `data`.
/// Returns the updated parameters and the number of examples processed.
pub fn train_with_sampler(
    params: &ModelParams,
    spec: &NetworkSpec,
    data: &Subset<'_>,
    sampler: &mut BatchSampler,
    steps: usize,
    batch_size: usize,
    lr: f64,
) -> Result<(ModelParams, usize)> {
    params.check_bound(spec)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    if sampler.len() != data.len() {
        return Err(Error::DimensionMismatch(format!(
            "sampler covers {} examples, data has {}",
            sampler.len(),
            data.len()
        )));
    }
    let batch_size = batch_size.clamp(1, data.len());
    let mut current = params.clone();
    let mut seen = 0;
    for _ in 0..steps {
        let positions = sampler.next_batch(batch_size);
        seen += positions.len();
        let batch = data.batch(positions);
        let (_, grad) = loss_and_grad(&current, spec, &batch)?;
        current = sgd_step(&current, &grad, lr)?;
    }
    Ok((current, seen))
}

/// Number of batches that covers `len` examples once.
pub fn batches_per_epoch(len: usize, batch_size: usize) -> usize {
    let b = batch_size.clamp(1, len.max(1));
    len.div_ceil(b)
}

/// `steps` mini-batch SGD steps over `data`. Deterministic in `seed`.
pub fn train_local(
    params: &ModelParams,
    spec: &NetworkSpec,
    data: &Subset<'_>,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<ModelParams> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    if batch_size > data.len() {
        log::warn!(
            "batch size {batch_size} exceeds the {} available examples; clamping",
            data.len()
        );
    }
    let mut sampler = BatchSampler::new(data.len(), seed, Stream::Sampler(0));
    train_with_sampler(params, spec, data, &mut sampler, steps, batch_size, lr).map(|(p, _)| p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// How often each class was predicted.
    pub predicted_counts: Vec<usize>,
}

impl Evaluation {
    /// Share of predictions that went to the most predicted class.
    pub fn dominant_share(&self) -> f64 {
        let total: usize = self.predicted_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        *self.predicted_counts.iter().max().expect("non-empty") as f64 / total as f64
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

const EVAL_CHUNK: usize = 1024;

pub fn evaluate(params: &ModelParams, spec: &NetworkSpec, data: &Subset<'_>) -> Result<Evaluation> {
    params.check_bound(spec)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    check_features(spec, data.dataset().features())?;
    let layers = spec.layers();
    let mut correct = 0usize;
    let mut loss = 0.0;
    let mut predicted_counts = vec![0usize; spec.class_count()];
    let positions: Vec<usize> = (0..data.len()).collect();
    for chunk in positions.chunks(EVAL_CHUNK) {
        let batch = data.batch(chunk);
        let probs = forward_all(&params.values, &layers, &batch.features)
            .pop()
            .expect("output layer");
        for (r, &label) in batch.labels.iter().enumerate() {
            let row = probs.row(r);
            let pred = argmax(row);
            predicted_counts[pred] += 1;
            if pred == label {
                correct += 1;
            }
            loss -= row[label].max(PROB_FLOOR).ln();
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: loss / n,
        predicted_counts,
    })
}

/// Weighted mean of parameter vectors, accumulated in entry order as a
/// running mean so identical inputs reproduce themselves exactly.
pub fn average_params(entries: &[(&ModelParams, f64)]) -> Result<ModelParams> {
    let (first, _) = entries
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
    for (p, w) in entries {
        if p.spec_hash != first.spec_hash || p.len() != first.len() {
            return Err(Error::SpecMismatch {
                expected: first.spec_hash,
                found: p.spec_hash,
            });
        }
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "averaging weights must be positive, got {w}"
            )));
        }
    }
    let mut mean = first.values.clone();
    let mut total = entries[0].1;
    for (p, w) in &entries[1..] {
        total += w;
        let frac = w / total;
        for (m, &v) in mean.iter_mut().zip(&p.values) {
            *m += frac * (v - *m);
        }
    }
    Ok(ModelParams {
        values: mean,
        spec_hash: first.spec_hash,
    })
}
