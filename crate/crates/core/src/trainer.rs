//! Desk-scale classifier and the three-term mixed loss.
//!
//! The model is mask-weighted mean pooling over token rows followed by an
//! affine map and a softmax. Training is plain SGD with analytic gradients;
//! the loss is a weighted sum of per-population mean cross-entropies over
//! the original, vanilla, and global examples in a batch.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Dataset, EmbeddingSequence, Example, LossWeights, Provenance, SoftLabel};
use crate::Scalar;

/// Additive guard inside the cross-entropy logarithm.
const LOG_GUARD: f64 = 1e-12;

/// Linear softmax classifier over mean-pooled embeddings.
///
/// `weights` is row-major `dims x classes`: the weight of input dimension
/// `j` on class `k` sits at `j * classes + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier<F> {
    weights: Vec<F>,
    bias: Vec<F>,
    dims: usize,
    classes: usize,
}

impl<F: Scalar> LinearClassifier<F> {
    pub fn zeros(dims: usize, classes: usize) -> Result<Self> {
        if dims == 0 || classes == 0 {
            return Err(Error::config(format!(
                "classifier shape {dims}x{classes} must be positive"
            )));
        }
        Ok(Self {
            weights: vec![F::zero(); dims * classes],
            bias: vec![F::zero(); classes],
            dims,
            classes,
        })
    }

    pub fn new(dims: usize, classes: usize, weights: Vec<F>, bias: Vec<F>) -> Result<Self> {
        if dims == 0 || classes == 0 {
            return Err(Error::config(format!(
                "classifier shape {dims}x{classes} must be positive"
            )));
        }
        if weights.len() != dims * classes || bias.len() != classes {
            return Err(Error::config(format!(
                "classifier shape {dims}x{classes} needs {} weights and {classes} biases, got {} and {}",
                dims * classes,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|w| !w.is_finite()) {
            return Err(Error::config("classifier parameters must be finite"));
        }
        Ok(Self {
            weights,
            bias,
            dims,
            classes,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }
}

/// Training hyperparameters for the SGD loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<F> {
    pub loss_weights: LossWeights<F>,
    pub learning_rate: F,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            loss_weights: LossWeights::default(),
            learning_rate: F::of(0.1),
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > F::zero()) {
            return Err(Error::config(format!(
                "learning_rate = {} must be > 0",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        LossWeights::new(
            self.loss_weights.delta,
            self.loss_weights.tau,
            self.loss_weights.eta,
        )?;
        Ok(())
    }
}

/// Mask-weighted mean of the token rows.
fn pool<F: Scalar>(seq: &EmbeddingSequence<F>) -> Vec<F> {
    let count = F::of(seq.active_tokens() as f64);
    let mut h = seq.masked_row_sum();
    for v in h.iter_mut() {
        *v = *v / count;
    }
    h
}

fn softmax_in_place<F: Scalar>(logits: &mut [F]) {
    let top = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for z in logits.iter_mut() {
        *z = (*z - top).exp();
        total = total + *z;
    }
    for z in logits.iter_mut() {
        *z = *z / total;
    }
}

/// Pool, apply the affine map, softmax; returns the class distribution.
pub fn forward<F: Scalar>(
    model: &LinearClassifier<F>,
    seq: &EmbeddingSequence<F>,
) -> Result<SoftLabel<F>> {
    let mut logits = forward_logits(model, seq)?;
    softmax_in_place(&mut logits);
    SoftLabel::new(logits)
}

fn forward_logits<F: Scalar>(
    model: &LinearClassifier<F>,
    seq: &EmbeddingSequence<F>,
) -> Result<Vec<F>> {
    if seq.dims() != model.dims {
        return Err(Error::Dimension(format!(
            "input width {} does not match model width {}",
            seq.dims(),
            model.dims
        )));
    }
    let h = pool(seq);
    let mut logits = model.bias.clone();
    for (j, &hj) in h.iter().enumerate() {
        let row = &model.weights[j * model.classes..(j + 1) * model.classes];
        for (k, &w) in row.iter().enumerate() {
            logits[k] = logits[k] + hj * w;
        }
    }
    Ok(logits)
}

/// Cross entropy of a predicted distribution against a soft target:
/// `-sum_k target_k * ln(prediction_k + 1e-12)`.
pub fn soft_cross_entropy<F: Scalar>(prediction: &SoftLabel<F>, target: &SoftLabel<F>) -> F {
    debug_assert_eq!(prediction.classes(), target.classes());
    let guard = F::of(LOG_GUARD);
    let mut loss = F::zero();
    for (&p, &t) in prediction.probs().iter().zip(target.probs()) {
        loss = loss - t * (p + guard).ln();
    }
    loss
}

fn example_loss<F: Scalar>(model: &LinearClassifier<F>, ex: &Example<F>) -> Result<F> {
    let prediction = forward(model, &ex.seq)?;
    Ok(soft_cross_entropy(&prediction, &ex.label))
}

fn population_slot(provenance: Provenance) -> usize {
    match provenance {
        Provenance::Original => 0,
        Provenance::Vanilla => 1,
        Provenance::Global => 2,
    }
}

/// Weighted sum of per-population mean losses:
/// `delta * mean(original) + tau * mean(vanilla) + eta * mean(global)`.
/// A population absent from the batch contributes zero.
pub fn mixed_loss<F: Scalar>(
    model: &LinearClassifier<F>,
    batch: &[Example<F>],
    w: &LossWeights<F>,
) -> Result<F> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sums = [F::zero(); 3];
    let mut counts = [0usize; 3];
    for ex in batch {
        let slot = population_slot(ex.provenance);
        sums[slot] = sums[slot] + example_loss(model, ex)?;
        counts[slot] += 1;
    }
    let mut total = F::zero();
    for (slot, weight) in [(0, w.delta), (1, w.tau), (2, w.eta)] {
        if counts[slot] > 0 {
            total = total + weight * sums[slot] / F::of(counts[slot] as f64);
        }
    }
    Ok(total)
}

/// Gradient of [`mixed_loss`] with respect to the weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

/// Analytic backpropagation through softmax, affine map, and pooling.
pub fn gradient<F: Scalar>(
    model: &LinearClassifier<F>,
    batch: &[Example<F>],
    w: &LossWeights<F>,
) -> Result<Gradient<F>> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = [0usize; 3];
    for ex in batch {
        counts[population_slot(ex.provenance)] += 1;
    }
    let coeffs = [w.delta, w.tau, w.eta];

    let mut grad = Gradient {
        weights: vec![F::zero(); model.weights.len()],
        bias: vec![F::zero(); model.bias.len()],
    };
    for ex in batch {
        let slot = population_slot(ex.provenance);
        let coeff = coeffs[slot] / F::of(counts[slot] as f64);
        if coeff == F::zero() {
            continue;
        }
        let h = pool(&ex.seq);
        let mut p = forward_logits(model, &ex.seq)?;
        softmax_in_place(&mut p);
        // d loss / d logit_k = p_k - y_k for softmax + cross entropy.
        for (k, pk) in p.iter_mut().enumerate() {
            *pk = (*pk - ex.label.probs()[k]) * coeff;
        }
        for (k, &g) in p.iter().enumerate() {
            grad.bias[k] = grad.bias[k] + g;
        }
        for (j, &hj) in h.iter().enumerate() {
            let row = &mut grad.weights[j * model.classes..(j + 1) * model.classes];
            for (k, &g) in p.iter().enumerate() {
                row[k] = row[k] + hj * g;
            }
        }
    }
    Ok(grad)
}

/// One in-place SGD update: `param -= rate * gradient`.
pub fn sgd_step<F: Scalar>(model: &mut LinearClassifier<F>, grad: &Gradient<F>, rate: F) {
    for (w, &g) in model.weights.iter_mut().zip(&grad.weights) {
        *w = *w - rate * g;
    }
    for (b, &g) in model.bias.iter_mut().zip(&grad.bias) {
        *b = *b - rate * g;
    }
}

/// Loss and accuracy measured at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// One metrics line of the training log: split is `train` or `eval`.
///
/// On the train split the loss is the mixed loss under the configured
/// weights; on the eval split it is the plain mean cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
}

/// Train from zero initialization with shuffled minibatch SGD.
///
/// Metrics are measured on the full training set after each epoch. The
/// whole trajectory is deterministic under the config seed.
pub fn train<F: Scalar>(
    dataset: &Dataset<F>,
    config: &TrainConfig<F>,
) -> Result<(LinearClassifier<F>, Vec<EpochMetrics>)> {
    let (model, records) = train_with_eval(dataset, None, config)?;
    let metrics = records
        .into_iter()
        .map(|r| EpochMetrics {
            epoch: r.epoch,
            loss: r.loss,
            accuracy: r.accuracy,
        })
        .collect();
    Ok((model, metrics))
}

/// [`train`], additionally scoring a held-out set after every epoch.
pub fn train_with_eval<F: Scalar>(
    dataset: &Dataset<F>,
    eval_set: Option<&Dataset<F>>,
    config: &TrainConfig<F>,
) -> Result<(LinearClassifier<F>, Vec<MetricRecord>)> {
    config.validate()?;
    let mut model = LinearClassifier::zeros(dataset.dims(), dataset.classes())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch: Vec<Example<F>> = Vec::with_capacity(config.batch_size);
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset.get(i).clone()));
            let grad = gradient(&model, &batch, &config.loss_weights)?;
            sgd_step(&mut model, &grad, config.learning_rate);
        }
        let loss = mixed_loss(&model, dataset.examples(), &config.loss_weights)?
            .to_f64()
            .expect("loss is finite");
        records.push(MetricRecord {
            epoch,
            split: "train",
            loss,
            accuracy: evaluate(&model, dataset)?,
        });
        if let Some(eval_set) = eval_set {
            let mut loss = F::zero();
            for ex in eval_set.examples() {
                loss = loss + example_loss(&model, ex)?;
            }
            let loss = loss.to_f64().expect("loss is finite") / eval_set.len() as f64;
            records.push(MetricRecord {
                epoch,
                split: "eval",
                loss,
                accuracy: evaluate(&model, eval_set)?,
            });
        }
    }
    Ok((model, records))
}

/// Central finite differences of [`mixed_loss`] in every parameter.
pub fn finite_difference_gradient(
    model: &LinearClassifier<f64>,
    batch: &[Example<f64>],
    w: &LossWeights<f64>,
    step: f64,
) -> Result<Gradient<f64>> {
    let mut probe = model.clone();
    let mut grad = Gradient {
        weights: vec![0.0; model.weights.len()],
        bias: vec![0.0; model.bias.len()],
    };
    for i in 0..model.weights.len() {
        let center = probe.weights[i];
        probe.weights[i] = center + step;
        let plus = mixed_loss(&probe, batch, w)?;
        probe.weights[i] = center - step;
        let minus = mixed_loss(&probe, batch, w)?;
        probe.weights[i] = center;
        grad.weights[i] = (plus - minus) / (2.0 * step);
    }
    for k in 0..model.bias.len() {
        let center = probe.bias[k];
        probe.bias[k] = center + step;
        let plus = mixed_loss(&probe, batch, w)?;
        probe.bias[k] = center - step;
        let minus = mixed_loss(&probe, batch, w)?;
        probe.bias[k] = center;
        grad.bias[k] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Outcome of the randomized gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub trials: usize,
    /// Worst relative error over all parameter coordinates whose gradient
    /// magnitude exceeds 1e-8.
    pub max_relative_error: f64,
}

fn random_soft_label<R: Rng>(classes: usize, rng: &mut R) -> SoftLabel<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    SoftLabel::new(raw.into_iter().map(|v| (v / sum).min(1.0)).collect())
        .expect("normalized probabilities form a simplex")
}

/// Run `trials` random (model, batch) instances and compare the analytic
/// gradient of the mixed loss against central finite differences with
/// step 1e-5.
pub fn gradient_check(trials: usize, seed: u64) -> Result<GradCheck> {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;

    for _ in 0..trials {
        let dims = rng.gen_range(2..=6);
        let classes = rng.gen_range(2..=5);
        let rows = rng.gen_range(1..=4);
        let batch_len = rng.gen_range(3..=8);

        let weights: Vec<f64> = (0..dims * classes)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let bias: Vec<f64> = (0..classes).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let model = LinearClassifier::new(dims, classes, weights, bias)?;

        let mut batch = Vec::with_capacity(batch_len);
        for b in 0..batch_len {
            let data: Vec<f64> = (0..rows * dims).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut mask: Vec<u8> = (0..rows).map(|_| u8::from(rng.gen_bool(0.8))).collect();
            if mask.iter().all(|&m| m == 0) {
                mask[0] = 1;
            }
            let provenance = match b % 3 {
                0 => Provenance::Original,
                1 => Provenance::Vanilla,
                _ => Provenance::Global,
            };
            batch.push(Example::new(
                EmbeddingSequence::new(rows, dims, data, Some(mask))?,
                random_soft_label(classes, &mut rng),
                provenance,
            ));
        }
        let w = LossWeights {
            delta: rng.gen_range(0.1..1.0),
            tau: rng.gen_range(0.1..1.0),
            eta: rng.gen_range(0.1..1.0),
        };

        let analytic = gradient(&model, &batch, &w)?;
        let numeric = finite_difference_gradient(&model, &batch, &w, STEP)?;
        for (&a, &n) in analytic
            .weights
            .iter()
            .chain(analytic.bias.iter())
            .zip(numeric.weights.iter().chain(numeric.bias.iter()))
        {
            let scale = a.abs().max(n.abs());
            if scale > 1e-8 {
                worst = worst.max((a - n).abs() / scale);
            }
        }
    }
    Ok(GradCheck {
        trials,
        max_relative_error: worst,
    })
}

/// Fraction of examples whose predicted argmax matches the label argmax.
/// Both argmaxes break ties toward the lower index.
pub fn evaluate<F: Scalar>(model: &LinearClassifier<F>, dataset: &Dataset<F>) -> Result<f64> {
    let mut correct = 0usize;
    for ex in dataset.examples() {
        let prediction = forward(model, &ex.seq)?;
        if prediction.argmax() == ex.label.argmax() {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Write a checkpoint: an 8-byte header of `dims` and `classes` as
/// little-endian u32, then the weights (row-major) and bias as
/// little-endian f64.
pub fn save_checkpoint<F: Scalar>(model: &LinearClassifier<F>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(model.dims as u32).to_le_bytes())?;
    out.write_all(&(model.classes as u32).to_le_bytes())?;
    for v in model.weights.iter().chain(model.bias.iter()) {
        let v = v.to_f64().expect("parameters are finite");
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<LinearClassifier<F>> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; 8];
    input.read_exact(&mut header)?;
    let dims = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let classes = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    if dims == 0 || classes == 0 {
        return Err(Error::config(format!(
            "checkpoint header has degenerate shape {dims}x{classes}"
        )));
    }
    let mut read_f64 = |label: &str| -> Result<F> {
        let mut buf = [0u8; 8];
        input.read_exact(&mut buf).map_err(|e| {
            Error::config(format!("checkpoint truncated while reading {label}: {e}"))
        })?;
        Ok(F::of(f64::from_le_bytes(buf)))
    };
    let mut weights = Vec::with_capacity(dims * classes);
    for _ in 0..dims * classes {
        weights.push(read_f64("weights")?);
    }
    let mut bias = Vec::with_capacity(classes);
    for _ in 0..classes {
        bias.push(read_f64("bias")?);
    }
    LinearClassifier::new(dims, classes, weights, bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: Vec<Vec<f64>>) -> EmbeddingSequence<f64> {
        EmbeddingSequence::from_rows(rows, None).unwrap()
    }

    fn example(rows: Vec<Vec<f64>>, label: Vec<f64>, provenance: Provenance) -> Example<f64> {
        Example::new(
            seq(rows),
            SoftLabel::new(label).unwrap(),
            provenance,
        )
    }

    #[test]
    fn zero_model_predicts_uniformly() {
        let model = LinearClassifier::<f64>::zeros(3, 4).unwrap();
        let p = forward(&model, &seq(vec![vec![1.0, -2.0, 0.5]])).unwrap();
        for &x in p.probs() {
            assert_eq!(x, 0.25);
        }
    }

    #[test]
    fn saturated_weight_concentrates_the_prediction() {
        // Mask keeps only row 0; a huge weight from dim 0 to class 1 wins.
        let mut weights = vec![0.0; 2 * 2];
        weights[0 * 2 + 1] = 50.0;
        let model = LinearClassifier::new(2, 2, weights, vec![0.0, 0.0]).unwrap();
        let s = EmbeddingSequence::new(2, 2, vec![1.0, 0.0, -9.0, 4.0], Some(vec![1, 0])).unwrap();
        let p = forward(&model, &s).unwrap();
        assert!(p.probs()[1] > 0.99, "got {:?}", p.probs());
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let model = LinearClassifier::<f64>::zeros(3, 2).unwrap();
        assert!(forward(&model, &seq(vec![vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn uniform_prediction_costs_ln_c() {
        let c = 4;
        let uniform = SoftLabel::<f64>::new(vec![0.25; c]).unwrap();
        let target = SoftLabel::<f64>::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let loss = soft_cross_entropy(&uniform, &target);
        assert!((loss - (c as f64).ln()).abs() < 1e-9, "got {loss}");
    }

    #[test]
    fn perfect_one_hot_prediction_costs_nothing() {
        let label = SoftLabel::<f64>::one_hot(1, 3).unwrap();
        let loss = soft_cross_entropy(&label, &label);
        assert!(loss.abs() < 1e-9, "got {loss}");
    }

    #[test]
    fn mixed_loss_isolates_the_original_term() {
        let batch = vec![
            example(vec![vec![1.0, 0.0]], vec![1.0, 0.0], Provenance::Original),
            example(vec![vec![0.0, 1.0]], vec![0.0, 1.0], Provenance::Original),
            example(vec![vec![0.5, 0.5]], vec![0.5, 0.5], Provenance::Vanilla),
            example(vec![vec![0.4, 0.6]], vec![0.3, 0.7], Provenance::Global),
        ];
        let model = LinearClassifier::<f64>::zeros(2, 2).unwrap();
        let w = LossWeights {
            delta: 1.0,
            tau: 0.0,
            eta: 0.0,
        };
        let originals: Vec<Example<f64>> = batch[..2].to_vec();
        let mean_ce: f64 = originals
            .iter()
            .map(|ex| example_loss(&model, ex).unwrap())
            .sum::<f64>()
            / 2.0;
        let loss = mixed_loss(&model, &batch, &w).unwrap();
        assert!((loss - mean_ce).abs() < 1e-15);
    }

    #[test]
    fn all_original_batch_is_plain_mean_cross_entropy() {
        let batch = vec![
            example(vec![vec![2.0, 1.0]], vec![1.0, 0.0], Provenance::Original),
            example(vec![vec![1.0, 3.0]], vec![0.0, 1.0], Provenance::Original),
        ];
        let mut weights = vec![0.0; 4];
        weights[0] = 0.7;
        weights[3] = -0.2;
        let model = LinearClassifier::new(2, 2, weights, vec![0.1, -0.1]).unwrap();
        let w = LossWeights {
            delta: 1.0,
            tau: 0.0,
            eta: 0.0,
        };
        let expected = (example_loss(&model, &batch[0]).unwrap()
            + example_loss(&model, &batch[1]).unwrap())
            / 2.0;
        assert_eq!(mixed_loss(&model, &batch, &w).unwrap(), expected);
    }

    #[test]
    fn balanced_batch_zero_model_has_zero_bias_gradient() {
        let batch = vec![
            example(vec![vec![1.0, 0.0]], vec![1.0, 0.0], Provenance::Original),
            example(vec![vec![0.0, 1.0]], vec![0.0, 1.0], Provenance::Original),
            example(vec![vec![2.0, 0.0]], vec![1.0, 0.0], Provenance::Original),
            example(vec![vec![0.0, 2.0]], vec![0.0, 1.0], Provenance::Original),
        ];
        let model = LinearClassifier::<f64>::zeros(2, 2).unwrap();
        let w = LossWeights {
            delta: 1.0,
            tau: 0.0,
            eta: 0.0,
        };
        let grad = gradient(&model, &batch, &w).unwrap();
        assert_eq!(grad.bias, vec![0.0, 0.0]);
    }

    #[test]
    fn single_example_gradient_matches_the_outer_product() {
        // One original example, c = 2: gradient is (p - y) outer h.
        let ex = example(vec![vec![0.5, -1.5]], vec![1.0, 0.0], Provenance::Original);
        let model = LinearClassifier::new(2, 2, vec![0.3, -0.1, 0.2, 0.4], vec![0.05, -0.05])
            .unwrap();
        let w = LossWeights {
            delta: 1.0,
            tau: 0.0,
            eta: 0.0,
        };
        let grad = gradient(&model, std::slice::from_ref(&ex), &w).unwrap();
        let p = forward(&model, &ex.seq).unwrap();
        let h = [0.5, -1.5];
        for k in 0..2 {
            let diff = p.probs()[k] - ex.label.probs()[k];
            assert!((grad.bias[k] - diff).abs() < 1e-15);
            for (j, &hj) in h.iter().enumerate() {
                assert!((grad.weights[j * 2 + k] - hj * diff).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_rate_step_is_a_no_op() {
        let mut model = LinearClassifier::new(1, 2, vec![0.4, -0.4], vec![0.1, 0.2]).unwrap();
        let before = model.clone();
        let grad = Gradient {
            weights: vec![10.0, -3.0],
            bias: vec![1.0, 2.0],
        };
        sgd_step(&mut model, &grad, 0.0);
        assert_eq!(model, before);
    }

    #[test]
    fn train_rejects_nonpositive_rate() {
        let cfg = TrainConfig::<f64> {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn evaluate_counts_matches_and_inversions() {
        let examples = vec![
            example(vec![vec![5.0, 0.0]], vec![1.0, 0.0], Provenance::Original),
            example(vec![vec![0.0, 5.0]], vec![0.0, 1.0], Provenance::Original),
        ];
        let dataset = Dataset::new(examples).unwrap();
        // Identity-ish model: class 0 weight on dim 0, class 1 on dim 1.
        let good = LinearClassifier::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate(&good, &dataset).unwrap(), 1.0);
        // Swapped columns invert every prediction.
        let bad = LinearClassifier::new(2, 2, vec![0.0, 1.0, 1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(evaluate(&bad, &dataset).unwrap(), 0.0);
    }

    #[test]
    fn training_replays_bit_exactly_under_a_seed() {
        let examples: Vec<Example<f64>> = (0..20)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                example(
                    vec![vec![sign * (1.0 + i as f64 * 0.05), 0.3]],
                    if i % 2 == 0 {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    },
                    Provenance::Original,
                )
            })
            .collect();
        let dataset = Dataset::new(examples).unwrap();
        let cfg = TrainConfig::<f64> {
            epochs: 5,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let (m1, t1) = train(&dataset, &cfg).unwrap();
        let (m2, t2) = train(&dataset, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let model = LinearClassifier::new(
            3,
            2,
            vec![0.1, -0.2, 3.5e-7, 1.0 / 3.0, -9.25, 0.0],
            vec![f64::MIN_POSITIVE, 42.0],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_checkpoint(&model, &path).unwrap();
        let loaded: LinearClassifier<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        std::fs::write(&path, [1, 0, 0, 0, 2, 0, 0, 0, 9, 9]).unwrap();
        assert!(load_checkpoint::<f64>(&path).is_err());
    }
}
