//! Mini-batch training with softmax cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_rows, LabeledDataset, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum number of epochs; training stops early once training
    /// accuracy reaches 1.0.
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 128,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::CrossEntropy,
            seed: 0,
        }
    }
}

/// Metrics recorded after each epoch's updates, over the full splits.
/// Test metrics are NaN when the test split is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Accuracy and mean cross-entropy loss of a network on labeled points.
/// Predictions take the argmax over outputs, lowest index winning ties.
pub fn evaluate(params: &MlpParams, xs: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, f64)> {
    if xs.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if xs.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} labels",
            xs.nrows(),
            labels.len()
        )));
    }
    let (logits, _) = super::forward_batch(params, xs)?;
    let mut correct = 0usize;
    for (row, &label) in logits.axis_iter(Axis(0)).zip(labels) {
        let pred = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
            .0;
        if pred == label {
            correct += 1;
        }
    }
    let acc = correct as f64 / labels.len() as f64;
    Ok((acc, mean_cross_entropy(&logits, labels)))
}

/// Mean of `logsumexp(z) - z[label]` over rows; stable for extreme logits.
fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in logits.axis_iter(Axis(0)).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    total / labels.len() as f64
}

/// Mean batch loss and its gradient with respect to every weight and bias,
/// by backpropagation. ReLU passes gradient only where the unit is active
/// (pre-activation strictly positive), matching the pattern convention.
pub fn loss_and_grads(
    params: &MlpParams,
    xs: ArrayView2<f64>,
    labels: &[usize],
) -> Result<(f64, Vec<Array2<f64>>, Vec<Array1<f64>>)> {
    let depth = params.config.depth;
    let batch = xs.nrows() as f64;

    // forward, keeping each layer's post-ReLU activations
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(depth + 1);
    activations.push(xs.to_owned());
    for l in 0..depth {
        let mut z = activations[l].dot(&params.weights[l].t());
        z += &params.biases[l];
        z.mapv_inplace(|v| v.max(0.0));
        activations.push(z);
    }
    let mut logits = activations[depth].dot(&params.weights[depth].t());
    logits += &params.biases[depth];

    let loss = mean_cross_entropy(&logits, labels);

    // d(mean loss)/d(logits) = (softmax - onehot) / batch
    let mut delta = softmax_rows(logits.view());
    for (mut row, &label) in delta.axis_iter_mut(Axis(0)).zip(labels) {
        row[label] -= 1.0;
    }
    delta /= batch;

    let mut grad_w = vec![Array2::zeros((0, 0)); depth + 1];
    let mut grad_b = vec![Array1::zeros(0); depth + 1];
    for l in (0..=depth).rev() {
        grad_w[l] = delta.t().dot(&activations[l]);
        grad_b[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut back = delta.dot(&params.weights[l]);
            back.zip_mut_with(&activations[l], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = back;
        }
    }
    Ok((loss, grad_w, grad_b))
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(params: &MlpParams) -> Self {
        Self {
            m_w: params.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_w: params.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_b: params.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_b: params.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut MlpParams, grad_w: &[Array2<f64>], grad_b: &[Array1<f64>], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for l in 0..params.weights.len() {
            adam_update(&mut params.weights[l], &mut self.m_w[l], &mut self.v_w[l], &grad_w[l], lr, bc1, bc2);
            adam_update_1d(&mut params.biases[l], &mut self.m_b[l], &mut self.v_b[l], &grad_b[l], lr, bc1, bc2);
        }
    }
}

fn adam_update(
    theta: &mut Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    g: &Array2<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(theta).and(m).and(v).and(g).for_each(|t, m, v, &g| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *t -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
    });
}

fn adam_update_1d(
    theta: &mut Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    g: &Array1<f64>,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    ndarray::Zip::from(theta).and(m).and(v).and(g).for_each(|t, m, v, &g| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *t -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
    });
}

/// Trains a copy of the network on the dataset's training split and returns
/// it with one [`EpochRecord`] per completed epoch. Mini-batches are drawn
/// by reshuffling the training set each epoch with a generator seeded from
/// `tc.seed`, so results are reproducible. Stops before `tc.epochs` once
/// training accuracy hits 1.0; a non-finite batch loss aborts with the
/// offending epoch.
pub fn train(
    params: &MlpParams,
    data: &LabeledDataset,
    tc: &TrainConfig,
) -> Result<(MlpParams, Vec<EpochRecord>)> {
    params.validate()?;
    validate_train_inputs(params, data, tc)?;

    let train_xs = data.train_points();
    let train_ys = data.train_labels();
    let test_xs = data.test_points();
    let test_ys = data.test_labels();

    let mut current = params.clone();
    let mut adam = match tc.optimizer {
        OptimizerKind::Adam => Some(AdamState::new(&current)),
        OptimizerKind::Sgd => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..train_xs.nrows()).collect();
    let mut history = Vec::new();

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(tc.batch_size) {
            let xs = select_rows(&train_xs, chunk);
            let ys: Vec<usize> = chunk.iter().map(|&i| train_ys[i]).collect();
            let (loss, grad_w, grad_b) = loss_and_grads(&current, xs.view(), &ys)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            match &mut adam {
                Some(state) => state.step(&mut current, &grad_w, &grad_b, tc.learning_rate),
                None => {
                    for l in 0..current.weights.len() {
                        current.weights[l].scaled_add(-tc.learning_rate, &grad_w[l]);
                        current.biases[l].scaled_add(-tc.learning_rate, &grad_b[l]);
                    }
                }
            }
        }

        let (train_accuracy, train_loss) = evaluate(&current, train_xs, train_ys)?;
        let (test_accuracy, test_loss) = if test_ys.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            evaluate(&current, test_xs, test_ys)?
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
        });
        if train_accuracy == 1.0 {
            break;
        }
    }
    Ok((current, history))
}

fn validate_train_inputs(params: &MlpParams, data: &LabeledDataset, tc: &TrainConfig) -> Result<()> {
    if data.input_dim() != params.config.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {}-dimensional points, network expects {}",
            data.input_dim(),
            params.config.input_dim
        )));
    }
    if data.n_classes != params.config.output_dim {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} classes, network has {} outputs",
            data.n_classes,
            params.config.output_dim
        )));
    }
    match tc.loss {
        LossKind::CrossEntropy => {
            if data.n_classes < 2 {
                return Err(Error::InvalidConfig(
                    "cross-entropy needs at least 2 classes".into(),
                ));
            }
        }
    }
    if tc.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be >= 1".into()));
    }
    if !(tc.learning_rate.is_finite() && tc.learning_rate >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning_rate must be finite and non-negative, got {}",
            tc.learning_rate
        )));
    }
    if tc.batch_size == 0 || tc.batch_size > data.train_count() {
        return Err(Error::InvalidConfig(format!(
            "batch_size {} outside 1..={} (training split size)",
            tc.batch_size,
            data.train_count()
        )));
    }
    Ok(())
}

fn select_rows(xs: &ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), xs.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&xs.row(i));
    }
    out
}
